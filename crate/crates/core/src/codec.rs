//! Byte layouts of the signal, CH and CM packets.
//!
//! ```text
//! signal (11 B)  ch_id public private cm0 cm1 cm2 cm3 neighbor_ch 0 0 0
//! ch (13 B + n)  flags node energy next_ch cm_id cm_energy n payload[n]
//!                secret public cm_energy2 st_mzkp st_promisc st_mine
//! cm (4 B + n)   node energy ch_id n payload[n]
//!
//! flags (MSB first): hier is_ch role:2 trap mine promisc reserved
//! ```
//!
//! A CH frame with `hier` clear is a flat-routing frame: only `node_id`,
//! `energy` and the payload are meaningful, every other field goes out as
//! zero and decodes as zero.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::Femtojoules;
use crate::security::{SecurityRole, SecurityStatus, TriState};
use crate::topology::NodeId;

pub const SIGNAL_LEN: usize = 11;
pub const CH_HEADER_LEN: usize = 13;
pub const CM_HEADER_LEN: usize = 4;
/// A data message is 1000 bits.
pub const CM_PAYLOAD_MAX: usize = 125;
pub const CH_PAYLOAD_MAX: usize = 255;
/// Marks an unused slot in a signal packet's member list.
pub const EMPTY_SLOT: u8 = 0xFF;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("expected {expected} bytes, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("buffer truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("payload of {len} bytes exceeds the {max}-byte limit")]
    PayloadTooLong { len: usize, max: usize },
    #[error("invalid security status byte {0:#04x}")]
    BadStatus(u8),
}

/// Residual energy as a fraction of initial energy, in 1/255 steps.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnergyByte(pub u8);

impl EnergyByte {
    pub fn quantize(residual: Femtojoules, initial: Femtojoules) -> Self {
        if initial.0 == 0 {
            return EnergyByte(0);
        }
        let (e, init) = (u128::from(residual.0), u128::from(initial.0));
        let q = (e * 255 * 2 + init) / (init * 2);
        EnergyByte(q.min(255) as u8)
    }

    pub fn dequantize(self, initial: Femtojoules) -> Femtojoules {
        Femtojoules((u128::from(self.0) * u128::from(initial.0) / 255) as u64)
    }
}

/// Sink-to-CH key and membership notice.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalPacket {
    pub ch_id: u8,
    pub public_key: u8,
    pub private_key: u8,
    /// Up to four member ids, [`EMPTY_SLOT`] where unused.
    pub cm_ids: [u8; 4],
    pub neighbor_ch_id: u8,
}

impl SignalPacket {
    /// One packet per four members; a CH with no members still gets one.
    pub fn for_cluster(ch: NodeId, public: u8, private: u8, neighbor: NodeId, members: &[NodeId]) -> Vec<Self> {
        let mut out: Vec<Self> = members
            .chunks(4)
            .map(|chunk| {
                let mut cm_ids = [EMPTY_SLOT; 4];
                for (slot, id) in cm_ids.iter_mut().zip(chunk) {
                    *slot = id.0;
                }
                SignalPacket {
                    ch_id: ch.0,
                    public_key: public,
                    private_key: private,
                    cm_ids,
                    neighbor_ch_id: neighbor.0,
                }
            })
            .collect();
        if out.is_empty() {
            out.push(SignalPacket {
                ch_id: ch.0,
                public_key: public,
                private_key: private,
                cm_ids: [EMPTY_SLOT; 4],
                neighbor_ch_id: neighbor.0,
            });
        }
        out
    }

    pub fn members(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.cm_ids.iter().filter(|b| **b != EMPTY_SLOT).map(|b| NodeId(*b))
    }
}

pub fn encode_signal(p: &SignalPacket) -> [u8; SIGNAL_LEN] {
    let c = p.cm_ids;
    [
        p.ch_id,
        p.public_key,
        p.private_key,
        c[0],
        c[1],
        c[2],
        c[3],
        p.neighbor_ch_id,
        0,
        0,
        0,
    ]
}

pub fn decode_signal(buf: &[u8]) -> Result<SignalPacket, CodecError> {
    let b: &[u8; SIGNAL_LEN] = buf.try_into().map_err(|_| CodecError::WrongLength {
        expected: SIGNAL_LEN,
        got: buf.len(),
    })?;
    Ok(SignalPacket {
        ch_id: b[0],
        public_key: b[1],
        private_key: b[2],
        cm_ids: [b[3], b[4], b[5], b[6]],
        neighbor_ch_id: b[7],
    })
}

/// A CH's aggregated frame, or a flat node's frame when `hier` is false.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChFrame {
    pub hier: bool,
    pub is_ch: bool,
    pub role: SecurityRole,
    pub trap_enable: bool,
    pub mine_enable: bool,
    pub promisc_enable: bool,
    pub node_id: NodeId,
    pub energy: EnergyByte,
    pub next_ch_id: NodeId,
    pub cm_id: NodeId,
    pub cm_energy: EnergyByte,
    pub payload: Vec<u8>,
    pub secret_key: u8,
    pub public_key: u8,
    /// The member energy echoed back after aggregation.
    pub cm_energy2: EnergyByte,
    pub status: SecurityStatus,
}

impl ChFrame {
    pub fn flat(node_id: NodeId, energy: EnergyByte, payload: Vec<u8>) -> Self {
        Self {
            node_id,
            energy,
            payload,
            ..Self::default()
        }
    }

    /// The frame as it reads back off the wire.
    pub fn normalized(&self) -> Self {
        if self.hier {
            self.clone()
        } else {
            Self::flat(self.node_id, self.energy, self.payload.clone())
        }
    }

    pub fn encoded_len(&self) -> usize {
        CH_HEADER_LEN + self.payload.len()
    }

    fn flags(&self) -> u8 {
        u8::from(self.hier) << 7
            | u8::from(self.is_ch) << 6
            | self.role.bits() << 4
            | u8::from(self.trap_enable) << 3
            | u8::from(self.mine_enable) << 2
            | u8::from(self.promisc_enable) << 1
    }
}

pub fn encode_ch(f: &ChFrame) -> Result<Vec<u8>, CodecError> {
    if f.payload.len() > CH_PAYLOAD_MAX {
        return Err(CodecError::PayloadTooLong {
            len: f.payload.len(),
            max: CH_PAYLOAD_MAX,
        });
    }
    let f = f.normalized();
    let mut out = Vec::with_capacity(f.encoded_len());
    out.extend_from_slice(&[
        f.flags(),
        f.node_id.0,
        f.energy.0,
        f.next_ch_id.0,
        f.cm_id.0,
        f.cm_energy.0,
        f.payload.len() as u8,
    ]);
    out.extend_from_slice(&f.payload);
    out.extend_from_slice(&[f.secret_key, f.public_key, f.cm_energy2.0]);
    out.extend_from_slice(&f.status.bytes());
    Ok(out)
}

fn status_byte(b: u8) -> Result<TriState, CodecError> {
    TriState::from_byte(b).ok_or(CodecError::BadStatus(b))
}

pub fn decode_ch(buf: &[u8]) -> Result<ChFrame, CodecError> {
    if buf.len() < CH_HEADER_LEN {
        return Err(CodecError::Truncated {
            need: CH_HEADER_LEN,
            have: buf.len(),
        });
    }
    let len = usize::from(buf[6]);
    let need = CH_HEADER_LEN + len;
    if buf.len() != need {
        return Err(if buf.len() < need {
            CodecError::Truncated { need, have: buf.len() }
        } else {
            CodecError::WrongLength {
                expected: need,
                got: buf.len(),
            }
        });
    }
    let flags = buf[0];
    let tail = &buf[7 + len..];
    let frame = ChFrame {
        hier: flags & 0x80 != 0,
        is_ch: flags & 0x40 != 0,
        role: SecurityRole::from_bits(flags >> 4),
        trap_enable: flags & 0x08 != 0,
        mine_enable: flags & 0x04 != 0,
        promisc_enable: flags & 0x02 != 0,
        node_id: NodeId(buf[1]),
        energy: EnergyByte(buf[2]),
        next_ch_id: NodeId(buf[3]),
        cm_id: NodeId(buf[4]),
        cm_energy: EnergyByte(buf[5]),
        payload: buf[7..7 + len].to_vec(),
        secret_key: tail[0],
        public_key: tail[1],
        cm_energy2: EnergyByte(tail[2]),
        status: SecurityStatus {
            mzkp: status_byte(tail[3])?,
            promisc: status_byte(tail[4])?,
            mine: status_byte(tail[5])?,
        },
    };
    Ok(frame.normalized())
}

/// A member's sensed report to its CH.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmReport {
    pub node_id: NodeId,
    pub energy: EnergyByte,
    pub ch_id: NodeId,
    pub payload: Vec<u8>,
}

impl CmReport {
    pub fn encoded_len(&self) -> usize {
        CM_HEADER_LEN + self.payload.len()
    }
}

pub fn encode_cm(r: &CmReport) -> Result<Vec<u8>, CodecError> {
    if r.payload.len() > CM_PAYLOAD_MAX {
        return Err(CodecError::PayloadTooLong {
            len: r.payload.len(),
            max: CM_PAYLOAD_MAX,
        });
    }
    let mut out = Vec::with_capacity(r.encoded_len());
    out.extend_from_slice(&[r.node_id.0, r.energy.0, r.ch_id.0, r.payload.len() as u8]);
    out.extend_from_slice(&r.payload);
    Ok(out)
}

pub fn decode_cm(buf: &[u8]) -> Result<CmReport, CodecError> {
    if buf.len() < CM_HEADER_LEN {
        return Err(CodecError::Truncated {
            need: CM_HEADER_LEN,
            have: buf.len(),
        });
    }
    let len = usize::from(buf[3]);
    if len > CM_PAYLOAD_MAX {
        return Err(CodecError::PayloadTooLong {
            len,
            max: CM_PAYLOAD_MAX,
        });
    }
    let need = CM_HEADER_LEN + len;
    if buf.len() < need {
        return Err(CodecError::Truncated { need, have: buf.len() });
    }
    if buf.len() > need {
        return Err(CodecError::WrongLength {
            expected: need,
            got: buf.len(),
        });
    }
    Ok(CmReport {
        node_id: NodeId(buf[0]),
        energy: EnergyByte(buf[1]),
        ch_id: NodeId(buf[2]),
        payload: buf[CM_HEADER_LEN..].to_vec(),
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PacketKind {
    Signal,
    Ch,
    Cm,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Packet {
    Signal(SignalPacket),
    Ch(ChFrame),
    Cm(CmReport),
}

pub fn decode(kind: PacketKind, buf: &[u8]) -> Result<Packet, CodecError> {
    Ok(match kind {
        PacketKind::Signal => Packet::Signal(decode_signal(buf)?),
        PacketKind::Ch => Packet::Ch(decode_ch(buf)?),
        PacketKind::Cm => Packet::Cm(decode_cm(buf)?),
    })
}

struct Hex<'a>(&'a [u8]);

impl fmt::Display for Hex<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

fn tri(t: TriState) -> &'static str {
    match t {
        TriState::Unknown => "unknown",
        TriState::Pass => "pass",
        TriState::Fail => "fail",
    }
}

impl fmt::Display for Packet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Packet::Signal(p) => {
                writeln!(f, "signal packet ({SIGNAL_LEN} bytes)")?;
                writeln!(f, "  ch_id           {}", p.ch_id)?;
                writeln!(f, "  public_key      {:#04x}", p.public_key)?;
                writeln!(f, "  private_key     {:#04x}", p.private_key)?;
                write!(f, "  cm_ids         ")?;
                for b in p.cm_ids {
                    if b == EMPTY_SLOT {
                        write!(f, " -")?;
                    } else {
                        write!(f, " {b}")?;
                    }
                }
                writeln!(f)?;
                writeln!(f, "  neighbor_ch_id  {}", p.neighbor_ch_id)
            }
            Packet::Ch(c) => {
                writeln!(f, "ch frame ({} bytes)", c.encoded_len())?;
                writeln!(f, "  hier            {}", u8::from(c.hier))?;
                writeln!(f, "  is_ch           {}", u8::from(c.is_ch))?;
                writeln!(f, "  role            {:?}", c.role)?;
                writeln!(f, "  trap/mine/prom  {}{}{}", u8::from(c.trap_enable), u8::from(c.mine_enable), u8::from(c.promisc_enable))?;
                writeln!(f, "  node_id         {}", c.node_id.0)?;
                writeln!(f, "  energy          {}/255", c.energy.0)?;
                writeln!(f, "  next_ch_id      {}", c.next_ch_id.0)?;
                writeln!(f, "  cm_id           {}", c.cm_id.0)?;
                writeln!(f, "  cm_energy       {}/255", c.cm_energy.0)?;
                writeln!(f, "  payload [{}]     {}", c.payload.len(), Hex(&c.payload))?;
                writeln!(f, "  secret_key      {:#04x}", c.secret_key)?;
                writeln!(f, "  public_key      {:#04x}", c.public_key)?;
                writeln!(f, "  cm_energy2      {}/255", c.cm_energy2.0)?;
                writeln!(
                    f,
                    "  status          mzkp={} promisc={} mine={}",
                    tri(c.status.mzkp),
                    tri(c.status.promisc),
                    tri(c.status.mine)
                )
            }
            Packet::Cm(r) => {
                writeln!(f, "cm report ({} bytes)", r.encoded_len())?;
                writeln!(f, "  node_id         {}", r.node_id.0)?;
                writeln!(f, "  energy          {}/255", r.energy.0)?;
                writeln!(f, "  ch_id           {}", r.ch_id.0)?;
                writeln!(f, "  payload [{}]     {}", r.payload.len(), Hex(&r.payload))
            }
        }
    }
}
