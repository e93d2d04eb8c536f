//! MZKP identity gate, promiscuous hearing, adversary trapping and mine
//! detection.
//!
//! The MZKP answer function is `s²·q mod n` over one-byte values. It gives the
//! protocol its challenge/response shape and nothing more: a one-byte secret
//! falls to a 255-way search.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{ClusterPlan, Hop};
use crate::topology::{find, NodeId, NodeRecord};

/// The 2-bit role field.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecurityRole {
    #[default]
    None,
    Prover,
    Verifier,
    ProverVerifier,
}

impl SecurityRole {
    pub fn bits(self) -> u8 {
        match self {
            SecurityRole::None => 0b00,
            SecurityRole::Prover => 0b01,
            SecurityRole::Verifier => 0b10,
            SecurityRole::ProverVerifier => 0b11,
        }
    }

    /// Only the low two bits are read.
    pub fn from_bits(bits: u8) -> Self {
        match bits & 0b11 {
            0b00 => SecurityRole::None,
            0b01 => SecurityRole::Prover,
            0b10 => SecurityRole::Verifier,
            _ => SecurityRole::ProverVerifier,
        }
    }

    pub fn is_prover(self) -> bool {
        self.bits() & 0b01 != 0
    }

    pub fn is_verifier(self) -> bool {
        self.bits() & 0b10 != 0
    }

    pub fn with(self, other: SecurityRole) -> Self {
        Self::from_bits(self.bits() | other.bits())
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriState {
    #[default]
    Unknown,
    Pass,
    Fail,
}

impl TriState {
    pub fn byte(self) -> u8 {
        match self {
            TriState::Unknown => 0,
            TriState::Pass => 1,
            TriState::Fail => 2,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(TriState::Unknown),
            1 => Some(TriState::Pass),
            2 => Some(TriState::Fail),
            _ => None,
        }
    }

    /// A fail is sticky until the sink resets statuses.
    pub fn record(&mut self, outcome: TriState) {
        if *self != TriState::Fail {
            *self = outcome;
        }
    }
}

/// Outcome of each mechanism for one node, as read by the sink.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityStatus {
    pub mzkp: TriState,
    pub promisc: TriState,
    pub mine: TriState,
}

impl SecurityStatus {
    pub fn has_fail(&self) -> bool {
        [self.mzkp, self.promisc, self.mine].contains(&TriState::Fail)
    }

    pub fn bytes(&self) -> [u8; 3] {
        [self.mzkp.byte(), self.promisc.byte(), self.mine.byte()]
    }
}

/// Residual-energy fractions (of a node's initial energy) that a CH must
/// exceed to run each mechanism.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SecurityThresholds {
    pub mzkp: f64,
    pub trapping: f64,
    pub mine: f64,
}

impl Default for SecurityThresholds {
    fn default() -> Self {
        Self {
            mzkp: 0.25,
            trapping: 0.5,
            mine: 0.10,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SecurityToggles {
    pub mzkp: bool,
    pub promiscuous: bool,
    pub trapping: bool,
    pub mine: bool,
}

impl Default for SecurityToggles {
    fn default() -> Self {
        Self::all(true)
    }
}

impl SecurityToggles {
    pub fn all(on: bool) -> Self {
        Self {
            mzkp: on,
            promiscuous: on,
            trapping: on,
            mine: on,
        }
    }

    pub fn any(&self) -> bool {
        self.mzkp || self.promiscuous || self.trapping || self.mine
    }
}

/// What the sink hands one CH at (re)formation.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChSecurity {
    pub role: SecurityRole,
    /// Zero unless the CH is a Prover.
    pub secret: u8,
    pub trap_enable: bool,
    pub mine_enable: bool,
    pub promisc_enable: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMaterial {
    pub secret_s: u8,
    pub public_n: u8,
    pub epoch: u32,
}

/// One epoch of keys, roles and enable bits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issuance {
    pub epoch: u32,
    pub public_n: u8,
    pub per_ch: BTreeMap<NodeId, ChSecurity>,
}

impl Issuance {
    pub fn get(&self, ch: NodeId) -> ChSecurity {
        self.per_ch.get(&ch).copied().unwrap_or_default()
    }

    pub fn keys(&self, prover: NodeId) -> Option<KeyMaterial> {
        self.per_ch
            .get(&prover)
            .filter(|s| s.role.is_prover())
            .map(|s| KeyMaterial {
                secret_s: s.secret,
                public_n: self.public_n,
                epoch: self.epoch,
            })
    }

    /// Whether the hop `from → to` runs the MZKP gate.
    pub fn gated(&self, from: NodeId, to: NodeId) -> bool {
        self.get(from).role.is_prover() && self.get(to).role.is_verifier()
    }
}

/// Smallest modulus the sink issues; keeps the wrong-key collision rate low.
pub const MODULUS_MIN: u8 = 129;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MzkpError {
    #[error("modulus must be odd and at least 3, got {0}")]
    InvalidModulus(u8),
    #[error("challenge must be nonzero")]
    ZeroChallenge,
    #[error("no keys issued to node {0}")]
    UnknownProver(NodeId),
}

fn above(node: &NodeRecord, fraction: f64) -> bool {
    node.residual.0 as f64 > fraction * node.initial.0 as f64
}

/// Assigns roles along upstream CH→CH edges, draws fresh keys and sets the
/// enable bits.
///
/// Keys always rotate: N and every secret S differ from the previous epoch's.
pub fn issue_keys_and_roles<R: Rng + ?Sized>(
    plan: &ClusterPlan,
    nodes: &[NodeRecord],
    thresholds: &SecurityThresholds,
    toggles: &SecurityToggles,
    previous: Option<&Issuance>,
    rng: &mut R,
) -> Issuance {
    let rich = |id: NodeId, frac: f64| find(nodes, id).is_some_and(|n| n.is_active() && above(n, frac));
    let mut per_ch: BTreeMap<NodeId, ChSecurity> =
        plan.ch_ids().map(|id| (id, ChSecurity::default())).collect();

    if toggles.mzkp {
        for (from, hop) in &plan.upstream {
            if let Hop::Ch(to) = hop {
                if rich(*from, thresholds.mzkp) && rich(*to, thresholds.mzkp) {
                    let f = per_ch.entry(*from).or_default();
                    f.role = f.role.with(SecurityRole::Prover);
                    let t = per_ch.entry(*to).or_default();
                    t.role = t.role.with(SecurityRole::Verifier);
                }
            }
        }
    }

    let public_n = loop {
        let n = rng.random_range(MODULUS_MIN / 2..=127) * 2 + 1;
        if previous.is_none_or(|p| p.public_n != n) {
            break n;
        }
    };
    for (id, sec) in per_ch.iter_mut() {
        if sec.role.is_prover() {
            let old = previous.and_then(|p| p.per_ch.get(id)).map(|s| s.secret);
            sec.secret = loop {
                let s = rng.random_range(1..=255u8);
                if old != Some(s) {
                    break s;
                }
            };
        }
        sec.trap_enable = toggles.trapping && rich(*id, thresholds.trapping);
        sec.mine_enable = toggles.mine && rich(*id, thresholds.mine);
        sec.promisc_enable = toggles.promiscuous && sec.role.is_prover();
    }

    Issuance {
        epoch: previous.map_or(0, |p| p.epoch + 1),
        public_n,
        per_ch,
    }
}

/// `(s² · q) mod n`
pub fn mzkp_answer(s: u8, n: u8, q: u8) -> Result<u8, MzkpError> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(MzkpError::InvalidModulus(n));
    }
    if q == 0 {
        return Err(MzkpError::ZeroChallenge);
    }
    let (s, n, q) = (u32::from(s), u32::from(n), u32::from(q));
    Ok((s * s * q % n) as u8)
}

/// A fresh sink challenge: nonzero and not a multiple of `n`, so the answer
/// depends on the secret.
pub fn draw_challenge<R: Rng + ?Sized>(n: u8, rng: &mut R) -> u8 {
    loop {
        let q = rng.random_range(1..=255u8);
        if n == 0 || q % n != 0 {
            return q;
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Block,
}

/// The sink compares a relayed answer with the one it can compute itself.
pub fn mzkp_adjudicate(issuance: &Issuance, prover: NodeId, claimed: u8, q: u8) -> Result<Verdict, MzkpError> {
    let keys = issuance.keys(prover).ok_or(MzkpError::UnknownProver(prover))?;
    let expected = mzkp_answer(keys.secret_s, keys.public_n, q)?;
    Ok(if claimed == expected {
        Verdict::Accept
    } else {
        Verdict::Block
    })
}

/// The prover's view of the verifier after listening for its ack.
pub fn promiscuous_audit(verifier_status: &mut SecurityStatus, ack_heard: bool) -> TriState {
    let outcome = if ack_heard { TriState::Pass } else { TriState::Fail };
    verifier_status.promisc.record(outcome);
    outcome
}

/// Decoy traffic sent away from the sink.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DummyPacket {
    pub ttl: u8,
    pub origin: NodeId,
    pub nonce: u8,
}

impl DummyPacket {
    /// The packet after one more hop, or `None` once it expires.
    pub fn hop(self) -> Option<DummyPacket> {
        match self.ttl {
            0 | 1 => None,
            t => Some(DummyPacket { ttl: t - 1, ..self }),
        }
    }
}

/// Walks a dummy down the CH tree: each hop goes to a uniformly drawn
/// downstream CH accepted by `usable`. Returns the `(from, to)` hops taken;
/// the walk ends when the ttl runs out or there is nowhere further to go.
pub fn spawn_dummy_traffic<R: Rng + ?Sized>(
    ch: NodeId,
    ttl: u8,
    plan: &ClusterPlan,
    usable: impl Fn(NodeId) -> bool,
    rng: &mut R,
) -> (DummyPacket, Vec<(NodeId, NodeId)>) {
    let packet = DummyPacket {
        ttl,
        origin: ch,
        nonce: rng.random(),
    };
    let mut hops = Vec::new();
    let mut live = Some(packet);
    let mut at = ch;
    while let Some(p) = live {
        if p.ttl == 0 {
            break;
        }
        let next: Vec<NodeId> = plan.downstream(at).into_iter().filter(|id| usable(*id)).collect();
        if next.is_empty() {
            break;
        }
        let to = next[rng.random_range(0..next.len())];
        hops.push((at, to));
        at = to;
        live = p.hop();
    }
    (packet, hops)
}

/// Members that fail to answer the probe. Dead members cannot answer.
pub fn mine_detection_sweep<'a>(
    members: impl IntoIterator<Item = &'a NodeRecord>,
    answers: impl Fn(&NodeRecord) -> bool,
) -> Vec<NodeId> {
    members
        .into_iter()
        .filter(|n| n.is_dead() || !answers(n))
        .map(|n| n.id)
        .collect()
}

/// Binary entropy (bits) of the away-from-sink share of observed flows.
/// Zero when every flow points the same way, one when the split is even.
pub fn directional_entropy(away: u64, total: u64) -> f64 {
    if total == 0 || away == 0 || away >= total {
        return 0.0;
    }
    let p = away as f64 / total as f64;
    let q = 1.0 - p;
    -(p * libm::log2(p) + q * libm::log2(q))
}
