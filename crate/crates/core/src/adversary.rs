//! Attack profiles and the hook the engine consults before every duty a node
//! performs.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{NodeId, NodeRecord};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttackKind {
    /// Holds a forged secret and answers MZKP challenges with it.
    Compromised { wrong_secret: u8 },
    /// Drops each forwarded bundle with `drop_prob` and withholds its ack.
    SelectiveForward { drop_prob: f64 },
    /// Absorbs everything: no forwarding, acks, reports or dummy acks.
    BlackHole,
    /// Ignores mine-detection probes, otherwise honest.
    SelfIntruder,
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::Compromised { .. } => "compromised",
            AttackKind::SelectiveForward { .. } => "selective_forward",
            AttackKind::BlackHole => "black_hole",
            AttackKind::SelfIntruder => "self_intruder",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackProfile {
    pub kind: AttackKind,
    #[serde(default)]
    pub activation_time_s: f64,
}

impl AttackProfile {
    pub fn new(kind: AttackKind) -> Self {
        Self {
            kind,
            activation_time_s: 0.0,
        }
    }

    pub fn active_at(&self, now_s: f64) -> bool {
        now_s >= self.activation_time_s
    }
}

/// Relative weights of the four kinds plus shared parameters.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackMix {
    pub compromised: f64,
    pub selective_forward: f64,
    pub black_hole: f64,
    pub self_intruder: f64,
    pub drop_prob: f64,
    pub activation_time_s: f64,
}

impl Default for AttackMix {
    fn default() -> Self {
        Self {
            compromised: 1.0,
            selective_forward: 1.0,
            black_hole: 1.0,
            self_intruder: 1.0,
            drop_prob: 0.5,
            activation_time_s: 0.0,
        }
    }
}

impl AttackMix {
    /// Everything of one kind.
    pub fn only(kind: &str) -> Option<Self> {
        let mut m = Self {
            compromised: 0.0,
            selective_forward: 0.0,
            black_hole: 0.0,
            self_intruder: 0.0,
            ..Self::default()
        };
        match kind {
            "compromised" => m.compromised = 1.0,
            "selective_forward" => m.selective_forward = 1.0,
            "black_hole" => m.black_hole = 1.0,
            "self_intruder" => m.self_intruder = 1.0,
            _ => return None,
        }
        Some(m)
    }

    fn weights(&self) -> [f64; 4] {
        [self.compromised, self.selective_forward, self.black_hole, self.self_intruder]
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        let w = self.weights();
        if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) || !(w.iter().sum::<f64>() > 0.0) {
            return Err(AttackError::InvalidMix);
        }
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(AttackError::InvalidDropProb(self.drop_prob));
        }
        if !(self.activation_time_s >= 0.0) {
            return Err(AttackError::InvalidActivation(self.activation_time_s));
        }
        Ok(())
    }

    /// Splits `total` attackers across the kinds by largest remainder; ties go
    /// to the kind listed first.
    pub fn apportion(&self, total: usize) -> [usize; 4] {
        let w = self.weights();
        let sum: f64 = w.iter().sum();
        let quotas: [f64; 4] = core::array::from_fn(|i| w[i] / sum * total as f64);
        let mut counts: [usize; 4] = core::array::from_fn(|i| quotas[i] as usize);
        let mut left = total - counts.iter().sum::<usize>();
        let mut order: [usize; 4] = [0, 1, 2, 3];
        order.sort_by(|a, b| {
            let ra = quotas[*a] - counts[*a] as f64;
            let rb = quotas[*b] - counts[*b] as f64;
            rb.total_cmp(&ra).then(a.cmp(b))
        });
        for i in order {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        counts
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("{requested} attackers requested but only {available} live nodes")]
    TooManyAttackers { requested: usize, available: usize },
    #[error("attack mix weights must be non-negative with a positive sum")]
    InvalidMix,
    #[error("drop probability must lie in [0, 1], got {0}")]
    InvalidDropProb(f64),
    #[error("activation time must be non-negative, got {0}")]
    InvalidActivation(f64),
    #[error("attack assigned to unknown node {0}")]
    UnknownNode(NodeId),
}

/// Draws `n_attackers` distinct live nodes and hands them profiles. The
/// result is sorted by node id.
pub fn build_attack_set<R: Rng + ?Sized>(
    nodes: &[NodeRecord],
    n_attackers: usize,
    mix: &AttackMix,
    rng: &mut R,
) -> Result<Vec<(NodeId, AttackProfile)>, AttackError> {
    mix.validate()?;
    let live: Vec<NodeId> = nodes.iter().filter(|n| n.is_active()).map(|n| n.id).collect();
    if n_attackers > live.len() {
        return Err(AttackError::TooManyAttackers {
            requested: n_attackers,
            available: live.len(),
        });
    }
    let picked = index::sample(rng, live.len(), n_attackers).into_vec();
    let counts = mix.apportion(n_attackers);
    let mut out = Vec::with_capacity(n_attackers);
    let mut slots = picked.into_iter();
    for (kind_ix, count) in counts.into_iter().enumerate() {
        for _ in 0..count {
            let id = live[slots.next().expect("apportion sums to total")];
            let kind = match kind_ix {
                0 => AttackKind::Compromised {
                    wrong_secret: rng.random(),
                },
                1 => AttackKind::SelectiveForward {
                    drop_prob: mix.drop_prob,
                },
                2 => AttackKind::BlackHole,
                _ => AttackKind::SelfIntruder,
            };
            out.push((
                id,
                AttackProfile {
                    kind,
                    activation_time_s: mix.activation_time_s,
                },
            ));
        }
    }
    out.sort_by_key(|(id, _)| *id);
    Ok(out)
}

/// Things a node is asked to do.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Duty {
    /// Pass on a received bundle and ack it.
    Forward,
    /// Send its own sensed report in its TDMA slot.
    Report,
    /// Answer a mine-detection probe.
    DummyAck,
    /// Answer an MZKP challenge holding the issued secret.
    MzkpAnswer { secret: u8 },
    /// Sink request/response traffic.
    Control,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Conduct {
    Comply,
    Refuse,
    /// Answer the challenge using this secret.
    Answer(u8),
}

/// How a node actually behaves when asked to perform `duty` at `now_s`.
/// Only a selective forwarder with `0 < drop_prob < 1` consumes randomness.
pub fn perturb<R: Rng + ?Sized>(
    profile: Option<&AttackProfile>,
    now_s: f64,
    duty: Duty,
    rng: &mut R,
) -> Conduct {
    let honest = match duty {
        Duty::MzkpAnswer { secret } => Conduct::Answer(secret),
        _ => Conduct::Comply,
    };
    let Some(p) = profile.filter(|p| p.active_at(now_s)) else {
        return honest;
    };
    match (p.kind, duty) {
        (_, Duty::Control) => Conduct::Comply,
        (AttackKind::Compromised { wrong_secret }, Duty::MzkpAnswer { .. }) => Conduct::Answer(wrong_secret),
        (AttackKind::SelectiveForward { drop_prob }, Duty::Forward) => {
            let drop = if drop_prob <= 0.0 {
                false
            } else if drop_prob >= 1.0 {
                true
            } else {
                rng.random_bool(drop_prob)
            };
            if drop {
                Conduct::Refuse
            } else {
                Conduct::Comply
            }
        }
        (AttackKind::BlackHole, Duty::Forward | Duty::Report | Duty::DummyAck) => Conduct::Refuse,
        (AttackKind::SelfIntruder, Duty::DummyAck) => Conduct::Refuse,
        _ => honest,
    }
}
