use serde::{Deserialize, Serialize};

use crate::adversary::AttackKind;
use crate::security::{TriState, Verdict};
use crate::topology::NodeId;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Tx,
    Rx,
    /// Lost on the air or discarded by the receiver.
    Drop,
    /// The sink excluded a node.
    Block,
}

/// One line of the optional message trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub t_ns: u64,
    pub kind: TraceKind,
    pub node: NodeId,
    pub peer: NodeId,
    pub msg: &'static str,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockReason {
    Mzkp,
    Promiscuous,
    Mine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SecurityEvent {
    Challenge {
        prover: NodeId,
        verifier: NodeId,
        q: u8,
        claimed: u8,
        expected: u8,
        verdict: Verdict,
        attack: Option<AttackKind>,
    },
    Audit {
        prover: NodeId,
        verifier: NodeId,
        outcome: TriState,
    },
    Sweep {
        prober: NodeId,
        probed: usize,
        flagged: alloc::vec::Vec<NodeId>,
    },
    Dummy {
        origin: NodeId,
        hops: usize,
    },
    Block {
        node: NodeId,
        reason: BlockReason,
        attack: Option<AttackKind>,
    },
}

/// A security event with its time and iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityRecord {
    pub t_s: f64,
    pub iteration: u32,
    #[serde(flatten)]
    pub event: SecurityEvent,
}
