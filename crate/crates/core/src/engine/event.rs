use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::topology::NodeId;

pub type Nanos = u64;

pub fn nanos(seconds: f64) -> Nanos {
    if seconds > 0.0 {
        (seconds * 1e9 + 0.5) as Nanos
    } else {
        0
    }
}

pub fn seconds(t: Nanos) -> f64 {
    t as f64 / 1e9
}

/// What a message is for. Decides its size, its counter and what the
/// receiver does with it.
#[derive(Clone, Debug, PartialEq)]
pub enum Body {
    Poll,
    Report { payload: [u8; 2] },
    FeedbackRequest,
    FeedbackResponse,
    StatusRequest,
    StatusResponse,
    Challenge { prover: NodeId, q: u8, transfer: u32 },
    ChallengeRelay { q: u8, transfer: u32 },
    Answer { answer: u8, transfer: u32 },
    AnswerRelay { prover: NodeId, answer: u8, q: u8, transfer: u32 },
    Verdict { prover: NodeId, accept: bool, transfer: u32 },
    Bundle { frames: Vec<FrameTrip>, gated: Option<u32> },
    Ack { transfer: u32 },
    Probe,
    DummyAck,
    Dummy { rest: Vec<NodeId> },
    BlockNotice { blocked: NodeId },
    FlatData { origin: NodeId, payload: [u8; 2], rest: Vec<NodeId>, delay_s: f64 },
    Signal,
}

impl Body {
    pub fn name(&self) -> &'static str {
        match self {
            Body::Poll => "poll",
            Body::Report { .. } => "report",
            Body::FeedbackRequest => "feedback_request",
            Body::FeedbackResponse => "feedback_response",
            Body::StatusRequest => "status_request",
            Body::StatusResponse => "status_response",
            Body::Challenge { .. } => "challenge",
            Body::ChallengeRelay { .. } => "challenge_relay",
            Body::Answer { .. } => "answer",
            Body::AnswerRelay { .. } => "answer_relay",
            Body::Verdict { .. } => "verdict",
            Body::Bundle { .. } => "bundle",
            Body::Ack { .. } => "ack",
            Body::Probe => "probe",
            Body::DummyAck => "dummy_ack",
            Body::Dummy { .. } => "dummy",
            Body::BlockNotice { .. } => "block_notice",
            Body::FlatData { .. } => "flat_data",
            Body::Signal => "signal",
        }
    }
}

/// One cluster's aggregated frame on its way to the sink.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTrip {
    pub origin: NodeId,
    pub reports: usize,
    pub bytes: usize,
    /// Path delay accumulated so far.
    pub delay_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub from: NodeId,
    pub to: NodeId,
    pub body: Body,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    IterationStart,
    Slot { ch: NodeId, member: NodeId },
    AggregateCheck { ch: NodeId },
    AggregateDeadline { ch: NodeId },
    SweepStart,
    SweepEnd,
    InterStart,
    LevelSend { ch: NodeId },
    FlatSend,
    AuditCheck { prover: NodeId, verifier: NodeId, transfer: u32 },
    Arrive(Message),
    IterationEnd,
}

struct Scheduled {
    at: Nanos,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: the heap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Min-queue on (time, insertion order).
#[derive(Default)]
pub struct EventQueue {
    heap: BinaryHeap<Scheduled>,
    seq: u64,
    now: Nanos,
}

impl EventQueue {
    pub fn now(&self) -> Nanos {
        self.now
    }

    /// Events can't be scheduled in the past; such requests run now.
    pub fn schedule(&mut self, at: Nanos, event: Event) {
        let at = at.max(self.now);
        self.heap.push(Scheduled {
            at,
            seq: self.seq,
            event,
        });
        self.seq += 1;
    }

    pub fn pop(&mut self) -> Option<(Nanos, Event)> {
        let s = self.heap.pop()?;
        self.now = s.at;
        Some((s.at, s.event))
    }
}
