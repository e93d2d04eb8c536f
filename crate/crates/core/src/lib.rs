//! Deterministic discrete-event simulator core for ESRP, a centralized
//! cluster-based routing protocol for wireless sensor networks.
//!
//! The crate is `no_std` (it needs `alloc`). File IO, scenario parsing and the
//! command line live in the companion `esrp` crate.
//!
//! Module map:
//!
//! - [`topology`]: node deployment, geometry and the sink's node database
//! - [`energy`]: the first-order radio / CPU / sensor energy model and the ledger
//! - [`codec`]: bit-exact signal, CH and CM packet layouts
//! - [`clustering`]: centralized cluster formation and reformation
//! - [`security`]: MZKP identity checks, promiscuous hearing, trapping, mine detection
//! - [`adversary`]: attack profiles and their behavioural hooks
//! - [`engine`]: the event loop that runs the full protocol cycle
//! - [`metrics`]: per-iteration series, summary percentages, closed-form overheads

#![no_std]
// Range checks are written as negated comparisons so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adversary;
pub mod clustering;
pub mod codec;
pub mod energy;
pub mod engine;
pub mod metrics;
mod rng;
pub mod security;
pub mod topology;

pub use adversary::{AttackKind, AttackMix, AttackProfile};
pub use clustering::{Cluster, ClusterParams, ClusterPlan, Hop};
pub use energy::{EnergyCategory, EnergyLedger, EnergyParams, Femtojoules};
pub use engine::{run_simulation, RunConfig, RunOutput};
pub use metrics::MetricsReport;
pub use topology::{Deployment, FieldSpec, NodeId, NodeRecord, Position, Role};
