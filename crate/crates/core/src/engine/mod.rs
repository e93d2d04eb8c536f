//! Discrete-event run of the protocol over a deployment.

mod config;
mod event;
mod sim;
mod trace;

pub use config::{AttackAssignment, AttackSpec, ConfigError, Placement, RunConfig};
pub use event::{nanos, seconds, Nanos};
pub use sim::{check_termination, deploy_for, hop_delay, initial_plan, run_simulation, Counters, RunError, RunOutput};
pub use trace::{BlockReason, SecurityEvent, SecurityRecord, TraceEntry, TraceKind};
