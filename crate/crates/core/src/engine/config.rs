use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AttackError, AttackKind, AttackMix, AttackProfile};
use crate::clustering::ClusterParams;
use crate::energy::EnergyParams;
use crate::security::{SecurityThresholds, SecurityToggles};
use crate::topology::{FieldSpec, NodeId, Position, TableEntry};

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    #[default]
    Random,
    Grid,
    /// Positions and energies come from `nodes`.
    Table,
}

/// A fixed attacker, in addition to any drawn at random.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackAssignment {
    pub node: NodeId,
    pub kind: AttackKind,
    #[serde(default)]
    pub activation_time_s: f64,
}

impl AttackAssignment {
    pub fn profile(&self) -> AttackProfile {
        AttackProfile {
            kind: self.kind,
            activation_time_s: self.activation_time_s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSpec {
    /// Attackers drawn at random from the nodes not listed in `assign`.
    pub count: usize,
    pub mix: AttackMix,
    pub assign: Vec<AttackAssignment>,
}

impl Default for AttackSpec {
    fn default() -> Self {
        Self {
            count: 25,
            mix: AttackMix::default(),
            assign: Vec::new(),
        }
    }
}

/// Everything a run depends on. Defaults reproduce the 100-node, 2 J,
/// five-cluster, one-hour setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub field: FieldSpec,
    pub placement: Placement,
    pub nodes: Vec<TableEntry>,
    pub n_nodes: usize,
    pub initial_energy_j: f64,
    /// Defaults to the field center.
    pub sink: Option<Position>,
    pub clustering: ClusterParams,
    pub horizon_s: f64,
    pub iterations: u32,
    /// Reform every this many iterations.
    pub reform_every: u32,
    pub quorum: f64,
    pub slot_s: f64,
    pub intra_timeout_s: f64,
    /// Time a prober waits for acks (mine sweep, promiscuous audit).
    pub ack_window_s: f64,
    /// Spacing of convergecast levels in the inter phase.
    pub level_slot_s: f64,
    pub link_rate_bps: f64,
    pub processing_delay_s: f64,
    pub loss_rate: f64,
    pub dummy_ttl: u8,
    pub energy: EnergyParams,
    pub thresholds: SecurityThresholds,
    pub security: SecurityToggles,
    pub attacks: AttackSpec,
    pub termination_threshold_j: f64,
    pub termination_fraction: f64,
    pub max_overhead_bytes: f64,
    /// Keep the per-message trace.
    pub trace: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            field: FieldSpec {
                radio_range: 400.0,
                ..FieldSpec::default()
            },
            placement: Placement::Random,
            nodes: Vec::new(),
            n_nodes: 100,
            initial_energy_j: 2.0,
            sink: None,
            clustering: ClusterParams::default(),
            horizon_s: 3600.0,
            iterations: 5,
            reform_every: 1,
            quorum: 2.0 / 3.0,
            slot_s: 0.01,
            intra_timeout_s: 60.0,
            ack_window_s: 1.0,
            level_slot_s: 1.0,
            link_rate_bps: 2e6,
            processing_delay_s: 0.0,
            loss_rate: 0.0,
            dummy_ttl: 3,
            energy: EnergyParams::default(),
            thresholds: SecurityThresholds::default(),
            security: SecurityToggles::default(),
            attacks: AttackSpec::default(),
            termination_threshold_j: 0.5,
            termination_fraction: 0.85,
            max_overhead_bytes: 650.0,
            trace: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be {rule}")]
    Invalid { field: &'static str, rule: &'static str },
    #[error("placement = \"table\" needs a non-empty node table")]
    EmptyTable,
    #[error("an iteration of {iteration_s} s cannot fit the intra phase, sweep and {levels} convergecast levels")]
    IterationTooShort { iteration_s: f64, levels: usize },
    #[error(transparent)]
    Attack(#[from] AttackError),
}

fn check(ok: bool, field: &'static str, rule: &'static str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid { field, rule })
    }
}

impl RunConfig {
    pub fn iteration_s(&self) -> f64 {
        self.horizon_s / f64::from(self.iterations.max(1))
    }

    /// Offset of the inter phase from the iteration start.
    pub fn inter_offset_s(&self) -> f64 {
        self.intra_timeout_s + self.ack_window_s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check(self.horizon_s > 0.0, "horizon_s", "positive")?;
        check(self.quorum > 0.0 && self.quorum <= 1.0, "quorum", "in (0, 1]")?;
        check(self.reform_every >= 1, "reform_every", "at least 1")?;
        check(self.clustering.k >= 1, "clustering.k", "at least 1")?;
        check(self.initial_energy_j > 0.0, "initial_energy_j", "positive")?;
        check(self.slot_s > 0.0, "slot_s", "positive")?;
        check(self.intra_timeout_s > 0.0, "intra_timeout_s", "positive")?;
        check(self.ack_window_s > 0.0, "ack_window_s", "positive")?;
        check(self.level_slot_s > 0.0, "level_slot_s", "positive")?;
        check(self.link_rate_bps > 0.0, "link_rate_bps", "positive")?;
        check(self.processing_delay_s >= 0.0, "processing_delay_s", "non-negative")?;
        check((0.0..=1.0).contains(&self.loss_rate), "loss_rate", "in [0, 1]")?;
        check(self.dummy_ttl >= 1, "dummy_ttl", "at least 1")?;
        check(self.energy.is_valid(), "energy", "strictly positive in every field")?;
        check(
            (0.0..=1.0).contains(&self.termination_fraction),
            "termination_fraction",
            "in [0, 1]",
        )?;
        check(self.max_overhead_bytes > 0.0, "max_overhead_bytes", "positive")?;
        check(self.clustering.flat_threshold_j >= 0.0, "clustering.flat_threshold_j", "non-negative")?;
        if self.placement == Placement::Table && self.nodes.is_empty() {
            return Err(ConfigError::EmptyTable);
        }
        self.attacks.mix.validate()?;
        for a in &self.attacks.assign {
            if let AttackKind::SelectiveForward { drop_prob } = a.kind {
                if !(0.0..=1.0).contains(&drop_prob) {
                    return Err(AttackError::InvalidDropProb(drop_prob).into());
                }
            }
        }
        let levels = self.clustering.k + 1;
        let needed = self.inter_offset_s() + self.ack_window_s + levels as f64 * self.level_slot_s + self.ack_window_s;
        if self.iterations > 0 && needed >= self.iteration_s() {
            return Err(ConfigError::IterationTooShort {
                iteration_s: self.iteration_s(),
                levels,
            });
        }
        Ok(())
    }
}
