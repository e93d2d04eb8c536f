//! Per-iteration series, the headline percentages and the closed-form
//! overhead counts.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Network state at the end of one iteration. Counters are cumulative.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub iteration: u32,
    pub time_s: f64,
    pub alive: usize,
    /// Nodes (dead ones included) under the termination threshold.
    pub below_threshold: usize,
    pub dead: usize,
    pub blocked: usize,
    pub clusters: usize,
    pub flat: usize,
    pub energy_j: f64,
    pub delay_ms: f64,
    pub overhead_bytes: u64,
    pub control_packets: u64,
    pub security_packets: u64,
    pub formation_packets: u64,
    pub data_delivered: u64,
    pub directional_entropy: f64,
}

/// CSV column order.
pub const COLUMNS: [&str; 16] = [
    "iteration",
    "time_s",
    "alive",
    "below_threshold",
    "dead",
    "blocked",
    "clusters",
    "flat",
    "energy_j",
    "delay_ms",
    "overhead_bytes",
    "control_packets",
    "security_packets",
    "formation_packets",
    "data_delivered",
    "directional_entropy",
];

/// Reference values the percentages are taken against.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub alive_start: usize,
    pub clusters_start: usize,
    pub energy_budget_j: f64,
    pub horizon_s: f64,
    pub max_overhead_bytes: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub baseline: Baseline,
    pub rows: Vec<IterationRow>,
    /// True when the run stopped on the 85 % rule rather than the horizon.
    pub terminated_early: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub survival_pct: f64,
    pub alive_decrease_pct: f64,
    pub delay_pct: f64,
    pub energy_pct: f64,
    pub lifetime_retained_pct: f64,
    pub lifetime_decrease_pct: f64,
    pub overhead_pct: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("{0} at start is zero")]
    ZeroStart(&'static str),
}

pub fn survival_pct(end: usize, start: usize) -> Result<f64, MetricsError> {
    if start == 0 {
        return Err(MetricsError::ZeroStart("alive count"));
    }
    Ok(end as f64 / start as f64 * 100.0)
}

/// `100 − survival`, the tabulated headline.
pub fn alive_decrease_pct(end: usize, start: usize) -> Result<f64, MetricsError> {
    Ok(100.0 - survival_pct(end, start)?)
}

pub fn energy_pct(spent_j: f64, budget_j: f64) -> Result<f64, MetricsError> {
    if !(budget_j > 0.0) {
        return Err(MetricsError::ZeroStart("energy budget"));
    }
    Ok(spent_j / budget_j * 100.0)
}

pub fn delay_pct(delay_s: f64, horizon_s: f64) -> Result<f64, MetricsError> {
    if !(horizon_s > 0.0) {
        return Err(MetricsError::ZeroStart("horizon"));
    }
    Ok(delay_s / horizon_s * 100.0)
}

pub fn lifetime_decrease_pct(clusters_end: usize, clusters_start: usize) -> Result<f64, MetricsError> {
    if clusters_start == 0 {
        return Err(MetricsError::ZeroStart("cluster count"));
    }
    Ok(100.0 - clusters_end as f64 / clusters_start as f64 * 100.0)
}

pub fn overhead_pct(bytes: f64, max_bytes: f64) -> Result<f64, MetricsError> {
    if !(max_bytes > 0.0) {
        return Err(MetricsError::ZeroStart("overhead budget"));
    }
    Ok(bytes / max_bytes * 100.0)
}

impl MetricsReport {
    /// The last row, or the baseline state when no iteration completed.
    pub fn last(&self) -> IterationRow {
        self.rows.last().cloned().unwrap_or(IterationRow {
            alive: self.baseline.alive_start,
            clusters: self.baseline.clusters_start,
            ..IterationRow::default()
        })
    }

    pub fn summary(&self) -> Result<Summary, MetricsError> {
        summary_percentages(self)
    }
}

pub fn summary_percentages(report: &MetricsReport) -> Result<Summary, MetricsError> {
    let b = &report.baseline;
    let end = report.last();
    let survival = survival_pct(end.alive, b.alive_start)?;
    let lifetime_decrease = lifetime_decrease_pct(end.clusters, b.clusters_start)?;
    Ok(Summary {
        survival_pct: survival,
        alive_decrease_pct: 100.0 - survival,
        delay_pct: delay_pct(end.delay_ms / 1e3, b.horizon_s)?,
        energy_pct: energy_pct(end.energy_j, b.energy_budget_j)?,
        lifetime_retained_pct: 100.0 - lifetime_decrease,
        lifetime_decrease_pct: lifetime_decrease,
        overhead_pct: overhead_pct(end.overhead_bytes as f64, b.max_overhead_bytes)?,
    })
}

/// Packet counts for one round of a clustered protocol.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overhead {
    pub intra: u64,
    pub inter: u64,
    pub total: u64,
}

/// ESRP: one poll and one report per member, one request and one response per
/// CH plus the route-feedback pair.
pub fn esrp_overhead(m: u64, n: u64) -> Overhead {
    let intra = 2 * n.saturating_sub(1);
    let inter = 2 + 2 * m;
    Overhead {
        intra,
        inter,
        total: m * intra + inter,
    }
}

/// LDTS, as printed.
pub fn ldts_overhead(m: u64, n: u64) -> Overhead {
    let intra = 2 * n.saturating_sub(2) * n.saturating_sub(1) + 2 * n;
    let inter = 2 * m.saturating_sub(1).pow(2) + 2 * m;
    Overhead {
        intra,
        inter,
        total: m * intra + inter,
    }
}

/// LDTS total for a given per-cluster intra count.
pub fn ldts_total_with_intra(m: u64, intra: u64) -> u64 {
    m * intra + ldts_overhead(m, 2).inter
}
