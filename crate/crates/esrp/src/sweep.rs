//! Parameter sweeps: one run per (value, seed), run in parallel, then merged.

use std::path::{Path, PathBuf};

use esrp_core::engine::{run_simulation, RunError};
use esrp_core::metrics::{IterationRow, COLUMNS};
use esrp_core::RunConfig;
use rayon::prelude::*;
use thiserror::Error;

use crate::output::{self, write_with, OutputError};
use crate::scenario::{set_param, ScenarioError};

pub const RUNS: &str = "sweep_runs.csv";
pub const AGGREGATE: &str = "sweep_aggregate.csv";
pub const SERIES: &str = "sweep_series.csv";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep needs at least one value")]
    NoValues,
    #[error("sweep needs at least one seed")]
    NoSeeds,
    #[error(transparent)]
    Param(#[from] ScenarioError),
    #[error("{param}={value} seed {seed}: {source}")]
    Run {
        param: String,
        value: String,
        seed: u64,
        source: RunError,
    },
    #[error(transparent)]
    Output(#[from] OutputError),
}

/// Final state of one run of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub value: String,
    pub seed: u64,
    pub last: IterationRow,
    pub energy_pct: f64,
    pub overhead_pct: f64,
    pub survival_pct: f64,
    pub rows: Vec<IterationRow>,
}

impl RunResult {
    fn metric(&self, m: Metric) -> f64 {
        let l = &self.last;
        match m {
            Metric::Alive => l.alive as f64,
            Metric::Blocked => l.blocked as f64,
            Metric::Clusters => l.clusters as f64,
            Metric::EnergyJ => l.energy_j,
            Metric::DelayMs => l.delay_ms,
            Metric::OverheadBytes => l.overhead_bytes as f64,
            Metric::ControlPackets => l.control_packets as f64,
            Metric::SecurityPackets => l.security_packets as f64,
            Metric::DataDelivered => l.data_delivered as f64,
            Metric::EnergyPct => self.energy_pct,
            Metric::OverheadPct => self.overhead_pct,
            Metric::SurvivalPct => self.survival_pct,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Metric {
    Alive,
    Blocked,
    Clusters,
    EnergyJ,
    DelayMs,
    OverheadBytes,
    ControlPackets,
    SecurityPackets,
    DataDelivered,
    EnergyPct,
    OverheadPct,
    SurvivalPct,
}

impl Metric {
    pub const ALL: [Metric; 12] = [
        Metric::Alive,
        Metric::Blocked,
        Metric::Clusters,
        Metric::EnergyJ,
        Metric::DelayMs,
        Metric::OverheadBytes,
        Metric::ControlPackets,
        Metric::SecurityPackets,
        Metric::DataDelivered,
        Metric::EnergyPct,
        Metric::OverheadPct,
        Metric::SurvivalPct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Alive => "alive",
            Metric::Blocked => "blocked",
            Metric::Clusters => "clusters",
            Metric::EnergyJ => "energy_j",
            Metric::DelayMs => "delay_ms",
            Metric::OverheadBytes => "overhead_bytes",
            Metric::ControlPackets => "control_packets",
            Metric::SecurityPackets => "security_packets",
            Metric::DataDelivered => "data_delivered",
            Metric::EnergyPct => "energy_pct",
            Metric::OverheadPct => "overhead_pct",
            Metric::SurvivalPct => "survival_pct",
        }
    }
}

/// Mean and sample standard deviation of one metric over the seeds of a value.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub value: String,
    pub runs: usize,
    pub stats: Vec<(Metric, Stat)>,
}

impl Aggregate {
    pub fn get(&self, m: Metric) -> Stat {
        self.stats.iter().find(|(k, _)| *k == m).map(|(_, s)| *s).expect("every metric is aggregated")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub param: String,
    pub runs: Vec<RunResult>,
    pub aggregates: Vec<Aggregate>,
}

fn stat(xs: &[f64]) -> Stat {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Stat { mean, std }
}

/// Runs every (value, seed) pair. When `run_dir` is given, each run's files
/// go to `run_dir/<param>=<value>/seed-<seed>`.
pub fn run_sweep(
    base: &RunConfig,
    param: &str,
    values: &[String],
    seeds: &[u64],
    run_dir: Option<&Path>,
) -> Result<SweepOutcome, SweepError> {
    if values.is_empty() {
        return Err(SweepError::NoValues);
    }
    if seeds.is_empty() {
        return Err(SweepError::NoSeeds);
    }
    let configs = values
        .iter()
        .map(|v| set_param(base, param, v).map(|c| (v.clone(), c)))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(String, RunConfig)> = configs
        .iter()
        .flat_map(|(v, c)| {
            seeds.iter().map(move |s| {
                let mut c = c.clone();
                c.seed = *s;
                (v.clone(), c)
            })
        })
        .collect();
    let runs = jobs
        .par_iter()
        .map(|(value, cfg)| {
            let out = run_simulation(cfg).map_err(|source| SweepError::Run {
                param: param.to_owned(),
                value: value.clone(),
                seed: cfg.seed,
                source,
            })?;
            if let Some(dir) = run_dir {
                output::write_run(&run_path(dir, param, value, cfg.seed), cfg, &out)?;
            }
            let summary = out.report.summary();
            let pct = |f: fn(&esrp_core::metrics::Summary) -> f64| summary.as_ref().map(f).unwrap_or(f64::NAN);
            Ok(RunResult {
                value: value.clone(),
                seed: cfg.seed,
                last: out.report.last(),
                energy_pct: pct(|s| s.energy_pct),
                overhead_pct: pct(|s| s.overhead_pct),
                survival_pct: pct(|s| s.survival_pct),
                rows: out.report.rows,
            })
        })
        .collect::<Result<Vec<_>, SweepError>>()?;
    let aggregates = values
        .iter()
        .map(|v| {
            let group: Vec<&RunResult> = runs.iter().filter(|r| &r.value == v).collect();
            Aggregate {
                value: v.clone(),
                runs: group.len(),
                stats: Metric::ALL
                    .iter()
                    .map(|m| (*m, stat(&group.iter().map(|r| r.metric(*m)).collect::<Vec<_>>())))
                    .collect(),
            }
        })
        .collect();
    Ok(SweepOutcome {
        param: param.to_owned(),
        runs,
        aggregates,
    })
}

pub fn run_path(dir: &Path, param: &str, value: &str, seed: u64) -> PathBuf {
    dir.join(format!("{param}={value}")).join(format!("seed-{seed}"))
}

impl SweepOutcome {
    /// Writes the per-run table, the aggregate table and the mean series.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
        std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
            path: dir.to_owned(),
            source,
        })?;
        let runs = dir.join(RUNS);
        write_with(&runs, |w| {
            let mut csv = csv::Writer::from_writer(w);
            let mut header = vec![self.param.clone(), "seed".into(), "iterations".into()];
            header.extend(Metric::ALL.iter().map(|m| m.name().to_owned()));
            csv.write_record(&header)?;
            for r in &self.runs {
                let mut rec = vec![r.value.clone(), r.seed.to_string(), r.rows.len().to_string()];
                rec.extend(Metric::ALL.iter().map(|m| r.metric(*m).to_string()));
                csv.write_record(&rec)?;
            }
            csv.flush()?;
            Ok(())
        })?;
        let aggregate = dir.join(AGGREGATE);
        write_with(&aggregate, |w| {
            let mut csv = csv::Writer::from_writer(w);
            let mut header = vec![self.param.clone(), "runs".into()];
            for m in Metric::ALL {
                header.push(format!("{}_mean", m.name()));
                header.push(format!("{}_std", m.name()));
            }
            csv.write_record(&header)?;
            for a in &self.aggregates {
                let mut rec = vec![a.value.clone(), a.runs.to_string()];
                for (_, s) in &a.stats {
                    rec.push(s.mean.to_string());
                    rec.push(s.std.to_string());
                }
                csv.write_record(&rec)?;
            }
            csv.flush()?;
            Ok(())
        })?;
        let series = dir.join(SERIES);
        write_with(&series, |w| {
            let mut csv = csv::Writer::from_writer(w);
            let mut header = vec!["label"];
            header.extend(COLUMNS);
            csv.write_record(&header)?;
            for a in &self.aggregates {
                let label = format!("{}={}", self.param, a.value);
                for row in self.mean_series(&a.value) {
                    let mut rec = vec![label.clone()];
                    rec.extend(row.iter().map(f64::to_string));
                    csv.write_record(&rec)?;
                }
            }
            csv.flush()?;
            Ok(())
        })?;
        Ok(vec![runs, aggregate, series])
    }

    /// Per-iteration mean over the seeds of `value` that reached that
    /// iteration, in [`COLUMNS`] order.
    pub fn mean_series(&self, value: &str) -> Vec<[f64; 16]> {
        let group: Vec<&RunResult> = self.runs.iter().filter(|r| r.value == value).collect();
        let len = group.iter().map(|r| r.rows.len()).max().unwrap_or(0);
        (0..len)
            .map(|i| {
                let rows: Vec<[f64; 16]> = group.iter().filter_map(|r| r.rows.get(i)).map(numeric).collect();
                let mut mean = [0.0; 16];
                for r in &rows {
                    for (m, x) in mean.iter_mut().zip(r) {
                        *m += x;
                    }
                }
                for m in &mut mean {
                    *m /= rows.len() as f64;
                }
                mean
            })
            .collect()
    }
}

fn numeric(r: &IterationRow) -> [f64; 16] {
    [
        f64::from(r.iteration),
        r.time_s,
        r.alive as f64,
        r.below_threshold as f64,
        r.dead as f64,
        r.blocked as f64,
        r.clusters as f64,
        r.flat as f64,
        r.energy_j,
        r.delay_ms,
        r.overhead_bytes as f64,
        r.control_packets as f64,
        r.security_packets as f64,
        r.formation_packets as f64,
        r.data_delivered as f64,
        r.directional_entropy,
    ]
}
