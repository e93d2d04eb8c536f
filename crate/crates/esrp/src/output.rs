//! Files written for one run.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use esrp_core::energy::EnergyCategory;
use esrp_core::engine::{Counters, RunOutput};
use esrp_core::metrics::{IterationRow, MetricsReport, Summary, COLUMNS};
use esrp_core::{AttackKind, NodeId, RunConfig};
use serde::Serialize;
use thiserror::Error;

pub const MANIFEST: &str = "manifest.json";
pub const METRICS: &str = "metrics.csv";
pub const SUMMARY: &str = "summary.json";
pub const NODE_ENERGY: &str = "node_energy.csv";
pub const LEDGER: &str = "ledger.csv";
pub const SECURITY_LOG: &str = "security.jsonl";
pub const TRACE: &str = "trace.jsonl";

/// Label in the `iteration` column of the closing row of `metrics.csv`.
pub const SUMMARY_LABEL: &str = "summary";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("cannot encode {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

#[derive(Serialize)]
struct Attacker {
    node: NodeId,
    kind: AttackKind,
    activation_time_s: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    seed: u64,
    iterations_run: usize,
    terminated_early: bool,
    attack_set: Vec<Attacker>,
    warnings: &'a [String],
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary_error: Option<String>,
    last: IterationRow,
    counters: &'a Counters,
    blocked: Vec<NodeId>,
}

/// Writes every file of a run into `dir`, creating it if needed, and returns
/// the paths written.
pub fn write_run(dir: &Path, cfg: &RunConfig, out: &RunOutput) -> Result<Vec<PathBuf>, OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let mut written = Vec::new();

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        iterations_run: out.report.rows.len(),
        terminated_early: out.report.terminated_early,
        attack_set: out
            .attack_set
            .iter()
            .map(|(node, p)| Attacker {
                node: *node,
                kind: p.kind,
                activation_time_s: p.activation_time_s,
            })
            .collect(),
        warnings: &out.warnings,
        config: cfg,
    };
    written.push(write_json(&dir.join(MANIFEST), &manifest)?);

    let path = dir.join(METRICS);
    write_with(&path, |w| export_csv(&out.report, w))?;
    written.push(path);

    let (summary, summary_error) = match out.report.summary() {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = SummaryFile {
        summary,
        summary_error,
        last: out.report.last(),
        counters: &out.counters,
        blocked: out.nodes.iter().filter(|n| n.is_blocked()).map(|n| n.id).collect(),
    };
    written.push(write_json(&dir.join(SUMMARY), &summary)?);

    let path = dir.join(NODE_ENERGY);
    write_with(&path, |w| write_node_energy(out, w))?;
    written.push(path);

    let path = dir.join(LEDGER);
    write_with(&path, |w| write_ledger(out, w))?;
    written.push(path);

    let path = dir.join(SECURITY_LOG);
    write_lines(&path, &out.security_log)?;
    written.push(path);

    if cfg.trace {
        let path = dir.join(TRACE);
        write_lines(&path, &out.trace)?;
        written.push(path);
    }
    Ok(written)
}

/// One row per iteration in [`COLUMNS`] order, then a summary row repeating
/// the final totals with `summary` in the iteration column. A run with no
/// iterations gives the header and a summary row of the starting state.
pub fn export_csv<W: Write>(report: &MetricsReport, w: W) -> csv::Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(COLUMNS)?;
    for row in &report.rows {
        csv.write_record(row_fields(row.iteration.to_string(), row))?;
    }
    csv.write_record(row_fields(SUMMARY_LABEL.to_owned(), &report.last()))?;
    csv.flush()?;
    Ok(())
}

fn row_fields(iteration: String, r: &IterationRow) -> [String; 16] {
    [
        iteration,
        r.time_s.to_string(),
        r.alive.to_string(),
        r.below_threshold.to_string(),
        r.dead.to_string(),
        r.blocked.to_string(),
        r.clusters.to_string(),
        r.flat.to_string(),
        r.energy_j.to_string(),
        r.delay_ms.to_string(),
        r.overhead_bytes.to_string(),
        r.control_packets.to_string(),
        r.security_packets.to_string(),
        r.formation_packets.to_string(),
        r.data_delivered.to_string(),
        r.directional_entropy.to_string(),
    ]
}

/// Long format: `iteration,node,residual_j`, iteration 0 being the deployment.
fn write_node_energy<W: Write>(out: &RunOutput, w: W) -> csv::Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["iteration", "node", "residual_j"])?;
    for n in &out.deployment.nodes {
        csv.write_record(["0".to_owned(), n.id.0.to_string(), n.residual.joules().to_string()])?;
    }
    for (i, residuals) in out.residuals.iter().enumerate() {
        for (n, r) in out.deployment.nodes.iter().zip(residuals) {
            csv.write_record([(i + 1).to_string(), n.id.0.to_string(), r.joules().to_string()])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// Cumulative debits per node and category at the end of the run.
fn write_ledger<W: Write>(out: &RunOutput, w: W) -> csv::Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    let mut header = vec!["node".to_owned()];
    header.extend(EnergyCategory::ALL.iter().map(|c| format!("{}_j", c.name())));
    header.push("total_j".to_owned());
    csv.write_record(&header)?;
    for n in &out.deployment.nodes {
        let d = out.ledger.node(n.id);
        let mut rec = vec![n.id.0.to_string()];
        rec.extend(EnergyCategory::ALL.iter().map(|c| d.get(*c).joules().to_string()));
        rec.push(d.total().joules().to_string());
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, OutputError> {
    File::create(path).map(BufWriter::new).map_err(|source| OutputError::Io {
        path: path.to_owned(),
        source,
    })
}

pub(crate) fn write_with(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> csv::Result<()>,
) -> Result<(), OutputError> {
    let mut w = create(path)?;
    f(&mut w).map_err(|source| OutputError::Csv {
        path: path.to_owned(),
        source,
    })?;
    w.flush().map_err(|source| OutputError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf, OutputError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| OutputError::Json {
        path: path.to_owned(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| OutputError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(path.to_owned())
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), OutputError> {
    let mut w = create(path)?;
    let io = |source| OutputError::Io {
        path: path.to_owned(),
        source,
    };
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|source| OutputError::Json {
            path: path.to_owned(),
            source,
        })?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}
