//! Command-line front end. `main` only forwards to [`run`].

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use esrp_core::codec::{decode, PacketKind};
use esrp_core::engine::{initial_plan, run_simulation, RunError};
use esrp_core::RunConfig;

use crate::output::write_run;
use crate::scenario::{set_param, Scenario};
use crate::sweep::run_sweep;

pub const OUT_ENV: &str = "ESRP_OUT";
pub const DEFAULT_OUT: &str = "out";

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "esrp", version, about = "Deterministic simulator of the ESRP clustered WSN routing protocol")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one scenario and write its outputs.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iterations: Option<u32>,
        /// Output directory (beats ESRP_OUT and the scenario's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-message trace.
        #[arg(long)]
        trace: bool,
    },
    /// Run a scenario once per (value, seed) and aggregate the results.
    Sweep {
        scenario: PathBuf,
        /// `security`, `intruders`, or a dotted config path such as `clustering.k`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Seeds as a list and/or ranges: `1-10`, `1,4,7`. Defaults to the scenario's seed.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        iterations: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep every run's own files under `runs/`.
        #[arg(long)]
        keep_runs: bool,
    },
    /// Print the initial cluster plan as JSON without simulating.
    Plan {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Packet utilities.
    Codec {
        #[command(subcommand)]
        command: CodecCommand,
    },
}

#[derive(Subcommand, Debug)]
enum CodecCommand {
    /// Pretty-print a hex-encoded packet.
    Dump { kind: KindArg, hex: Vec<String> },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum KindArg {
    Signal,
    Ch,
    Cm,
}

impl From<KindArg> for PacketKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Signal => PacketKind::Signal,
            KindArg::Ch => PacketKind::Ch,
            KindArg::Cm => PacketKind::Cm,
        }
    }
}

/// A failure and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn config(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_CONFIG,
            error: error.into(),
        }
    }

    fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            error: error.into(),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(_) | RunError::Attack(_) => Failure::config(e),
            _ => Failure::runtime(e),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to `stderr`, results to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.error);
            f.code
        }
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            scenario,
            seed,
            iterations,
            out,
            trace,
        } => {
            let s = Scenario::load(&scenario).map_err(Failure::config)?;
            let mut cfg = overridden(&s.config, seed, iterations)?;
            cfg.trace |= trace;
            let dir = out_dir(out, &s);
            let output = run_simulation(&cfg)?;
            let files = write_run(&dir, &cfg, &output).map_err(Failure::runtime)?;
            for w in &output.warnings {
                let _ = writeln!(stdout, "warning: {w}");
            }
            report_files(stdout, &files);
            Ok(())
        }
        Command::Sweep {
            scenario,
            param,
            values,
            seeds,
            iterations,
            out,
            keep_runs,
        } => {
            let s = Scenario::load(&scenario).map_err(Failure::config)?;
            let cfg = overridden(&s.config, None, iterations)?;
            let seeds = match seeds {
                Some(text) => parse_seeds(&text).map_err(Failure::config)?,
                None => vec![cfg.seed],
            };
            let dir = out_dir(out, &s);
            let runs_dir = dir.join("runs");
            let outcome = run_sweep(&cfg, &param, &values, &seeds, keep_runs.then_some(runs_dir.as_path()))
                .map_err(|e| match e {
                    crate::sweep::SweepError::Run { .. } | crate::sweep::SweepError::Output(_) => Failure::runtime(e),
                    _ => Failure::config(e),
                })?;
            let mut files = outcome.write(&dir).map_err(Failure::runtime)?;
            if values.len() == 1 && seeds.len() == 1 {
                // A one-run sweep also leaves the ordinary run outputs.
                let mut single = set_param(&cfg, &param, &values[0]).map_err(Failure::config)?;
                single.seed = seeds[0];
                let output = run_simulation(&single)?;
                files.extend(write_run(&dir, &single, &output).map_err(Failure::runtime)?);
            }
            let _ = writeln!(stdout, "{} runs over {} values", outcome.runs.len(), outcome.aggregates.len());
            report_files(stdout, &files);
            Ok(())
        }
        Command::Plan { scenario, seed } => {
            let s = Scenario::load(&scenario).map_err(Failure::config)?;
            let cfg = overridden(&s.config, seed, None)?;
            let (_, plan) = initial_plan(&cfg)?;
            let text = serde_json::to_string_pretty(&plan).map_err(Failure::runtime)?;
            let _ = writeln!(stdout, "{text}");
            Ok(())
        }
        Command::Codec {
            command: CodecCommand::Dump { kind, hex },
        } => {
            let bytes = parse_hex(&hex.concat()).map_err(Failure::config)?;
            let packet = decode(kind.into(), &bytes).map_err(|e| Failure::config(anyhow!("{e}")))?;
            let _ = write!(stdout, "{packet}");
            Ok(())
        }
    }
}

fn overridden(cfg: &RunConfig, seed: Option<u64>, iterations: Option<u32>) -> Result<RunConfig, Failure> {
    let mut cfg = cfg.clone();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(i) = iterations {
        cfg.iterations = i;
    }
    cfg.validate().map_err(Failure::config)?;
    Ok(cfg)
}

/// `--out`, then `ESRP_OUT`, then the scenario's `out_dir`, then `out`.
fn out_dir(flag: Option<PathBuf>, s: &Scenario) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| s.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn report_files(stdout: &mut dyn Write, files: &[PathBuf]) {
    for f in files {
        let _ = writeln!(stdout, "wrote {}", f.display());
    }
}

/// Comma-separated seeds and inclusive `a-b` ranges.
pub fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().with_context(|| format!("bad seed range `{part}`"))?;
                let b: u64 = b.trim().parse().with_context(|| format!("bad seed range `{part}`"))?;
                anyhow::ensure!(a <= b, "empty seed range `{part}`");
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().with_context(|| format!("bad seed `{part}`"))?),
        }
    }
    anyhow::ensure!(!seeds.is_empty(), "no seeds given");
    Ok(seeds)
}

fn parse_hex(text: &str) -> anyhow::Result<Vec<u8>> {
    let digits: String = text
        .trim()
        .trim_start_matches("0x")
        .chars()
        .filter(|c| !c.is_whitespace() && *c != ':')
        .collect();
    hex::decode(&digits).with_context(|| format!("bad hex `{text}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds() {
        assert_eq!(parse_seeds("1-3,7").unwrap(), vec![1, 2, 3, 7]);
        assert_eq!(parse_seeds("5").unwrap(), vec![5]);
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds("x").is_err());
        assert!(parse_seeds("").is_err());
    }

    #[test]
    fn hex_input() {
        assert_eq!(parse_hex("0a ff").unwrap(), vec![0x0a, 0xff]);
        assert_eq!(parse_hex("0x0aff").unwrap(), vec![0x0a, 0xff]);
        assert!(parse_hex("abc").is_err());
    }

    #[test]
    fn usage_and_help_codes() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(["esrp", "frobnicate"], &mut out, &mut err), EXIT_USAGE);
        assert_eq!(run(["esrp", "--help"], &mut out, &mut err), 0);
        assert_eq!(run(["esrp", "--version"], &mut out, &mut err), 0);
    }
}
