use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use esrp_core::codec::{encode_cm, encode_signal, CmReport, EnergyByte, SignalPacket};
use esrp_core::NodeId;

fn esrp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esrp"))
        .args(args)
        .env_remove("ESRP_OUT")
        .output()
        .unwrap()
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            let b = fs::read(&p).unwrap();
            (PathBuf::from(p.file_name().unwrap()), b)
        })
        .collect();
    files.sort();
    files
}

#[test]
fn run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = esrp(&["run", &scenario("table32.toml"), "--seed", "1", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["manifest.json", "metrics.csv", "summary.json", "node_energy.csv", "ledger.csv", "security.jsonl"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    assert!(!dir.path().join("trace.jsonl").exists());
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 7);
    assert!(metrics.lines().last().unwrap().starts_with("summary,"));
}

#[test]
fn missing_scenario_names_the_path() {
    let o = esrp(&["run", "no/such/scenario.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no/such/scenario.toml"), "{}", stderr(&o));
}

#[test]
fn iteration_override_reaches_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = esrp(&["run", &scenario("micro.toml"), "--iterations", "5", "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["iterations"], 5);
    assert_eq!(manifest["iterations_run"], 5);
    assert!(dir.path().join("trace.jsonl").is_file());
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = esrp(&["run", &scenario("table32.toml"), "--seed", "3", "--trace", "--out", path(d.path())]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(read_dir_bytes(a.path()), read_dir_bytes(b.path()));
}

#[test]
fn output_dir_precedence() {
    let base = tempfile::tempdir().unwrap();
    let from_file = base.path().join("from_file");
    let from_env = base.path().join("from_env");
    let from_flag = base.path().join("from_flag");
    let sc = base.path().join("s.toml");
    fs::write(
        &sc,
        format!(
            "out_dir = {:?}\niterations = 1\n[attacks]\ncount = 0\n",
            from_file.to_str().unwrap()
        ),
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_esrp");
    let run = |env: Option<&Path>, flag: Option<&Path>| {
        let mut c = Command::new(bin);
        c.args(["run", path(&sc)]).env_remove("ESRP_OUT");
        if let Some(e) = env {
            c.env("ESRP_OUT", e);
        }
        if let Some(f) = flag {
            c.args(["--out", path(f)]);
        }
        assert!(c.output().unwrap().status.success());
    };
    run(None, None);
    assert!(from_file.join("metrics.csv").is_file());
    run(Some(&from_env), None);
    assert!(from_env.join("metrics.csv").is_file());
    run(Some(&from_env), Some(&from_flag));
    assert!(from_flag.join("metrics.csv").is_file());
}

#[test]
fn security_sweep_aggregates_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = esrp(&[
        "sweep",
        &scenario("table32.toml"),
        "--param",
        "security",
        "--values",
        "off,on",
        "--seeds",
        "1-10",
        "--keep-runs",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let runs = fs::read_to_string(dir.path().join("sweep_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 21);
    let agg = fs::read_to_string(dir.path().join("sweep_aggregate.csv")).unwrap();
    let lines: Vec<&str> = agg.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("security,runs,alive_mean,alive_std,"));
    assert!(lines[1].starts_with("off,10,") && lines[2].starts_with("on,10,"));
    let kept = fs::read_dir(dir.path().join("runs/security=on")).unwrap().count();
    assert_eq!(kept, 10);
    let series = fs::read_to_string(dir.path().join("sweep_series.csv")).unwrap();
    assert!(series.starts_with("label,iteration,time_s,"));
    assert_eq!(series.lines().filter(|l| l.starts_with("security=on,")).count(), 5);
}

#[test]
fn intruder_sweep_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = esrp(&[
        "sweep",
        &scenario("table32.toml"),
        "--param",
        "intruders",
        "--values",
        "0,25",
        "--seeds",
        "1,2",
        "--out",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let agg = fs::read_to_string(dir.path().join("sweep_aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 3);
}

#[test]
fn one_value_one_seed_sweep_matches_a_run() {
    let sweep = tempfile::tempdir().unwrap();
    let run = tempfile::tempdir().unwrap();
    let o = esrp(&[
        "sweep",
        &scenario("table32.toml"),
        "--param",
        "clustering.k",
        "--values",
        "5",
        "--seeds",
        "4",
        "--out",
        path(sweep.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = esrp(&["run", &scenario("table32.toml"), "--seed", "4", "--out", path(run.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["metrics.csv", "summary.json", "manifest.json"] {
        assert_eq!(fs::read(sweep.path().join(f)).unwrap(), fs::read(run.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn sweep_rejects_bad_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("micro.toml");
    let o = esrp(&["sweep", &sc, "--param", "nonsense", "--values", "1", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nonsense"));
    let o = esrp(&["sweep", &sc, "--param", "security", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn plan_prints_json() {
    let o = esrp(&["plan", &scenario("ch4_replay.toml")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let plan: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(plan["clusters"].as_array().unwrap().len(), 5);
    assert_eq!(plan["clusters"][0]["ch"], 3);
}

#[test]
fn codec_dump_pretty_prints() {
    let signal = SignalPacket {
        ch_id: 7,
        public_key: 131,
        private_key: 9,
        cm_ids: [4, 5, 6, 0xFF],
        neighbor_ch_id: 3,
    };
    let hex: String = encode_signal(&signal).iter().map(|b| format!("{b:02x}")).collect();
    let o = esrp(&["codec", "dump", "signal", &hex]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("signal packet"));
    assert!(text.contains("4 5 6 -"), "{text}");

    let cm = encode_cm(&CmReport {
        node_id: NodeId(12),
        energy: EnergyByte(200),
        ch_id: NodeId(3),
        payload: vec![0xAB, 0xCD],
    })
    .unwrap();
    let spaced: Vec<String> = cm.iter().map(|b| format!("{b:02x}")).collect();
    let mut args = vec!["codec", "dump", "cm"];
    args.extend(spaced.iter().map(String::as_str));
    let o = esrp(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("ab cd"));

    let o = esrp(&["codec", "dump", "cm", "0c c8"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("truncated"));
}

#[test]
fn exit_codes() {
    assert_eq!(esrp(&[]).status.code(), Some(1));
    assert_eq!(esrp(&["--help"]).status.code(), Some(0));
    assert_eq!(esrp(&["run"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "quorum = 3.0\n").unwrap();
    let o = esrp(&["run", path(&bad), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.toml"));

    fs::write(&bad, "unknown_key = 1\n").unwrap();
    assert_eq!(esrp(&["run", path(&bad)]).status.code(), Some(2));

    // Nobody in range of the sink: formation fails at run time.
    let lonely = dir.path().join("lonely.toml");
    fs::write(
        &lonely,
        "placement = \"table\"\nsink = { x = 0.0, y = 0.0 }\n[field]\nwidth = 100.0\nheight = 100.0\nradio_range = 5.0\n[attacks]\ncount = 0\n[[nodes]]\nid = 1\nx = 90.0\ny = 90.0\nenergy_mJ = 2000.0\n",
    )
    .unwrap();
    let o = esrp(&["run", path(&lonely), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn json_scenarios_load() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("s.json");
    fs::write(&sc, r#"{"seed": 2, "iterations": 2, "attacks": {"count": 0}}"#).unwrap();
    let o = esrp(&["run", path(&sc), "--out", path(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = esrp(&["run", path(&dir.path().join("s.yaml"))]);
    assert_eq!(o.status.code(), Some(2));
}
