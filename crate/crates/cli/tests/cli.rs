use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// The shipped preset shrunk to something a debug build runs in seconds.
fn small(name: &str) -> String {
    let mut body = fs::read_to_string(configs().join(name)).unwrap();
    // the sweep section comes last; its drop count feeds the yield column only
    if body.contains("[sweep]") {
        body = body.trim_end().strip_suffix("drops = 20").unwrap().to_string() + "drops = 0\n";
    }
    body.replace("n_grid = 201", "n_grid = 33")
        .replace("refinement_checks = 12", "refinement_checks = 0")
        .replace("drops = 100\n", "drops = 2\n")
        .replace("drops = 20\n", "drops = 2\n")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn cqed(args: &[&str], cfg: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqed"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .unwrap()
}

fn run_dir(out: &Output) -> PathBuf {
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().find_map(|l| l.strip_prefix("run: ")).expect("run line");
    PathBuf::from(line)
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn shipped_configs_parse() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["reference.toml", "delta_sweep.toml", "probe_scan.toml"] {
        let cfg = write(tmp.path(), "c.toml", &small(name).replace("n_grid = 33", "n_grid = 1"));
        // n_grid = 1 fails validation, which only happens after a clean parse
        let out = cqed(&["tables"], &cfg, tmp.path());
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("n_grid"), "{name}: {err}");
    }
}

#[test]
fn missing_key_is_named_and_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let body: String = small("reference.toml").lines().filter(|l| !l.starts_with("gamma_perp")).map(|l| format!("{l}\n")).collect();
    let cfg = write(tmp.path(), "c.toml", &body);
    let out = cqed(&["tables"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma_perp"));
}

#[test]
fn zero_step_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &small("reference.toml").replace("dt = 0.0000000075", "dt = 0.0"));
    let out = cqed(&["simulate"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt"));
}

#[test]
fn missing_config_exits_1() {
    let out = Command::new(env!("CARGO_BIN_EXE_cqed")).arg("tables").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn delta_sweep_tables_are_checksummed_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &small("delta_sweep.toml"));
    let first = cqed(&["tables"], &cfg, tmp.path());
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let dir = run_dir(&first);
    let a = manifest(&dir)["artifacts"].clone();
    let tables: Vec<_> = a.as_array().unwrap().iter().filter(|e| e["path"].as_str().unwrap().starts_with("tables/")).collect();
    assert_eq!(tables.len(), 4);

    let again = cqed(&["tables"], &cfg, tmp.path());
    assert_eq!(again.status.code(), Some(1), "same run directory without --force");
    let forced = cqed(&["tables", "--force"], &cfg, tmp.path());
    assert_eq!(forced.status.code(), Some(0));
    assert_eq!(manifest(&run_dir(&forced))["artifacts"], a);
}

#[test]
fn simulate_then_analyze() {
    let (x, y) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let body = small("reference.toml");
    let runs: Vec<PathBuf> = [&x, &y]
        .iter()
        .map(|t| {
            let cfg = write(t.path(), "c.toml", &body);
            let out = cqed(&["simulate"], &cfg, t.path());
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
            run_dir(&out)
        })
        .collect();
    assert_eq!(fs::read(runs[0].join("manifest.json")).unwrap(), fs::read(runs[1].join("manifest.json")).unwrap());

    let cfg = x.path().join("c.toml");
    let traces = runs[0].join("traces");
    let out = cqed(&["analyze", traces.to_str().unwrap()], &cfg, x.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("traces: 2"), "{stdout}");
}

#[test]
fn noise_only_trace_reports_no_events() {
    let tmp = tempfile::tempdir().unwrap();
    // an atom that starts far above the cavity never reaches the mode
    let body = small("reference.toml").replace("[transit]\n", "[transit]\nz0 = 0.01\n").replace("drops = 2\n", "drops = 1\n");
    let cfg = write(tmp.path(), "c.toml", &body);
    let sim = cqed(&["simulate"], &cfg, tmp.path());
    assert_eq!(sim.status.code(), Some(0), "{}", String::from_utf8_lossy(&sim.stderr));
    let traces = run_dir(&sim).join("traces");
    let out = cqed(&["analyze", traces.to_str().unwrap()], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("no events"));
}

#[test]
fn calibrate_prints_arithmetic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &small("reference.toml").replace("snr_duration = 0.2", "snr_duration = 0.02"));
    let out = cqed(&["calibrate"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("imbalance efficiency 0.798"), "{stdout}");
    assert!(run_dir(&out).join("calibration.json").exists());
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", &small("delta_sweep.toml"));
    let out = cqed(&["sweep"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(run_dir(&out).join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5, "{summary}");
}
