use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qbat(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbat"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("QBAT_OUT")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn simulate_fills_defaults_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "[system]\nn_b = 2\ng_bc = 0.1\nomega_c = 3.0\n[numerics]\npoints = 20\n");
    let o = qbat(dir.path(), &["simulate", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("simulate");
    for f in ["series.csv", "series.py", "series_populations.csv", "series_populations.py", "manifest.json"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    let r = &m["config"]["resolved"];
    assert_eq!(r["modes_battery"], 12);
    assert_eq!(r["modes_charger"], 12);
    assert_eq!(r["sector"], "odd");
    assert_eq!(r["omega_c"], 3.0);
    let csv = fs::read_to_string(run.join("series.csv")).unwrap();
    assert!(csv.starts_with("# schema: qbat.series.v1\n"));
    assert_eq!(csv.lines().count(), 22);
}

#[test]
fn runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--n-b", "2", "--g-bc", "0.1", "--n", "3", "--points", "30"];
    let a = qbat(&dir.path().join("a"), &args);
    let b = qbat(&dir.path().join("b"), &args);
    assert!(a.status.success() && b.status.success());
    for f in ["series.csv", "series_populations.csv", "manifest.json"] {
        let x = fs::read(dir.path().join("a/simulate").join(f)).unwrap();
        let y = fs::read(dir.path().join("b/simulate").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "[system]\nn_b = 2\ng_bc = 0.1\nomega_c = 3.0\n");
    let o = qbat(dir.path(), &["--modes-battery", "8", "simulate", "--config", &cfg, "--n-b", "1", "--points", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = fs::read_to_string(dir.path().join("simulate/manifest.json")).unwrap();
    let m: serde_json::Value = serde_json::from_str(&m).unwrap();
    assert_eq!(m["config"]["resolved"]["num_particles"], 1);
    assert_eq!(m["config"]["resolved"]["modes_battery"], 8);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "[system]\nn_b = 2\ng_bc = 0.1\nomega_c = 3.0\nwhatever = 1\n");
    let o = qbat(dir.path(), &["simulate", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("whatever"));

    let o = qbat(dir.path(), &["simulate", "--g-bc", "0.1", "--omega-c", "1.0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("system.n_b"));

    let o = qbat(dir.path(), &["reproduce", "fig1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = qbat(dir.path(), &["simulate", "--config", "/nonexistent.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn attractive_coupling_and_small_cutoff_warn_but_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbat(dir.path(), &["simulate", "--n-b", "1", "--g-bc", "-0.1", "--omega-c", "1.0", "--points", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("attractive"));

    let o = qbat(
        dir.path(),
        &["--modes-battery", "4", "simulate", "--n-b", "1", "--g-bc", "0.1", "--n", "5", "--points", "5"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("n + 4 = 9"));
    let m = fs::read_to_string(dir.path().join("simulate/manifest.json")).unwrap();
    assert!(m.contains("n + 4 = 9"));
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qbat"))
        .args(["tlm", "--n-b", "2", "--g-bc", "0.1", "--n", "3"])
        .env("QBAT_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let t = fs::read_to_string(dir.path().join("tlm/tlm.csv")).unwrap();
    assert!(t.starts_with("# schema: qbat.tlm.v1\n"));
    assert!(t.contains("2.9867473294563"));
}

#[test]
fn scan_reports_failures_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "scan.toml",
        "[system]\nn_b = 1\ng_bc = 0.1\n[numerics]\nmodes_battery = 6\nmodes_charger = 6\n\
         [scan]\nparameter = \"omega_c\"\nvalues = [0.9, 1.02, 2.0]\n",
    );
    let o = qbat(dir.path(), &["scan", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("scan/spectrum.csv")).unwrap();
    assert!(csv.starts_with("# schema: qbat.spectrum.v1\nomega_c,omega_c,w_c,ratio_w"));
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("scan/spectrum.py").exists());
}

#[test]
fn empty_resonance_window_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbat(
        dir.path(),
        &["--modes-battery", "6", "--modes-charger", "6", "resonance", "--n-b", "1", "--g-bc", "0.1", "--n", "2"],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("no resonance"));
    let o = qbat(
        dir.path(),
        &["--modes-battery", "6", "--modes-charger", "6", "resonance", "--n-b", "1", "--g-bc", "0.1", "--n", "1"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let peaks = fs::read_to_string(dir.path().join("resonance/peaks.csv")).unwrap();
    assert_eq!(peaks.lines().count(), 3);
}

#[test]
fn reproduce_resonant_run_has_two_level_overlay() {
    let dir = tempfile::tempdir().unwrap();
    let o = qbat(dir.path(), &["--modes-battery", "8", "--modes-charger", "8", "reproduce", "fig2b"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("fig2b/series.csv")).unwrap();
    let header = csv.lines().nth(1).unwrap();
    assert!(header.ends_with("W_B_tlm,ergotropy_tlm"), "{header}");
    let m = fs::read_to_string(dir.path().join("fig2b/manifest.json")).unwrap();
    assert!(m.contains("\"reproduce fig2b\""));
}
