use std::path::Path;
use std::process::{Command, Output};

use ibc_lab_core::report::Report;

fn ibc_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ibc-lab"))
        .args(args)
        .env("IBC_LAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.cfg");
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn constants_run_passes_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = constants\nmodel.m = 0.5\n");
    let out = dir.path().join("out");
    let o = ibc_lab(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[PASS] criterion  2 gamma_m(0.5)"), "{stdout}");

    let report_path = out.join("report.json");
    let report = Report::load(&report_path).unwrap();
    assert_eq!(report.seed, 11);
    let gamma = report.experiments[0].results.iter().find(|r| r.name == "gamma_m").unwrap();
    assert!((gamma.value / -9.1298e-5 - 1.0).abs() < 1e-4);

    let rp = report_path.to_str().unwrap();
    let same = ibc_lab(&["verify", rp, rp]);
    assert_eq!(same.status.code(), Some(0));

    let mut moved = report.clone();
    moved.experiments[0].results.iter_mut().find(|r| r.name == "gamma_m").unwrap().value *= 1.1;
    let moved_path = dir.path().join("moved.json");
    moved.write(&moved_path).unwrap();
    let o = ibc_lab(&["verify", moved_path.to_str().unwrap(), rp]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("REGRESSION constants.gamma_m"));

    let text = std::fs::read_to_string(&report_path).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 2");
    let other = dir.path().join("other.json");
    std::fs::write(&other, text).unwrap();
    let o = ibc_lab(&["verify", other.to_str().unwrap(), rp]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schema version 2"), "{}", stderr(&o));
}

#[test]
fn repeated_runs_write_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = constants\nseed = 5\nmc.samples = 20000\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = ibc_lab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        let x = std::fs::read(a.join(&n)).unwrap();
        assert_eq!(x, std::fs::read(b.join(&n)).unwrap(), "{n:?}");
        assert!(!x.contains(&b'\r'));
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for (body, needle) in [
        ("sweep.lambdas =\n", "sweep.lambdas"),
        ("model.mass = 1\n", "unknown key 'model.mass'"),
        ("experiment = nothing\n", "unknown experiment"),
    ] {
        let cfg = write_config(dir.path(), body);
        let o = ibc_lab(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert!(stderr(&o).contains(needle), "{body}: {}", stderr(&o));
    }
    let cfg = write_config(dir.path(), "");
    let o = ibc_lab(&["run", "--config", &cfg, "--experiment", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ibc_lab(&["run", "--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = constants\n");
    let o = Command::new(env!("CARGO_BIN_EXE_ibc-lab"))
        .args(["run", "--config", &cfg])
        .env("IBC_LAB_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("IBC_LAB_THREADS"));
}

#[test]
fn computation_failures_exit_with_three() {
    // A probe grid reaching far from the collision set leaves the fit ill-conditioned.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment = probe_g\nprobe.r_min = 1e-9\nprobe.r_max = 1.0000001e-9\nprobe.points = 6\n",
    );
    let o = ibc_lab(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("experiment probe_g failed"), "{}", stderr(&o));
}
