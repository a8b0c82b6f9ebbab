use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"{"grid": {"dim": 1, "n": 256, "length": 32}, "potential": {"coeffs": [-1, 1]}}"#;

fn mfkg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfkg"))
        .args(args)
        .env("MFKG_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = mfkg(args);
    assert!(
        out.status.success(),
        "mfkg {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn identical_runs_have_identical_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&[
            "simulate",
            "--config",
            s(&cfg),
            "--out",
            s(out),
            "--t-final",
            "2",
            "--seed",
            "7",
            "--snapshot-stride",
            "5",
        ]);
    }
    let ma = fs::read(a.join("manifest.json")).unwrap();
    assert_eq!(ma, fs::read(b.join("manifest.json")).unwrap());
    let manifest: Value = serde_json::from_slice(&ma).unwrap();
    let files: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap())
        .collect();
    for f in [
        "config.json",
        "final.mfkg",
        "snapshots/snap_00000.mfkg",
        "summary.json",
        "trajectory.csv",
    ] {
        assert!(files.contains(&f), "{f} missing from {files:?}");
    }
    for f in manifest["files"].as_array().unwrap() {
        assert_eq!(f["sha256"].as_str().unwrap().len(), 64);
        assert!(a.join(f["path"].as_str().unwrap()).exists());
    }

    let c = dir.path().join("c");
    ok(&[
        "simulate",
        "--config",
        s(&cfg),
        "--out",
        s(&c),
        "--t-final",
        "2",
        "--seed",
        "8",
        "--snapshot-stride",
        "5",
    ]);
    assert_ne!(
        fs::read(c.join("trajectory.csv")).unwrap(),
        fs::read(a.join("trajectory.csv")).unwrap()
    );
}

#[test]
fn trajectory_and_sigma_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let sim = dir.path().join("sim");
    ok(&[
        "simulate",
        "--config",
        s(&cfg),
        "--out",
        s(&sim),
        "--t-final",
        "1",
        "--seminorm-radius",
        "4",
    ]);
    assert_eq!(
        first_line(&sim.join("trajectory.csv")),
        "t,re_gamma,im_gamma,re_f,im_f,H,Q,seminorm_R4"
    );
    let rows = fs::read_to_string(sim.join("trajectory.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 11);

    let sig = dir.path().join("sigma");
    ok(&["sigma", "--config", s(&cfg), "--out", s(&sig), "--count", "21"]);
    let text = fs::read_to_string(sig.join("sigma.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "omega,sigma");
    assert_eq!(text.lines().count(), 22);
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[1] > 0.0);
    }
    let report = json(&sig.join("sigma_report.json"));
    assert!(report["z_rho"]["points"].as_array().unwrap().is_empty());
}

#[test]
fn minimal_config_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = dir.path().join("out");
    ok(&["solitary", "--config", s(&cfg), "--out", s(&out)]);
    let echoed = json(&out.join("config.json"));
    assert_eq!(echoed["integrator"]["dt"], 0.01);
    assert_eq!(echoed["mass"], 1.0);
    assert_eq!(echoed["experiment"], "solitary");
    assert_eq!(echoed["rho"]["preset"], "gaussian");
    assert_eq!(echoed["sigma"]["omega_max"], 0.99);
    assert!(echoed.get("output_dir").is_none());
    let report = json(&out.join("solitary.json"));
    assert!(report["residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn validation_errors_exit_by_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases = [
        (
            r#"{"grid": {"dim": 1, "n": 64, "length": 16}, "potential": {"coeffs": [1, -1]}}"#,
            4,
            "u_p > 0",
        ),
        (
            r#"{"grid": {"dim": 4, "n": 8, "length": 8}, "potential": {"coeffs": [0, 1]}}"#,
            4,
            "dim",
        ),
        (
            r#"{"grid": {"dim": 1, "n": 64, "length": 16}, "potential": {"coeffs": [0, 1]}, "integrator": {"step": 1}}"#,
            3,
            "integrator",
        ),
        (r#"{"grid": {"dim": 1, "n": 64, "length": 16}}"#, 3, "potential"),
    ];
    for (k, (text, code, needle)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{k}.json"), text);
        let res = mfkg(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
        let stderr = String::from_utf8_lossy(&res.stderr);
        assert_eq!(res.status.code(), Some(*code), "case {k}: {stderr}");
        assert!(stderr.contains(needle), "case {k}: {stderr}");
    }
    let missing = mfkg(&["simulate", "--config", s(&dir.path().join("nope.json"))]);
    assert_eq!(missing.status.code(), Some(6));
    let threads = Command::new(env!("CARGO_BIN_EXE_mfkg"))
        .args(["sigma", "--n", "64", "--length", "16", "--out", s(&out)])
        .env("MFKG_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(4));
}

#[test]
fn snapshot_distance_and_spectrum_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let sol = dir.path().join("sol");
    ok(&["solitary", "--config", s(&cfg), "--out", s(&sol), "--omega", "0.495"]);
    let dist = dir.path().join("dist");
    ok(&[
        "distance",
        "--config",
        s(&cfg),
        "--out",
        s(&dist),
        "--snapshot",
        s(&sol.join("solitary.mfkg")),
        "--radius",
        "4",
    ]);
    let d = json(&dist.join("distance.json"));
    assert!(d["distance"].as_f64().unwrap() < 1e-6, "{d}");
    assert!((d["best_omega"].as_f64().unwrap() - 0.495).abs() < 1e-9);

    let sim = dir.path().join("sim");
    ok(&[
        "simulate",
        "--config",
        s(&cfg),
        "--out",
        s(&sim),
        "--t-final",
        "60",
        "--sample-stride",
        "10",
    ]);
    let spec = dir.path().join("spec");
    ok(&[
        "spectrum",
        "--config",
        s(&cfg),
        "--out",
        s(&spec),
        "--trajectory",
        s(&sim.join("trajectory.csv")),
        "--window-width",
        "20",
        "--windows",
        "2",
    ]);
    assert_eq!(
        first_line(&spec.join("spectra.csv")),
        "window,omega,gamma_power,f_power"
    );
    let report = json(&spec.join("spectrum.json"));
    let windows = report["windows"].as_array().unwrap();
    assert_eq!(windows.len(), 2);
    for w in windows {
        let ratio = w["concentration_ratio"].as_f64().unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&ratio));
        let (lo, hi) = (w["support"][0].as_f64().unwrap(), w["support"][1].as_f64().unwrap());
        assert!(lo <= hi);
    }

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "time,x\n0,1\n").unwrap();
    let res = mfkg(&[
        "spectrum",
        "--config",
        s(&cfg),
        "--out",
        s(&spec),
        "--trajectory",
        s(&bad),
    ]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn counterexample_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ce");
    ok(&[
        "counterexample",
        "--n",
        "512",
        "--length",
        "64",
        "--out",
        s(&out),
        "--t-final",
        "5",
        "--window-width",
        "4",
    ]);
    let res = mfkg(&[
        "counterexample",
        "--n",
        "512",
        "--length",
        "64",
        "--out",
        s(&out),
        "--t-final",
        "5",
    ]);
    assert_eq!(res.status.code(), Some(4));
    let spec = json(&out.join("counterexample.json"));
    assert!((spec["omega1"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!(spec["sigma1"].as_f64().unwrap().abs() < 1e-10);
    assert_eq!(
        first_line(&out.join("trajectory.csv")),
        "t,re_gamma,im_gamma,re_f,im_f,H,Q"
    );
    let p = json(&out.join("persistence.json"));
    assert!(p["max_relative_error"].as_f64().unwrap() < 1e-3, "{p}");
}
