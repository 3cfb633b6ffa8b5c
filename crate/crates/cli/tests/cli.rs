use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qnnent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qnnent"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = qnnent(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

/// Short training run on a small grid, shared by several tests.
fn small_train(root: &Path, name: &str) -> std::path::PathBuf {
    let dir = root.join(name);
    ok(&[
        "train",
        "--grid-steps",
        "40",
        "--max-epochs",
        "6",
        "--seed",
        "7",
        "--out",
        dir.to_str().unwrap(),
    ]);
    dir
}

#[test]
fn train_writes_artifacts_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let a = small_train(tmp.path(), "a");
    let b = small_train(tmp.path(), "b");
    for f in [
        "history.csv",
        "schedule.csv",
        "fits.json",
        "fit_quality.csv",
        "config.toml",
    ] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    let history = read(&a, "history.csv");
    assert!(history.starts_with("epoch,rms,out_bell,out_flat,out_c,out_p\n"));
    assert_eq!(history.lines().count(), 7);
    let manifest: serde_json::Value = serde_json::from_str(&read(&a, "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["request"]["config"]["seed"], 7);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn replay_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    let a = small_train(tmp.path(), "a");
    let r = tmp.path().join("replayed");
    ok(&[
        "replay",
        "--manifest",
        a.join("manifest.json").to_str().unwrap(),
        "--out",
        r.to_str().unwrap(),
    ]);
    for f in ["history.csv", "schedule.csv", "fits.json"] {
        assert_eq!(read(&a, f), read(&r, f), "{f}");
    }
}

#[test]
fn fit_command_matches_training_fit() {
    let tmp = TempDir::new().unwrap();
    let a = small_train(tmp.path(), "a");
    let f = tmp.path().join("fit");
    ok(&[
        "fit",
        "--grid-steps",
        "40",
        "--schedule",
        a.join("schedule.csv").to_str().unwrap(),
        "--out",
        f.to_str().unwrap(),
    ]);
    assert_eq!(read(&a, "fits.json"), read(&f, "fits.json"));
    let bad = qnnent(&[
        "fit",
        "--schedule",
        a.join("schedule.csv").to_str().unwrap(),
        "--out",
        f.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sweep_is_sorted_finite_and_seeded() {
    let tmp = TempDir::new().unwrap();
    let a = small_train(tmp.path(), "a");
    let fits = a.join("fits.json");
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "sweep-state",
            "--family",
            "P",
            "--fits",
            fits.to_str().unwrap(),
            "--grid-steps",
            "40",
            "--points",
            "7",
            "--seeds",
            "4",
            "--noise-kind",
            "phase",
            "--noise-amplitude",
            "0.0069",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        read(&out, "sweep.csv")
    };
    let csv = run("s1", "3");
    assert_eq!(csv, run("s2", "3"));
    assert_ne!(csv, run("s3", "4"));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("param,qnn_output,eof_clean,eof_noisy_mean,eof_noisy_stderr,n_seeds")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 7);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[6][0], 4.0);
    assert!((rows[0][2] - 1.0).abs() < 1e-12);
    for r in &rows {
        assert!(r.iter().all(|v| v.is_finite()));
        assert!(r[1..4].iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(r[4] >= 0.0);
        assert_eq!(r[5], 4.0);
    }
    assert!(rows.windows(2).all(|w| w[1][2] < w[0][2]));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "learning_rate = -1\n").unwrap();
    assert_eq!(
        qnnent(&["train", "--config", cfg.to_str().unwrap(), "--out", out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        qnnent(&["train", "--config", "/nonexistent.toml", "--out", out])
            .status
            .code(),
        Some(2)
    );
    let a = small_train(tmp.path(), "a");
    let fits = a.join("fits.json");
    let unknown = qnnent(&[
        "sweep-state",
        "--family",
        "Q",
        "--fits",
        fits.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(unknown.status.code(), Some(2));
    let reversed = qnnent(&[
        "sweep-state",
        "--family",
        "M",
        "--from",
        "5",
        "--to",
        "1",
        "--fits",
        fits.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(reversed.status.code(), Some(2));
}

#[test]
fn divergence_exits_with_three_and_keeps_history() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("hot.toml");
    fs::write(
        &cfg,
        "learning_rate = 1e308\nmax_epochs = 20\nstop_rms = 0.0\nseed = 1\n\n[grid]\ndt = 0.8\nn_steps = 30\n",
    )
    .unwrap();
    let out = tmp.path().join("hot");
    let res = qnnent(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        res.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(read(&out, "history.csv").lines().count() >= 2);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn randomize_with_zero_trials_writes_headers_only() {
    let tmp = TempDir::new().unwrap();
    let a = small_train(tmp.path(), "a");
    let out = tmp.path().join("r");
    ok(&[
        "randomize-coeff",
        "--fits",
        a.join("fits.json").to_str().unwrap(),
        "--which",
        "omega-zeta",
        "--trials",
        "0",
        "--grid-steps",
        "40",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        read(&out, "trials.csv"),
        "trial,state,baseline,randomized,abs_error\n"
    );
    assert_eq!(
        read(&out, "summary.csv"),
        "which,trials,mean_abs_error,max_abs_error,rms_error\n"
    );
}

#[test]
fn randomize_reports_errors() {
    let tmp = TempDir::new().unwrap();
    let a = small_train(tmp.path(), "a");
    let out = tmp.path().join("r");
    ok(&[
        "randomize-coeff",
        "--fits",
        a.join("fits.json").to_str().unwrap(),
        "--which",
        "K",
        "--trials",
        "3",
        "--grid-steps",
        "40",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(read(&out, "trials.csv").lines().count(), 1 + 3 * 15);
    assert!(read(&out, "summary.csv")
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("K,3,"));
}

#[test]
fn eof_oracle_on_json_matrix() {
    let tmp = TempDir::new().unwrap();
    let bell = tmp.path().join("bell.json");
    fs::write(&bell, "[[0.5,0,0,0.5],[0,0,0,0],[0,0,0,0],[0.5,0,0,0.5]]").unwrap();
    let out = ok(&["eof", "--matrix", bell.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["eof"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!((v["concurrence"].as_f64().unwrap() - 1.0).abs() < 1e-10);

    let mixed = tmp.path().join("mixed.json");
    let pairs: Vec<[f64; 2]> = (0..16)
        .map(|i| if i % 5 == 0 { [0.25, 0.0] } else { [0.0, 0.0] })
        .collect();
    fs::write(&mixed, serde_json::to_string(&pairs).unwrap()).unwrap();
    let v: serde_json::Value =
        serde_json::from_slice(&ok(&["eof", "--matrix", mixed.to_str().unwrap()]).stdout).unwrap();
    assert_eq!(v["eof"].as_f64().unwrap(), 0.0);

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "[[1,0],[0,0]]").unwrap();
    assert_eq!(
        qnnent(&["eof", "--matrix", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn fourier_vs_noise_records_kind_and_zero_row() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("f");
    ok(&[
        "fourier-vs-noise",
        "--kind",
        "complex",
        "--amplitudes",
        "0.0069,0",
        "--grid-steps",
        "40",
        "--max-epochs",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    let manifest: serde_json::Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert_eq!(manifest["request"]["kind"], "complex");
    let coeffs = read(&out, "coefficients.csv");
    assert!(coeffs
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("0.0000000000000000e0,1,K,a0,"));
    assert_eq!(coeffs.lines().count(), 1 + 2 * 3 * 7);
    let zero = small_train(tmp.path(), "zero");
    let fits: serde_json::Value = serde_json::from_str(&read(&zero, "fits.json")).unwrap();
    assert!(fits["K"]["a0"].is_number());
}
