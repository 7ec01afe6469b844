use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varmem"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("VARMEM_SEED")
        .env_remove("VARMEM_TAIL_TOL")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn simulate_bundled_figure_config_twice_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig1a.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = run(&["simulate", "--config", cfg.to_str().unwrap()], dir);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let paths = std::fs::read_to_string(a.join("paths.csv")).unwrap();
    assert_eq!(paths, std::fs::read_to_string(b.join("paths.csv")).unwrap());
    let lines: Vec<&str> = paths.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0].split(',').count(), 101);
    for line in &lines[1..] {
        for v in line.split(',').skip(1) {
            assert!(v.parse::<f64>().unwrap().is_finite());
        }
    }
    assert_eq!(
        manifest(&a)["reproducibility_hash"],
        manifest(&b)["reproducibility_hash"]
    );
    assert_eq!(manifest(&a)["config"]["seed"], 1);
}

#[test]
fn seed_flag_changes_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig1b.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&["simulate", "--config", cfg.to_str().unwrap()], &a);
    let o = run(
        &["simulate", "--config", cfg.to_str().unwrap(), "--seed", "2"],
        &b,
    );
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(
        std::fs::read(a.join("paths.csv")).unwrap(),
        std::fs::read(b.join("paths.csv")).unwrap()
    );
    assert_eq!(manifest(&b)["config"]["seed"], 2);
}

#[test]
fn invalid_memory_exits_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"grid":{"points":[0.5,1.0]},"memory":{"kind":"constant","value":0.5},"innovations":{"kind":"wiener"}}"#,
    );
    let o = run(
        &["simulate", "--config", cfg.to_str().unwrap()],
        &tmp.path().join("out"),
    );
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.trim_end().lines().count(), 1);
    assert!(err.contains("d(t) > 1/2"), "{err}");
}

#[test]
fn unreachable_tail_budget_suggests_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig1a.json");
    let o = run(
        &[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--tail-tol",
            "0.01",
        ],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("smallest reachable tail_tol"));
}

#[test]
fn analyze_reports_c_matrix_and_divergent_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"grid":{"points":[0.25,0.5,0.75]},"memory":{"kind":"table","values":[0.75,0.9,1.05]},
            "innovations":{"kind":"white","sigma2":1.0},"analyze":{"lags":[0,1,100]}}"#,
    );
    let out = tmp.path().join("out");
    let o = run(&["analyze", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let c = std::fs::read_to_string(out.join("c_matrix.csv")).unwrap();
    let first: Vec<f64> = c
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((first[0] - 5.244_115_108_584_24).abs() < 1e-9);
    let delta = std::fs::read_to_string(out.join("c_oracle_delta.csv")).unwrap();
    for line in delta.lines().skip(1) {
        for v in line.split(',').skip(1) {
            let v: f64 = v.parse().unwrap();
            assert!(v.is_nan() || v <= 1e-8);
        }
    }
    let summ = std::fs::read_to_string(out.join("summability.csv")).unwrap();
    assert!(
        summ.lines()
            .any(|l| l.starts_with("1,2,0.9,1.05,divergent")),
        "{summ}"
    );
    let l2 = std::fs::read_to_string(out.join("l2.csv")).unwrap();
    assert!(
        l2.contains("total_measure,1\n") && l2.contains("variance_integral,1\n"),
        "{l2}"
    );
    // the d=1.05 row has no asymptotic law but the run still succeeds
    let cov = std::fs::read_to_string(out.join("covariance.csv")).unwrap();
    assert!(cov
        .lines()
        .any(|l| l.starts_with("2,2,") && l.contains(",NA,")));
}

#[test]
fn verify_mixed_regimes_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("mixed.json");
    let o = run(
        &["verify-clt", "--config", cfg.to_str().unwrap()],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("CLT not stated for mixed regimes"));
}

#[test]
fn verify_small_run_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"grid":{"points":[0.5,1.0]},"memory":{"kind":"constant","value":0.8},"innovations":{"kind":"wiener"},
            "seed":5,"verify":{"n":128,"replications":600,"n_list":[64,128,256,512,1024]}}"#,
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, threads) in [(&a, "1"), (&b, "2")] {
        let o = run(
            &[
                "verify-clt",
                "--config",
                cfg.to_str().unwrap(),
                "--threads",
                threads,
            ],
            dir,
        );
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    for f in [
        "covariance_empirical.csv",
        "normality.csv",
        "exponent_fit.csv",
        "report.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma["reproducibility_hash"], mb["reproducibility_hash"]);
    assert!(ma["runtime_seconds"].is_number());
}

#[test]
fn strict_z_star_turns_into_verdict_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"grid":{"points":[0.5,1.0]},"memory":{"kind":"constant","value":0.8},"innovations":{"kind":"wiener"},
            "seed":5,"verify":{"n":128,"replications":200,"z_star":1e-6,"n_list":[64,128,256,512,1024]}}"#,
    );
    let o = run(
        &["verify-clt", "--config", cfg.to_str().unwrap()],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reference_power_config_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("reference_d07.json");
    let out = tmp.path().join("o");
    let o = run(&["verify-clt", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    assert!(out.join("covariance_limit.csv").exists());
}

#[test]
fn reference_unit_exponent_config_passes_with_sigma_limit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("reference_d1.json");
    let out = tmp.path().join("o");
    let o = run(&["verify-clt", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let limit = std::fs::read_to_string(out.join("covariance_limit.csv")).unwrap();
    // Wiener kernel min(s, t)
    assert!(
        limit
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("t=0.125,0.125,0.125"),
        "{limit}"
    );
    assert!(
        limit.lines().last().unwrap().ends_with(",0.875,1"),
        "{limit}"
    );
}
