use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arbitrariness"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn estimate_prints_moment_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["estimate", "--n", "166", "--pi", "0.225", "--a-hat", "0.6"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("x=0.5625 y=0.4000"), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 1);

    let o = run(dir.path(), &["estimate", "--alpha", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("x=0.6877 y=0.2918"), "{}", stdout(&o));
}

#[test]
fn estimate_accepts_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["estimate", "--n", "200", "--k", "45", "--a-hat", "0.6"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("x=0.5625 y=0.4000"), "{}", stdout(&o));
}

#[test]
fn infeasible_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["estimate", "--n", "166", "--pi", "0.225", "--a-hat", "0.8"],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("exceeds 1 − â"), "{}", stderr(&o));

    let o = run(dir.path(), &["estimate", "--alpha", "0.1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("maximum attainable"), "{}", stderr(&o));
}

#[test]
fn invalid_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["estimate", "--pi", "1.5"],
        vec!["estimate", "--pi", "0.2", "--k", "30"],
        vec!["estimate", "--a-hat", "-0.1"],
        vec!["estimate", "--alpha", "1.0"],
        vec!["fit-rfc", "--samples", "zero"],
        vec!["fit-rafc", "--quantile", "0.01", "--epsilon-pi", "0.1"],
        vec!["fit-rafc", "--quantile", "2"],
        vec!["model-choice", "--alphas", "0,1.5"],
        vec!["simulate", "--x", "0.5", "--y", "1.5"],
        vec!["frobnicate"],
    ] {
        let o = run(dir.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    let o = run(dir.path(), &["estimate", "--pi", "1.5"]);
    assert!(stderr(&o).contains("--pi"), "{}", stderr(&o));
}

#[test]
fn zero_acceptance_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "fit-rafc",
            "--sims",
            "500",
            "--epsilon-pi",
            "1e-9",
            "--epsilon-a",
            "1e-9",
        ],
    );
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("no simulation accepted"));
}

#[test]
fn fit_rfc_summary_matches_reference_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "fit-rfc",
            "--n",
            "166",
            "--pi",
            "0.225",
            "--a-hat",
            "0.6",
            "--samples",
            "100000",
            "--seed",
            "1",
            "--out-summary",
            "s.json",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&dir.path().join("s.json"));
    let mean_a = v["a"]["mean"].as_f64().unwrap();
    assert!((mean_a - 0.61).abs() <= 0.02, "{mean_a}");
    assert_eq!(v["count"], 100_000);
    assert_eq!(v["run"]["seed"], 1);
}

#[test]
fn identical_invocations_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let common = [
        "fit-rfc",
        "--samples",
        "20000",
        "--seed",
        "9",
        "--out-density",
        "DENS",
        "--density",
        "joint-xy",
        "--bins",
        "20",
    ];
    for (tag, workers) in [("a", "1"), ("b", "4"), ("c", "4")] {
        let mut args: Vec<String> = common.iter().map(|s| s.to_string()).collect();
        args[6] = format!("{tag}.density.csv");
        args.extend(
            ["--workers", workers, "--out-samples"]
                .iter()
                .map(|s| s.to_string())
                .chain([
                    format!("{tag}.csv"),
                    "--out-summary".into(),
                    format!("{tag}.json"),
                ]),
        );
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(run(dir.path(), &refs).status.code(), Some(0));
    }
    for ext in ["csv", "json", "density.csv", "csv.meta.json"] {
        let a = fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        for other in ["b", "c"] {
            let b = fs::read(dir.path().join(format!("{other}.{ext}"))).unwrap();
            assert_eq!(a, b, "{other}.{ext}");
        }
    }
    let density = fs::read_to_string(dir.path().join("a.density.csv")).unwrap();
    assert_eq!(density.lines().count(), 1 + 400);
}

#[test]
fn summarize_reproduces_fit_summary() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in [
        vec!["fit-rfc", "--samples", "5000", "--seed", "3"],
        vec!["fit-rafc", "--sims", "50000", "--seed", "3"],
    ] {
        let mut args = cmd.clone();
        args.extend(["--out-samples", "s.csv", "--out-summary", "fit.json"]);
        let o = run(dir.path(), &args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let o = run(
            dir.path(),
            &["summarize", "s.csv", "--out-summary", "again.json"],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert_eq!(
            fs::read(dir.path().join("fit.json")).unwrap(),
            fs::read(dir.path().join("again.json")).unwrap(),
            "{cmd:?}"
        );
    }
}

#[test]
fn summarize_without_sidecar_uses_data_flags() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (0..200)
        .map(|i| {
            let y = 0.3 + 0.001 * i as f64;
            format!("0.6,{y},{}\n", 1.0 - y)
        })
        .collect();
    fs::write(dir.path().join("ext.csv"), format!("x,y,a\n{rows}")).unwrap();
    let o = run(
        dir.path(),
        &["summarize", "ext.csv", "--out-summary", "e.json"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&dir.path().join("e.json"));
    assert_eq!(v["sampler"], "external");
    assert_eq!(v["x"]["mean"], 0.6);

    fs::write(dir.path().join("bad.csv"), "x,y\n0.1,0.2\n").unwrap();
    let o = run(dir.path(), &["summarize", "bad.csv"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn model_choice_writes_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["model-choice", "--sims", "60000", "--out-summary", "m.json"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&dir.path().join("m.json"));
    let models = v["models"].as_array().unwrap();
    assert_eq!(models.len(), 6);
    let total: f64 = models
        .iter()
        .map(|m| m["probability"].as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-5);
    let alphas: Vec<f64> = models
        .iter()
        .map(|m| m["alpha"].as_f64().unwrap())
        .collect();
    assert_eq!(alphas, [0.0, 0.025, 0.05, 0.1, 0.2, 0.5]);
    assert_eq!(models[0]["bayes_factor_vs_first"], 1.0);
    assert!(stdout(&o).contains("best alpha="));

    let o = run(
        dir.path(),
        &["model-choice", "--alphas", "0.05", "--sims", "20000"],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("p(alpha=0.05)=1.000"), "{}", stdout(&o));
}

#[test]
fn simulate_writes_replicates() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "simulate",
            "--x",
            "0.5625",
            "--y",
            "0.4",
            "--sims",
            "300",
            "--out-sims",
            "r.csv",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,k1,k2,k1_rejected_by_2,pi_sim,a_sim"));
    assert_eq!(lines.count(), 300);
    assert!(dir.path().join("r.csv.meta.json").exists());
    assert!(stdout(&o).contains("300 replicates"));
}
