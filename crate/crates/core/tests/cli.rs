use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_layer-prune"))
        .args(args)
        .env("LAYER_PRUNE_CACHE_DIR", cache)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn optimal_search_on_the_mock_counts_every_subset() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["search", "--algo", "optimal", "--task", "t", "--n", "2", "--oracle", "mock"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("evaluations: 66 "), "{text}");
    assert!(text.contains("subsets scored: 66"));
}

#[test]
fn glp_search_then_lookup_without_evaluations() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("glp.json");
    let l = ledger.to_str().unwrap();
    let o = run(&["search", "--algo", "glp", "--task", "t", "--n", "6", "--oracle", "mock", "--out", l], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("evaluations: 57 "), "{text}");
    let chain = text.lines().find_map(|s| s.strip_prefix("pruned: ")).unwrap().to_string();

    let o = run(&["lookup", "--ledger", l, "--x", "6"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains(&format!("pruned: {chain}")));
    assert!(text.contains("evaluations: 0"));

    // a second run reuses the ledger and evaluates nothing
    let o = run(&["search", "--algo", "glp", "--task", "t", "--n", "6", "--oracle", "mock", "--out", l], dir.path());
    assert!(stdout(&o).contains("evaluations: 0 "));

    let o = run(&["lookup", "--ledger", l, "--x", "7"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn top_layer_pruning_needs_no_oracle_calls() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["search", "--algo", "top", "--task", "t", "--n", "6", "--oracle", "mock"], dir.path());
    let text = stdout(&o);
    assert!(text.contains("pruned: [11,10,9,8,7,6]"), "{text}");
    assert!(text.contains("evaluations: 0 "));
}

#[test]
fn glp_with_zero_layers_reports_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["search", "--algo", "glp", "--task", "t", "--n", "0", "--oracle", "mock"], dir.path());
    let text = stdout(&o);
    assert!(text.contains("baseline (all 12 layers)"), "{text}");
    assert!(text.contains("pruned: []"));
    assert!(text.contains("evaluations: 1 "));
}

#[test]
fn config_file_supplies_oracle_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "oracle = \"mock\"\ndepth = 8\nparallelism = 4\n").unwrap();
    let o = run(&["search", "--algo", "optimal", "--task", "t", "--n", "2", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("evaluations: 28 "));

    std::fs::write(&cfg, "oracle = \"mock\"\nbogus = 1\n").unwrap();
    let o = run(&["search", "--algo", "top", "--task", "t", "--n", "2", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn report_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    let t = dir.path().join("t.json");
    for (algo, path) in [("glp", &g), ("top", &t)] {
        let o = run(&["search", "--algo", algo, "--task", "t", "--n", "3", "--oracle", "mock", "--out", path.to_str().unwrap()], dir.path());
        assert!(o.status.success());
    }
    let out = dir.path().join("plots");
    let o = run(
        &[
            "report", "--ledger", g.to_str().unwrap(), "--ledger", t.to_str().unwrap(), "--oracle", "mock", "--seeds", "0,1,2",
            "--out-dir", out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("Rel.") && text.contains("median"));
    for f in ["summary.csv", "scores.csv", "candidates.csv"] {
        assert!(out.join(f).exists());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(run(&["--version"], dir.path()).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["search", "--algo", "glp", "--task", "t"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["search", "--algo", "glp", "--task", "t", "--n", "12", "--oracle", "mock"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["search", "--algo", "glp", "--task", "nope", "--n", "1"], dir.path()).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["lookup", "--ledger", missing.to_str().unwrap(), "--x", "1"], dir.path()).status.code(), Some(2));
    let o = run(&["search", "--algo", "glp", "--task", "t", "--n", "1", "--depth", "12"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("checkpoint"));
}

#[test]
fn bridge_oracle_through_the_mock_worker() {
    let dir = tempfile::tempdir().unwrap();
    let worker = format!("{} mock-worker --depth 12 --seed 0", env!("CARGO_BIN_EXE_layer-prune"));
    let bridged = run(
        &["search", "--algo", "glp", "--task", "t", "--n", "3", "--oracle", "bridge", "--worker-cmd", &worker, "--parallelism", "2"],
        dir.path(),
    );
    assert!(bridged.status.success(), "{}", String::from_utf8_lossy(&bridged.stderr));
    let direct = run(&["search", "--algo", "glp", "--task", "t", "--n", "3", "--oracle", "mock"], dir.path());
    let chain = |o: &Output| stdout(o).lines().find(|l| l.starts_with("pruned: ")).unwrap().to_string();
    assert_eq!(chain(&bridged), chain(&direct));
}

#[test]
fn builtin_toy_search_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["search", "--algo", "glp", "--task", "unigram", "--n", "1", "--epochs", "1", "--parallelism", "6"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("(accuracy)"));
    assert!(text.contains("evaluations: 6 "), "{text}");
}
