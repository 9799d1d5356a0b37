use std::path::Path;
use std::process::{Command, Output};

const TINY: &[&str] = &[
    "plan.dap_steps=30",
    "plan.postdap_epochs=20",
    "plan.eval_every=10",
    "plan.eval_rows=64",
    "plan.oracle_epochs=40",
    "plan.oracle_test_rows=32",
    "plan.plateau_window=10",
    "oracle.grid.counts=[3,3,2,2,2,2]",
    "runs=2",
];

fn hhvg(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hhvg")).arg("--run-root").arg(root).args(args).output().expect("binary runs")
}

fn run(root: &Path, variant: &str, seed: &str) -> Output {
    let mut args = vec!["run", "--variant", variant, "--seed", seed, "--profile", "desk"];
    for s in TINY {
        args.push("--set");
        args.push(s);
    }
    hhvg(root, &args)
}

fn only_dir(p: &Path) -> std::path::PathBuf {
    let mut e: Vec<_> = std::fs::read_dir(p).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(e.len(), 1, "{e:?}");
    e.pop().unwrap()
}

#[test]
fn run_writes_manifest_traces_and_checkpoint() {
    let root = tempfile::tempdir().unwrap();
    let out = run(root.path(), "prw", "1");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = only_dir(&root.path().join("prw/1"));
    for f in ["manifest.json", "traces.csv", "summary.json", "checkpoint.bin"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["variant"], "prw");
    let traces = std::fs::read_to_string(dir.join("traces.csv")).unwrap();
    assert!(traces.starts_with("step,stage,loss,reward,CR,CE,error_pct,lr\n"));
    assert_eq!(traces.lines().count(), 1 + 30 + 20);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["reference_full_scale"]["post_percent"], 22.1453);
    assert!(summary["clock"].as_str().unwrap().contains("T+1"));
}

#[test]
fn same_command_twice_gives_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for root in [a.path(), b.path()] {
        assert!(run(root, "cpe", "3").status.success());
    }
    let read = |root: &Path| std::fs::read(only_dir(&root.join("cpe/3")).join("traces.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn completed_runs_are_skipped() {
    let root = tempfile::tempdir().unwrap();
    assert!(run(root.path(), "oracle", "1").status.success());
    let dir = only_dir(&root.path().join("oracle/1"));
    let before = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    assert!(run(root.path(), "oracle", "1").status.success());
    assert_eq!(before, std::fs::read_to_string(dir.join("manifest.json")).unwrap());
}

#[test]
fn pgirs_without_cb_is_a_dependency_error() {
    let root = tempfile::tempdir().unwrap();
    let out = run(root.path(), "pgirs", "1");
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("rewards.bin") && err.contains("cb"), "{err}");
    // With the C/B run present the replay succeeds.
    assert!(run(root.path(), "cb", "1").status.success());
    let out = run(root.path(), "pgirs", "1");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn config_and_usage_errors_have_distinct_codes() {
    let root = tempfile::tempdir().unwrap();
    let out = hhvg(root.path(), &["run", "--variant", "prw", "--set", "agent.gamma=7"]);
    assert_eq!(out.status.code(), Some(3));
    let out = hhvg(root.path(), &["run", "--variant", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let empty = tempfile::tempdir().unwrap();
    let out = hhvg(root.path(), &["compare", empty.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_emits_summary_and_one_test_per_hypothesis() {
    let root = tempfile::tempdir().unwrap();
    for seed in ["1", "2"] {
        for v in ["cb", "cpe"] {
            assert!(run(root.path(), v, seed).status.success());
        }
    }
    // An unfinished run is skipped with a warning.
    let stray = root.path().join("cpe/9/abc");
    std::fs::create_dir_all(&stray).unwrap();
    std::fs::copy(only_dir(&root.path().join("cpe/1")).join("manifest.json"), stray.join("manifest.json")).unwrap();
    let text = std::fs::read_to_string(stray.join("manifest.json")).unwrap().replace("\"complete\"", "\"running\"");
    std::fs::write(stray.join("manifest.json"), text).unwrap();

    let out_dir = root.path().join("cmp");
    let args = ["compare", root.path().to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
    let out = hhvg(root.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipping incomplete run"));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.contains("\nC/B,2,") && summary.contains("\nC/PE,2,"));
    let tests = std::fs::read_to_string(out_dir.join("tests.csv")).unwrap();
    // C/B < C/PE at both phases; PG/IRS is absent.
    assert_eq!(tests.lines().count(), 3);
    assert!(tests.lines().skip(1).all(|l| l.starts_with("C/B < C/PE")));
    let first = std::fs::read(out_dir.join("tests.csv")).unwrap();
    assert!(hhvg(root.path(), &args).status.success());
    assert_eq!(first, std::fs::read(out_dir.join("tests.csv")).unwrap());
}

#[test]
fn selftest_passes_and_lists_durations() {
    let root = tempfile::tempdir().unwrap();
    let out = hhvg(root.path(), &["selftest"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for suite in ["gaussian_kl", "householder", "gradients", "decomposition", "mann_whitney_u"] {
        let line = text.lines().find(|l| l.starts_with(suite)).unwrap_or_else(|| panic!("{suite} missing:\n{text}"));
        assert!(line.contains("pass"), "{line}");
    }
    assert!(text.lines().next().unwrap().contains("seconds"));
}

#[test]
fn oracle_gen_writes_the_grid() {
    let root = tempfile::tempdir().unwrap();
    let path = root.path().join("oracle.bin");
    let out = hhvg(
        root.path(),
        &["oracle-gen", "--set", "oracle.grid.counts=[2,3,1,1,2,2]", "--out", path.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = hhvg::env::read_dataset(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(rows.len(), 24);
}
