use std::collections::BTreeMap;

use hhvg::agent::Variant;
use hhvg::config::{ExperimentConfig, Profile};
use hhvg::harness::artifacts::{completed_summary, load_rewards, write_run, RunManifest, RunStatus};
use hhvg::harness::{compare_variants, run_one, run_suite, Stage, ValidationContext};
use hhvg::Error;

const ALL: [Variant; 6] = [Variant::Oracle, Variant::Cb, Variant::Cpe, Variant::PgIrs, Variant::PgGr, Variant::Prw];

fn tiny() -> ExperimentConfig {
    let sets: Vec<String> = [
        "plan.dap_steps=12",
        "plan.postdap_epochs=8",
        "plan.batch_size=8",
        "plan.eval_every=4",
        "plan.eval_rows=32",
        "plan.oracle_epochs=20",
        "plan.oracle_test_rows=16",
        "plan.plateau_window=3",
        "oracle.grid.counts=[3,3,2,2,2,2]",
        "agent.model.hidden=[8]",
        "runs=2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    ExperimentConfig::from_parts(Profile::Desk, None, &sets).unwrap()
}

#[test]
fn suite_covers_every_pair_on_one_clock() {
    let cfg = tiny();
    let ctx = ValidationContext::for_config(&cfg).unwrap();
    let out = run_suite(&cfg, &ctx, &ALL, &[1, 2], 2).unwrap();
    assert_eq!(out.len(), 12);
    for ((v, _), r) in &out {
        let steps: Vec<u64> = r.record.iter().map(|x| x.step).collect();
        // 12 DAP steps + 8 post-DAP epochs, or 20 oracle epochs.
        assert_eq!(steps, (1..=20).collect::<Vec<u64>>(), "{v}");
        if *v != Variant::Oracle {
            assert!(r.record[..12].iter().all(|x| x.stage == Stage::Dap && x.cr.is_some()));
            assert!(r.record[12..].iter().all(|x| x.stage == Stage::PostDap && x.cr.is_none()));
            assert!(r.record[12..].windows(2).all(|w| w[1].lr <= w[0].lr), "{v}: rate rose");
        }
        assert!(r.terminal.post_mse.is_finite() && r.terminal.post_percent > 0.0);
        assert_eq!(r.rewards.is_some(), *v == Variant::Cb);
        assert_eq!(r.coverage.is_some(), *v != Variant::Oracle);
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = tiny();
    let ctx = ValidationContext::for_config(&cfg).unwrap();
    let vs = [Variant::Cb, Variant::PgIrs, Variant::Prw];
    let a = run_suite(&cfg, &ctx, &vs, &[3, 4], 1).unwrap();
    let b = run_suite(&cfg, &ctx, &vs, &[3, 4], 3).unwrap();
    for (k, r) in &a {
        assert_eq!(r.terminal, b[k].terminal, "{k:?}");
        assert_eq!(r.params, b[k].params, "{k:?}");
    }
}

#[test]
fn pgirs_without_cb_is_refused() {
    let cfg = tiny();
    let ctx = ValidationContext::for_config(&cfg).unwrap();
    let err = run_suite(&cfg, &ctx, &[Variant::PgIrs], &[1], 1).unwrap_err();
    assert!(matches!(err, Error::Dependency(_)), "{err}");
    assert!(matches!(run_one(&cfg, &ctx, Variant::PgIrs, 1, None), Err(Error::Dependency(_))));
}

#[test]
fn comparison_reports_both_hypotheses_per_phase() {
    let cfg = tiny();
    let ctx = ValidationContext::for_config(&cfg).unwrap();
    let out = run_suite(&cfg, &ctx, &[Variant::Cb, Variant::Cpe, Variant::PgIrs], &[1, 2, 3], 1).unwrap();
    let mut by: BTreeMap<Variant, Vec<_>> = BTreeMap::new();
    for ((v, _), r) in &out {
        by.entry(*v).or_default().push(r.terminal);
    }
    let cmp = compare_variants(&by, cfg.alpha).unwrap();
    assert_eq!(cmp.summary.len(), 3);
    assert_eq!(cmp.tests.len(), 4);
    for t in &cmp.tests {
        assert_eq!(t.less, Variant::Cb);
        assert!((0.0..=1.0).contains(&t.test.p));
        assert_eq!(t.reject, t.test.p <= t.alpha);
    }
}

#[test]
fn written_runs_are_found_again() {
    let cfg = tiny();
    let ctx = ValidationContext::for_config(&cfg).unwrap();
    let root = tempfile::tempdir().unwrap();
    let hash = cfg.hash();
    assert!(completed_summary(root.path(), &hash, Variant::Cb, 5).unwrap().is_none());
    assert!(matches!(load_rewards(root.path(), &hash, 5), Err(Error::Dependency(_))));

    let out = run_one(&cfg, &ctx, Variant::Cb, 5, None).unwrap();
    let manifest = RunManifest::start(&cfg, Variant::Cb, 5);
    assert_eq!(manifest.status, RunStatus::Running);
    let dir = write_run(root.path(), &cfg, &out, manifest).unwrap();
    assert_eq!(RunManifest::read(&dir).unwrap().status, RunStatus::Complete);

    let summary = completed_summary(root.path(), &hash, Variant::Cb, 5).unwrap().unwrap();
    assert_eq!(summary.terminal, out.terminal);
    assert_eq!(load_rewards(root.path(), &hash, 5).unwrap(), out.rewards.unwrap());
}
