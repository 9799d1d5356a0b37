use std::sync::Arc;

use hhvg::agent::{Agent, AgentConfig, Counters, RewardDatabase, Variant};
use hhvg::env::EnvConfig;
use hhvg::models::ModelConfig;
use proptest::prelude::*;

fn small() -> AgentConfig {
    AgentConfig {
        model: ModelConfig { hidden: vec![8, 8], ..ModelConfig::default() },
        batch_size: 8,
        ..AgentConfig::default()
    }
}

fn run(variant: Variant, seed: u64, steps: usize, db: Option<Arc<RewardDatabase>>) -> Agent {
    let mut a = Agent::new(variant, small(), EnvConfig::default(), seed, db).unwrap();
    for _ in 0..steps {
        a.hhvg_step().unwrap();
    }
    a
}

#[test]
fn identical_seeds_give_identical_agents() {
    for v in [Variant::Cb, Variant::Cpe, Variant::PgGr, Variant::Prw] {
        let (a, b) = (run(v, 7, 25, None), run(v, 7, 25, None));
        assert_eq!(a.pool().items(), b.pool().items(), "{v}");
        for ((na, pa), (nb, pb)) in a.param_sets().into_iter().zip(b.param_sets()) {
            assert_eq!(na, nb);
            assert_eq!(pa, pb, "{v} {na}");
        }
    }
}

#[test]
fn variants_share_the_initial_forward_model() {
    let fms: Vec<_> = [Variant::Cb, Variant::Cpe, Variant::PgGr, Variant::Prw]
        .into_iter()
        .map(|v| Agent::new(v, small(), EnvConfig::default(), 3, None).unwrap().forward_model().clone())
        .collect();
    assert!(fms.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn counters_follow_the_pruning_ladder() {
    let m = small().value_updates as u64;
    let expect = [
        (Variant::Cb, Counters { fm: 10, mm: 10, vf: 10 * m, ap: 10 }),
        (Variant::Cpe, Counters { fm: 10, mm: 0, vf: 10 * m, ap: 10 }),
        (Variant::PgGr, Counters { fm: 10, mm: 0, vf: 0, ap: 10 }),
        (Variant::Prw, Counters { fm: 10, mm: 0, vf: 0, ap: 0 }),
    ];
    for (v, c) in expect {
        assert_eq!(run(v, 1, 10, None).counters(), c, "{v}");
    }
}

#[test]
fn pgirs_replays_the_cb_database_stamp_by_stamp() {
    let cb = run(Variant::Cb, 2, 15, None);
    let db = cb.recorded_rewards().clone();
    for t in 0..15 {
        assert_eq!(db.samples_at(t).map(<[f64]>::len), Some(small().batch_size), "step {t}");
    }
    let irs = run(Variant::PgIrs, 2, 15, Some(Arc::new(db)));
    assert_eq!(irs.counters(), Counters { fm: 15, mm: 0, vf: 0, ap: 15 });
    assert!(irs.recorded_rewards().is_empty());
}

#[test]
fn reward_database_survives_a_file_round_trip() {
    let db = run(Variant::Cb, 4, 6, None).recorded_rewards().clone();
    let mut buf = Vec::new();
    db.write_to(&mut buf).unwrap();
    assert_eq!(RewardDatabase::read_from(buf.as_slice()).unwrap(), db);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn pool_grows_by_one_and_stays_in_the_box(seed in 0u64..1000, steps in 1usize..6) {
        let a = run(Variant::PgGr, seed, steps, None);
        prop_assert_eq!(a.pool().len(), steps);
        for (i, tr) in a.pool().items().iter().enumerate() {
            prop_assert_eq!(tr.t, i as u64);
            prop_assert!((0.0..=1.0).contains(&tr.s_next.x) && (0.0..=1.0).contains(&tr.s_next.y));
            prop_assert!(tr.behavior_prob > 0.0 && tr.behavior_prob <= 1.0);
        }
        let s = a.state();
        prop_assert_eq!(a.pool().items().last().unwrap().s_next, s);
    }
}
