use epiconsensus::harness::{self, TrialTemplate};
use epiconsensus::scheduler::{run_trial_from, Simulation, StopRule};
use epiconsensus::{run_trial, Decision, Population, Schedule, Strand, TrialConfig, Value, Variant};
use proptest::prelude::*;

fn pop(w0: u32, w1: u32) -> Population {
    Population::new(w0, w1).unwrap()
}

#[test]
fn basic_terminates_with_unequal_writers() {
    for (n, w0, w1) in [(50, 1, 2), (40, 3, 5), (60, 2, 3), (120, 4, 12), (200, 10, 30)] {
        let t = TrialTemplate::new("term", n, pop(w0, w1), Variant::Basic);
        let seeds: Vec<u64> = (0..1000).collect();
        let results = harness::run_batch(&t, &seeds).unwrap();
        let decided = results.iter().filter(|r| r.decision != Decision::Timeout).count();
        assert!(decided >= 990, "{w0}/{w1} n={n}: {decided}/1000 decided");
    }
}

#[test]
fn decision_is_stable_after_consensus() {
    for seed in 0..10 {
        let cfg = TrialConfig::new(60, pop(3, 4), Variant::Basic, seed);
        let mut sim = Simulation::new(&cfg).unwrap();
        let (decision, _) = sim.run(cfg.max_big_steps, StopRule::AnyConsensus, false);
        assert_ne!(decision, Decision::Timeout);
        let settled = sim.strand().clone();
        for _ in 0..1000 {
            sim.big_step();
            assert_eq!(sim.strand(), &settled);
        }
    }
}

#[test]
fn erases_only_at_collisions_outside_self_stabilizing() {
    for variant in [Variant::Basic, Variant::Waiting] {
        for schedule in [Schedule::RandomDurations, Schedule::Rounds] {
            for seed in 0..20 {
                let cfg = TrialConfig::new(80, pop(5, 7), variant, seed)
                    .with_schedule(schedule)
                    .with_max_big_steps(20_000);
                let r = run_trial(&cfg).unwrap();
                assert_eq!(r.events.non_collision_erases, 0);
                assert!(r.events.erases > 0 || r.events.writes == 80);
            }
        }
    }
}

#[test]
fn waiting_is_faster_on_a_small_strand() {
    let basic = TrialTemplate::new("basic", 200, pop(8, 10), Variant::Basic);
    let cmp = harness::compare_variants(&basic, &basic.with_variant(Variant::Waiting), 60, 40).unwrap();
    assert!(cmp.mean_waiting < cmp.mean_basic, "{cmp:?}");
}

#[test]
fn rounds_schedule_still_decides_large_populations() {
    let cfg = TrialConfig::new(100, pop(10, 30), Variant::Basic, 1).with_schedule(Schedule::Rounds);
    assert_eq!(run_trial(&cfg).unwrap().decision, Decision::One);
}

#[test]
fn consensus_target_rule_waits_for_the_majority() {
    let cfg = TrialConfig::new(60, pop(2, 8), Variant::SelfStabilizing { epsilon: 0.01 }, 4);
    let r = run_trial_from(&cfg, Strand::uniform(60, Value::Zero).unwrap(), StopRule::ConsensusOn(Value::One)).unwrap();
    assert_eq!(r.decision, Decision::One);
    assert!(r.big_steps > 0);
}

fn arb_population() -> impl Strategy<Value = (u32, u32)> {
    (0u32..6, 0u32..6).prop_filter("non-empty", |(a, b)| a + b > 0)
}

fn arb_variant() -> impl Strategy<Value = Variant> {
    prop_oneof![
        Just(Variant::Basic),
        Just(Variant::Waiting),
        Just(Variant::Naive),
        (0.001f64..0.2).prop_map(|epsilon| Variant::SelfStabilizing { epsilon }),
        (1u32..4, 1u32..4).prop_map(|(k1, k2)| Variant::ActiveInactive { k1, k2 }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trajectory_records_match_the_strand(
        n in 2usize..40,
        (w0, w1) in arb_population(),
        variant in arb_variant(),
        rounds in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let schedule = if rounds { Schedule::Rounds } else { Schedule::RandomDurations };
        let cfg = TrialConfig::new(n, pop(w0, w1), variant, seed).with_schedule(schedule);
        let mut sim = Simulation::new(&cfg).unwrap();
        for step in 1..=60u64 {
            let rec = sim.big_step();
            prop_assert_eq!(rec.step, step);
            prop_assert_eq!(rec.zeros + rec.ones + rec.empties, n);
            prop_assert_eq!(rec.collisions, sim.strand().count_collisions());
            prop_assert!(sim.agents().iter().all(|a| a.position < n));
        }
    }

    #[test]
    fn runs_are_reproducible(
        n in 2usize..30,
        (w0, w1) in arb_population(),
        variant in arb_variant(),
        seed in any::<u64>(),
    ) {
        let cfg = TrialConfig::new(n, pop(w0, w1), variant, seed)
            .with_trajectory(true)
            .with_max_big_steps(500);
        prop_assert_eq!(run_trial(&cfg).unwrap(), run_trial(&cfg).unwrap());
    }

    #[test]
    fn decisions_are_valid(n in 2usize..30, w in 1u32..6, one in any::<bool>(), seed in any::<u64>()) {
        let (w0, w1) = if one { (0, w) } else { (w, 0) };
        let r = run_trial(&TrialConfig::new(n, pop(w0, w1), Variant::Basic, seed)).unwrap();
        let expected = if one { Decision::One } else { Decision::Zero };
        prop_assert_eq!(r.decision, expected);
    }
}
