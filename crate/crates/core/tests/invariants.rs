mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use tod_core::analysis::{self, BoundInputs, RunHistory};
use tod_core::baselines::round_robin_select;
use tod_core::env::{EnvConfig, EnvState, QueueParams};
use tod_core::harness::{run_once, ExperimentSpec, GammaMode, PolicyKind, Scheme};
use tod_core::policy::{argmax_lowest, PolicyConfig, PolicyState};

fn small_env(seed: u64, breakpoints: usize, background_prob: f64) -> EnvConfig {
    EnvConfig {
        horizon: 300,
        breakpoints,
        queue: QueueParams {
            background_prob,
            ..QueueParams::default()
        },
        seed,
        ..EnvConfig::paper_defaults()
    }
}

/// Steps `env` with the learner, handing every outcome to `check`.
fn drive(env: EnvConfig, mut check: impl FnMut(&EnvState, &tod_core::env::SlotOutcome)) {
    let mut sim = EnvState::new(env.clone()).unwrap();
    let mut policy = PolicyState::new(PolicyConfig {
        nodes: env.nodes,
        gamma: 0.99,
        xi: 0.6,
        tau_max: env.tau_max,
    })
    .unwrap();
    while !sim.is_finished() {
        let ctx = sim.observe().unwrap();
        let chosen = policy.select_node(&ctx);
        let out = sim.step(chosen).unwrap();
        policy.advance_slot(&out.completions, chosen).unwrap();
        check(&sim, &out);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reward_and_latency_sum_to_the_cap(seed in any::<u64>(), length in 1.0f64..15.0) {
        let trace = common::Trace::seeded(seed);
        let state = trace.replay(|_| {});
        let ctx = tod_core::policy::TaskContext {
            task_id: state.slot(),
            length,
            tx_cost: vec![0.03; trace.nodes],
            queue: vec![2.0; trace.nodes],
        };
        for i in 0..trace.nodes {
            let sum = state.reward_estimate(&ctx, i) + state.estimate_latency(&ctx, i);
            prop_assert!((sum - f64::from(trace.tau_max)).abs() < 1e-9);
        }
    }

    #[test]
    fn argmax_ignores_a_common_shift(
        scores in prop::collection::vec(-100.0f64..100.0, 1..12),
        shift in -50.0f64..50.0,
    ) {
        let best = argmax_lowest(scores.iter().copied());
        prop_assert!(scores.iter().all(|&s| s <= scores[best]));
        prop_assert!(scores[..best].iter().all(|&s| s < scores[best]));
        // Integer-valued shifts keep float comparisons exact.
        let shifted = scores.iter().map(|s| s + shift.round());
        let shifted_best = argmax_lowest(shifted);
        prop_assert_eq!(scores[shifted_best], scores[best]);
    }

    #[test]
    fn bonus_shrinks_with_more_data(seed in any::<u64>()) {
        let trace = common::Trace::seeded(seed);
        let state = trace.replay(|_| {});
        let arms = state.arms();
        for i in 0..arms.len() {
            for j in 0..arms.len() {
                if arms[i].n_disc < arms[j].n_disc {
                    prop_assert!(state.padding(i) >= state.padding(j));
                }
            }
        }
    }

    #[test]
    fn warm_up_visits_every_node_once(seed in any::<u64>(), nodes in 2usize..12) {
        let env = EnvConfig { nodes, ..small_env(seed, 0, 0.1) };
        let mut chosen = Vec::new();
        drive(env, |_, out| {
            if out.slot <= nodes as u64 {
                chosen.push(out.chosen);
            }
        });
        prop_assert_eq!(chosen, (0..nodes).collect::<Vec<_>>());
    }

    #[test]
    fn simulator_invariants_hold(seed in any::<u64>(), breakpoints in 0usize..40, p_bg in 0.0f64..1.0) {
        let env = small_env(seed, breakpoints, p_bg);
        let tau_max = env.tau_max;
        drive(env, |sim, out| {
            let t = out.slot;
            for i in 0..out.queues.len() {
                let node = &sim.nodes()[i];
                let (w, p) = (out.realization.waiting[i], out.realization.processing[i]);
                let rebuilt = out.length * node.tx + out.queues[i] * w + out.length * p;
                assert_eq!(out.realization.latency[i], rebuilt);
                assert!(node.queue_kb >= 0.0);
            }
            for fb in &out.completions {
                assert!(fb.receipt_slot > t && fb.receipt_slot <= t + 1);
                assert!(fb.receipt_slot > fb.task_id);
                assert!(fb.receipt_slot <= fb.task_id + u64::from(tau_max));
            }
            assert!(sim.pending_per_node().iter().all(|&p| p <= tau_max));
        });
    }

    #[test]
    fn schedule_has_the_requested_breakpoints(seed in any::<u64>(), breakpoints in 0usize..290) {
        let env = small_env(seed, breakpoints, 0.1);
        let nodes = env.nodes as u64;
        let sim = EnvState::new(env).unwrap();
        let slots: Vec<u64> = sim.schedule().entries.iter().map(|b| b.slot).collect();
        prop_assert_eq!(slots.len(), breakpoints);
        prop_assert_eq!(slots.iter().collect::<HashSet<_>>().len(), breakpoints);
        prop_assert!(slots.iter().all(|&s| s > nodes && s <= 300));
        prop_assert!(slots.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn round_robin_is_balanced(nodes in 2usize..16, horizon in 1u64..500) {
        let mut counts = vec![0u64; nodes];
        for t in 1..=horizon {
            counts[round_robin_select(t, nodes)] += 1;
        }
        let max = *counts.iter().max().unwrap();
        let min = *counts.iter().min().unwrap();
        prop_assert!(max - min <= 1);
    }

    #[test]
    fn cdf_is_monotone_and_bounded(seed in any::<u64>()) {
        let env = small_env(seed, 5, 0.1);
        let history: RunHistory = run_once(&env, Scheme::Tod { gamma: 0.99, xi: 0.6 }, seed).unwrap();
        let grid: Vec<f64> = (0..=60).map(|i| f64::from(i) * 0.5).collect();
        let cdf = analysis::latency_cdf(&history, &grid);
        prop_assert!(cdf.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(cdf.iter().all(|&f| (0.0..=1.0).contains(&f)));
        let success = *analysis::success_ratio(&history, env.tau_max).last().unwrap();
        prop_assert!((cdf[2 * env.tau_max as usize] - success).abs() < 1e-12);
    }

    #[test]
    fn bound_decreases_with_the_gap(
        gamma in 0.99f64..0.9995,
        small in 0.05f64..5.0,
        extra in 0.0f64..5.0,
        upsilon in 0usize..200,
    ) {
        let inputs = |delta_mu| BoundInputs {
            gamma,
            xi: 0.6,
            tau_max: 20,
            horizon: 10_000,
            upsilon,
            delta_mu,
            n_k: 10.0,
        };
        let lo = analysis::regret_bound(&inputs(small)).unwrap();
        let hi = analysis::regret_bound(&inputs(small + extra)).unwrap();
        prop_assert!(hi.total <= lo.total);
    }

    #[test]
    fn config_round_trips(
        seeds in prop::collection::vec(0..=i64::MAX as u64, 1..5),
        horizon in 100u64..100_000,
        breakpoints in 0usize..50,
        xi in 0.51f64..2.0,
        gamma in 0.5f64..0.9999,
        kind in 0usize..5,
    ) {
        let mut spec = ExperimentSpec::paper_defaults();
        spec.run.seeds = seeds;
        spec.env.horizon = horizon;
        spec.env.breakpoints = breakpoints;
        spec.policy.xi = xi;
        spec.policy.gamma = GammaMode::Fixed { value: gamma };
        spec.policy.kind = [
            PolicyKind::Tod,
            PolicyKind::Greedy,
            PolicyKind::GreedyExpected,
            PolicyKind::RoundRobin,
            PolicyKind::Iir,
        ][kind];
        let text = spec.to_toml_string().unwrap();
        let back = ExperimentSpec::from_toml_str(&text).unwrap();
        prop_assert_eq!(back, spec);
    }
}

#[test]
fn suboptimal_pulls_partition_the_suboptimal_slots() {
    let env = small_env(7, 10, 0.1);
    let history = run_once(&env, Scheme::Tod { gamma: 0.99, xi: 0.6 }, 7).unwrap();
    let total: u64 = analysis::count_suboptimal_pulls(&history).iter().sum();
    let suboptimal = history
        .records
        .iter()
        .filter(|r| r.chosen != r.opt_expected)
        .count() as u64;
    assert_eq!(total, suboptimal);
}

#[test]
fn idle_node_without_background_stays_empty() {
    let env = EnvConfig {
        nodes: 3,
        queue: QueueParams {
            background_prob: 0.0,
            ..QueueParams::default()
        },
        ..small_env(1, 0, 0.0)
    };
    let mut sim = EnvState::new(env).unwrap();
    while !sim.is_finished() {
        sim.observe().unwrap();
        let out = sim.step(0).unwrap();
        assert_eq!(out.queues[1], 0.0);
        assert_eq!(out.queues[2], 0.0);
    }
}
