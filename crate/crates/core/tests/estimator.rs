mod common;

use common::{estimator_error, Trace};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn incremental_updates_match_direct_sums(seed in any::<u64>()) {
        let trace = Trace::seeded(seed);
        let err = estimator_error(&trace);
        prop_assert!(err <= 1e-9, "relative error {err} for {trace:?}");
    }

    #[test]
    fn constant_observations_are_a_fixed_point(
        seed in any::<u64>(),
        w in 0.0f64..10.0,
        p in 0.01f64..10.0,
    ) {
        let mut trace = Trace::seeded(seed);
        for slot in &mut trace.slots {
            slot.2 = w;
            slot.3 = p;
        }
        trace.replay(|state| {
            for arm in state.arms() {
                if arm.n_disc > 0.0 {
                    assert_eq!(arm.w_bar, w);
                    assert_eq!(arm.p_bar, p);
                }
            }
        });
    }

    #[test]
    fn counts_decay_geometrically_without_feedback(seed in any::<u64>(), idle in 1usize..50) {
        let trace = Trace::seeded(seed);
        let mut state = trace.replay(|_| {});
        let gamma = trace.gamma;
        let drained: Vec<_> = state.arms().iter().map(|a| a.n_disc).collect();
        for _ in 0..idle {
            state.advance_slot(&[], 0).unwrap();
        }
        for (arm, before) in state.arms().iter().zip(drained) {
            let expected = before * gamma.powi(idle as i32);
            prop_assert!(common::rel_err(arm.n_disc, expected) <= 1e-12);
        }
    }

    #[test]
    fn pending_never_exceeds_tau_max(seed in any::<u64>()) {
        let trace = Trace::seeded(seed);
        let tau_max = trace.tau_max;
        trace.replay(|state| {
            for arm in state.arms() {
                assert!(arm.pending <= tau_max);
            }
        });
    }
}
