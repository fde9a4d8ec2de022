#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tod_core::policy::{CompletedFeedback, FeedbackStatus, PolicyConfig, PolicyState};

/// A random offloading trace: per slot, the chosen node, its delay until the
/// feedback arrives and the normalized observations it carries.
#[derive(Debug, Clone)]
pub struct Trace {
    pub nodes: usize,
    pub gamma: f64,
    pub tau_max: u32,
    /// (node, delay, w_obs, p_obs) for slots 1, 2, ...
    pub slots: Vec<(usize, u32, f64, f64)>,
}

impl Trace {
    pub fn random(rng: &mut impl Rng, len: usize) -> Self {
        let nodes = rng.random_range(2..=8);
        let tau_max = rng.random_range(1..=30);
        let gamma = rng.random_range(0.5..=0.9999);
        let slots = (0..len)
            .map(|_| {
                (
                    rng.random_range(0..nodes),
                    rng.random_range(1..=tau_max),
                    rng.random_range(0.0..5.0),
                    rng.random_range(0.01..5.0),
                )
            })
            .collect();
        Self {
            nodes,
            gamma,
            tau_max,
            slots,
        }
    }

    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = rng.random_range(1..=300);
        Self::random(&mut rng, len)
    }

    fn feedback(&self, s: usize) -> CompletedFeedback {
        let (node, delay, w_obs, p_obs) = self.slots[s];
        let task_id = s as u64 + 1;
        CompletedFeedback {
            task_id,
            node,
            receipt_slot: task_id + u64::from(delay),
            w_obs,
            p_obs,
            status: FeedbackStatus::Completed,
        }
    }

    /// Feeds the trace through the incremental estimator, calling `check`
    /// with the state after every slot.
    pub fn replay(&self, mut check: impl FnMut(&PolicyState)) -> PolicyState {
        let mut state = PolicyState::new(PolicyConfig {
            nodes: self.nodes,
            gamma: self.gamma,
            xi: 0.6,
            tau_max: self.tau_max,
        })
        .unwrap();
        let all: Vec<CompletedFeedback> = (0..self.slots.len()).map(|s| self.feedback(s)).collect();
        for s in 0..self.slots.len() {
            let t = state.slot();
            let arriving: Vec<CompletedFeedback> = all
                .iter()
                .filter(|fb| fb.receipt_slot == t + 1)
                .cloned()
                .collect();
            state.advance_slot(&arriving, self.slots[s].0).unwrap();
            check(&state);
        }
        state
    }

    /// Discounted count and means of every node at slot `t`, summed
    /// directly over the feedbacks received by then.
    pub fn direct(&self, t: u64) -> Vec<(f64, f64, f64)> {
        let mut out = vec![(0.0, 0.0, 0.0); self.nodes];
        for s in 0..self.slots.len() {
            let fb = self.feedback(s);
            if fb.receipt_slot > t {
                continue;
            }
            let weight = self.gamma.powi((t - fb.receipt_slot) as i32);
            let o = &mut out[fb.node];
            o.0 += weight;
            o.1 += weight * fb.w_obs;
            o.2 += weight * fb.p_obs;
        }
        out.into_iter()
            .map(|(n, w, p)| if n > 0.0 { (n, w / n, p / n) } else { (0.0, 0.0, 0.0) })
            .collect()
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Largest relative gap between the incremental estimator and the direct
/// sums over every slot of the trace.
pub fn estimator_error(trace: &Trace) -> f64 {
    let mut worst: f64 = 0.0;
    trace.replay(|state| {
        let direct = trace.direct(state.slot());
        for (arm, (n, w, p)) in state.arms().iter().zip(direct) {
            worst = worst
                .max(rel_err(arm.n_disc, n))
                .max(rel_err(arm.w_bar, w))
                .max(rel_err(arm.p_bar, p));
        }
    });
    worst
}
