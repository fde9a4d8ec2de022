//! Reference schemes: the non-causal greedy oracle, round-robin, and a
//! two-phase explore-then-exploit scheme on the same discounted estimates
//! as the UCB learner.

use crate::env::TaskRealization;
use crate::error::{Error, Result};
use crate::policy::{argmax_lowest, argmin_lowest, CompletedFeedback, PolicyConfig, PolicyState, TaskContext};

/// Node with the smallest realized latency. Needs the full counterfactual
/// draw, so it cannot run in practice.
pub fn greedy_select(realization: &TaskRealization) -> usize {
    argmin_lowest(realization.latency.iter().copied())
}

/// Node with the smallest expected latency.
pub fn greedy_expected_select(expected: &[f64]) -> usize {
    argmin_lowest(expected.iter().copied())
}

/// Cycles through the nodes starting from node 0 at slot 1.
pub fn round_robin_select(t: u64, nodes: usize) -> usize {
    debug_assert!(t >= 1);
    ((t - 1) % nodes as u64) as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IirConfig {
    pub gamma: f64,
    /// Fraction of the horizon spent in round-robin exploration.
    pub explore_fraction: f64,
    pub horizon: u64,
}

/// Round-robin for the first `explore_fraction * horizon` slots, then always
/// the node with the best estimated reward. No exploration bonus.
#[derive(Debug, Clone)]
pub struct IirPolicy {
    state: PolicyState,
    config: IirConfig,
}

impl IirPolicy {
    pub fn new(config: IirConfig, nodes: usize, xi: f64, tau_max: u32) -> Result<Self> {
        if !(config.explore_fraction > 0.0 && config.explore_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "explore_fraction must lie in (0, 1), got {}",
                config.explore_fraction
            )));
        }
        let state = PolicyState::new(PolicyConfig {
            nodes,
            gamma: config.gamma,
            xi,
            tau_max,
        })?;
        Ok(Self { state, config })
    }

    pub fn state(&self) -> &PolicyState {
        &self.state
    }

    pub fn config(&self) -> &IirConfig {
        &self.config
    }

    pub fn is_exploring(&self) -> bool {
        (self.state.slot() as f64) <= self.config.explore_fraction * self.config.horizon as f64
    }

    pub fn select(&self, ctx: &TaskContext) -> usize {
        let nodes = self.state.config().nodes;
        if self.is_exploring() {
            return round_robin_select(self.state.slot(), nodes);
        }
        argmax_lowest((0..nodes).map(|i| self.state.reward_estimate(ctx, i)))
    }

    pub fn advance_slot(&mut self, completions: &[CompletedFeedback], offloaded_to: usize) -> Result<()> {
        self.state.advance_slot(completions, offloaded_to)
    }
}
