//! Discounted-UCB offloading policy with delayed feedback.
//!
//! Each node is an arm. The learner keeps discounted estimates of the
//! per-KB waiting and processing delay of every node, built only from the
//! feedbacks that have actually arrived. The estimated latency of sending the
//! current task to node `i` is
//!
//! ```text
//! mu_bar(i) = L * T(i) + Q(i) * w_bar(i) + L * p_bar(i)
//! ```
//!
//! and the node with the largest `tau_max - mu_bar(i) + c(i)` is chosen, where
//! `c(i) = 2 tau_max sqrt(xi ln n / N(i))` is the exploration bonus, `N(i)` the
//! discounted feedback count of node `i` and `n` the sum over all nodes.
//!
//! Nodes are indexed from 0; the last node (`nodes - 1`) is the local task node
//! whose transmission cost is zero. Slots are indexed from 1.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    /// Helper nodes plus the local node.
    pub nodes: usize,
    /// Discount factor in (0, 1).
    pub gamma: f64,
    /// Exploration constant, must exceed 1/2.
    pub xi: f64,
    /// Maximum permitted latency in slots.
    pub tau_max: u32,
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 nodes, got {}",
                self.nodes
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.xi > 0.5) {
            return Err(Error::InvalidConfig(format!(
                "xi must exceed 1/2, got {}",
                self.xi
            )));
        }
        if self.tau_max < 1 {
            return Err(Error::InvalidConfig("tau_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Discounted statistics of one node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ArmStats {
    /// Discounted number of received feedbacks.
    pub n_disc: f64,
    /// Discounted mean waiting delay per queued KB (slots/KB).
    pub w_bar: f64,
    /// Discounted mean processing delay per task KB (slots/KB).
    pub p_bar: f64,
    /// Tasks offloaded to this node whose feedback has not come back yet.
    pub pending: u32,
}

/// What the decision maker sees at the start of a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskContext {
    /// Slot index of the task.
    pub task_id: u64,
    /// Task length in KB.
    pub length: f64,
    /// Transmission cost per KB for each node, in slots/KB.
    pub tx_cost: Vec<f64>,
    /// Queue length broadcast by each node at slot start, in KB.
    pub queue: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackStatus {
    /// The task finished within `tau_max`.
    Completed,
    /// The task timed out; the observation is synthesized from the latency cap.
    Censored,
    /// The task timed out and nothing is learned from it.
    Dropped,
}

/// A feedback that arrives at the task node during one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletedFeedback {
    /// Slot in which the task was issued.
    pub task_id: u64,
    pub node: usize,
    /// Slot at which the feedback is received.
    pub receipt_slot: u64,
    pub w_obs: f64,
    pub p_obs: f64,
    pub status: FeedbackStatus,
}

impl CompletedFeedback {
    fn carries_observation(&self) -> bool {
        self.status != FeedbackStatus::Dropped
    }
}

/// Turns the reported waiting and processing times of a finished task into
/// per-KB observations. An empty queue yields a zero waiting observation.
pub fn normalize_feedback(
    tau_w: f64,
    tau_p: f64,
    queue_at_issue: f64,
    length: f64,
) -> Result<(f64, f64)> {
    if !(length > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "task length must be positive, got {length}"
        )));
    }
    if tau_w < 0.0 || tau_p < 0.0 {
        return Err(Error::InvalidArgument(
            "reported delays must be non-negative".into(),
        ));
    }
    let w_obs = if queue_at_issue > 0.0 {
        tau_w / queue_at_issue
    } else {
        0.0
    };
    Ok((w_obs, tau_p / length))
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax_lowest<I: IntoIterator<Item = f64>>(scores: I) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.into_iter().enumerate() {
        if s > best_score || i == 0 {
            best = i;
            best_score = s;
        }
    }
    best
}

/// Index of the smallest value; ties go to the lowest index.
pub fn argmin_lowest<I: IntoIterator<Item = f64>>(values: I) -> usize {
    argmax_lowest(values.into_iter().map(|v| -v))
}

/// The discounted-UCB learner.
#[derive(Debug, Clone)]
pub struct PolicyState {
    config: PolicyConfig,
    t: u64,
    arms: Vec<ArmStats>,
    n_total: f64,
}

impl PolicyState {
    pub fn new(config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            t: 1,
            arms: vec![ArmStats::default(); config.nodes],
            n_total: 0.0,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    /// Current slot.
    pub fn slot(&self) -> u64 {
        self.t
    }

    pub fn arms(&self) -> &[ArmStats] {
        &self.arms
    }

    #[cfg(test)]
    pub(crate) fn set_arm(&mut self, node: usize, stats: ArmStats) {
        self.arms[node] = stats;
        self.n_total = self.arms.iter().map(|a| a.n_disc).sum();
    }

    /// Sum of the discounted feedback counts over all nodes.
    pub fn n_total(&self) -> f64 {
        self.n_total
    }

    /// Estimated latency of sending the current task to `node`, in slots.
    pub fn estimate_latency(&self, ctx: &TaskContext, node: usize) -> f64 {
        let arm = &self.arms[node];
        ctx.length * ctx.tx_cost[node] + ctx.queue[node] * arm.w_bar + ctx.length * arm.p_bar
    }

    /// Estimated reward `tau_max - mu_bar`.
    pub fn reward_estimate(&self, ctx: &TaskContext, node: usize) -> f64 {
        f64::from(self.config.tau_max) - self.estimate_latency(ctx, node)
    }

    /// Exploration bonus of `node`. Infinite for a node with no data.
    pub fn padding(&self, node: usize) -> f64 {
        let n = self.arms[node].n_disc;
        if n <= 0.0 {
            return f64::INFINITY;
        }
        // ln n is clamped at zero while n <= 1.
        let log_total = self.n_total.ln().max(0.0);
        2.0 * f64::from(self.config.tau_max) * (self.config.xi * log_total / n).sqrt()
    }

    pub fn ucb_score(&self, ctx: &TaskContext, node: usize) -> f64 {
        let bonus = self.padding(node);
        if bonus.is_infinite() {
            return f64::INFINITY;
        }
        self.reward_estimate(ctx, node) + bonus
    }

    /// Node for the task of the current slot. The first `nodes` slots visit
    /// every node once in order.
    pub fn select_node(&self, ctx: &TaskContext) -> usize {
        debug_assert_eq!(ctx.task_id, self.t, "context is for a different slot");
        let k = self.config.nodes as u64;
        if self.t <= k {
            return (self.t - 1) as usize;
        }
        argmax_lowest((0..self.config.nodes).map(|i| self.ucb_score(ctx, i)))
    }

    /// Moves from slot `t` to `t + 1`, folding in the feedbacks received
    /// during slot `t` and recording the task just offloaded.
    pub fn advance_slot(
        &mut self,
        completions: &[CompletedFeedback],
        offloaded_to: usize,
    ) -> Result<()> {
        let k = self.config.nodes;
        if offloaded_to >= k {
            return Err(Error::InvalidArgument(format!(
                "node {offloaded_to} out of range for {k} nodes"
            )));
        }
        let next = self.t + 1;
        for fb in completions {
            if fb.node >= k {
                return Err(Error::InvalidArgument(format!(
                    "feedback for node {} out of range for {k} nodes",
                    fb.node
                )));
            }
            if fb.receipt_slot <= self.t {
                return Err(Error::StaleFeedback {
                    task_id: fb.task_id,
                    receipt_slot: fb.receipt_slot,
                    now: self.t,
                });
            }
            if fb.receipt_slot > next {
                return Err(Error::InvalidArgument(format!(
                    "feedback for task {} arrives at slot {}, after slot {next}",
                    fb.task_id, fb.receipt_slot
                )));
            }
        }

        let gamma = self.config.gamma;
        for arm in &mut self.arms {
            arm.n_disc *= gamma;
        }
        for fb in completions {
            let arm = &mut self.arms[fb.node];
            arm.pending = arm.pending.saturating_sub(1);
            if !fb.carries_observation() {
                continue;
            }
            let weight = gamma.powi((next - fb.receipt_slot) as i32);
            // Weighted running mean; identical to re-normalizing the
            // discounted sums, and exact when every observation is equal.
            arm.n_disc += weight;
            let share = weight / arm.n_disc;
            arm.w_bar += share * (fb.w_obs - arm.w_bar);
            arm.p_bar += share * (fb.p_obs - arm.p_bar);
        }
        for arm in &mut self.arms {
            if arm.n_disc == 0.0 {
                arm.w_bar = 0.0;
                arm.p_bar = 0.0;
            }
        }
        self.arms[offloaded_to].pending += 1;
        self.n_total = self.arms.iter().map(|a| a.n_disc).sum();
        self.t = next;
        Ok(())
    }
}
