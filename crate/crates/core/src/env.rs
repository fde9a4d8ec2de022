//! Discrete-time fog network simulator.
//!
//! One task is generated per slot. At the start of a slot every node
//! broadcasts its queue length, and the per-KB waiting and processing delays
//! of the task are drawn for all nodes before the decision is read, so the
//! draw never depends on the choice. The chosen node's latency decides when
//! its feedback comes back; tasks over `tau_max` time out.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{normalize_feedback, CompletedFeedback, FeedbackStatus, TaskContext};
use crate::rng::{self, Stream};

/// Background load and service model of the node queues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueParams {
    /// Probability that a node receives a background job in a slot.
    pub background_prob: f64,
    /// Size range of a background job, KB.
    pub background_size: (f64, f64),
    /// Node `i` drains `service_coeff * cpu_i` KB per slot.
    pub service_coeff: f64,
}

impl Default for QueueParams {
    fn default() -> Self {
        Self {
            background_prob: 0.1,
            background_size: (1.0, 3.0),
            service_coeff: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub nodes: usize,
    pub horizon: u64,
    /// Wall time of one slot. Metadata only.
    pub slot_ms: f64,
    /// Task length range, KB.
    pub length_range: (f64, f64),
    /// Task complexity range.
    pub cplx_range: (f64, f64),
    /// Initial CPU capability range.
    pub cpu_range: (f64, f64),
    /// Transmission cost range for helper nodes, slots/KB.
    pub tx_range: (f64, f64),
    /// Number of breakpoints over the horizon.
    pub breakpoints: usize,
    /// CPU capability is multiplied or divided by this at a breakpoint.
    pub breakpoint_factor: f64,
    pub queue: QueueParams,
    pub tau_max: u32,
    /// What the task node learns from a task that exceeds `tau_max`.
    pub timeout_feedback: TimeoutFeedback,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::paper_defaults()
    }
}

impl EnvConfig {
    /// 1 task node and 9 helpers, 10^4 slots of 20 ms, Unif(1,15) KB tasks,
    /// Unif(1,10) complexity and CPU capability, tau_max = 20, 150
    /// breakpoints with factor 16.
    pub fn paper_defaults() -> Self {
        Self {
            nodes: 10,
            horizon: 10_000,
            slot_ms: 20.0,
            length_range: (1.0, 15.0),
            cplx_range: (1.0, 10.0),
            cpu_range: (1.0, 10.0),
            tx_range: (0.01, 0.06),
            breakpoints: 150,
            breakpoint_factor: 16.0,
            queue: QueueParams::default(),
            tau_max: 20,
            timeout_feedback: TimeoutFeedback::Cap,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.nodes < 2 {
            return bad(format!("need at least 2 nodes, got {}", self.nodes));
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if self.tau_max == 0 {
            return bad("tau_max must be at least 1".into());
        }
        for (name, (lo, hi), min) in [
            ("length_range", self.length_range, f64::MIN_POSITIVE),
            ("cplx_range", self.cplx_range, f64::MIN_POSITIVE),
            ("cpu_range", self.cpu_range, f64::MIN_POSITIVE),
            ("tx_range", self.tx_range, 0.0),
            ("queue.background_size", self.queue.background_size, 0.0),
        ] {
            if !(lo >= min && hi >= lo && hi.is_finite()) {
                return bad(format!("{name} = ({lo}, {hi}) is not a valid range"));
            }
        }
        if self.length_range.1 * self.tx_range.1 > 1.0 {
            return bad(format!(
                "transmission of the longest task takes {} slots, more than one",
                self.length_range.1 * self.tx_range.1
            ));
        }
        if !(self.breakpoint_factor > 1.0) {
            return bad(format!(
                "breakpoint_factor must exceed 1, got {}",
                self.breakpoint_factor
            ));
        }
        let room = self.horizon.saturating_sub(self.nodes as u64);
        if self.breakpoints as u64 > room {
            return bad(format!(
                "{} breakpoints do not fit in slots ({}, {}]",
                self.breakpoints, self.nodes, self.horizon
            ));
        }
        if !(0.0..=1.0).contains(&self.queue.background_prob) {
            return bad("queue.background_prob must lie in [0, 1]".into());
        }
        if !(self.queue.service_coeff >= 0.0) {
            return bad("queue.service_coeff must be non-negative".into());
        }
        Ok(())
    }

    fn cplx_mean(&self) -> f64 {
        0.5 * (self.cplx_range.0 + self.cplx_range.1)
    }
}

/// Feedback for a task that times out. It is delivered at the deadline
/// `s + tau_max` in every mode, so at most `tau_max` feedbacks per node are
/// ever outstanding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeoutFeedback {
    /// The latency cap, split evenly between waiting and processing.
    Cap,
    /// The per-KB delays the node measured for the task.
    Realized,
    /// Nothing is learned.
    Drop,
}

/// Ground truth of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTruth {
    pub index: usize,
    pub cpu: f64,
    /// Transmission cost, slots/KB. Zero for the local node.
    pub tx: f64,
    pub queue_kb: f64,
    /// Expected waiting delay per queued KB.
    pub mu_w: f64,
    /// Expected processing delay per task KB.
    pub mu_p: f64,
}

impl NodeTruth {
    fn refresh(&mut self, cplx_mean: f64) {
        self.mu_w = cplx_mean / self.cpu;
        self.mu_p = cplx_mean / self.cpu;
    }

    /// Expected latency of a task of `length` KB given the current queue.
    pub fn expected_latency(&self, length: f64) -> f64 {
        length * self.tx + self.queue_kb * self.mu_w + length * self.mu_p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    /// KB.
    pub length: f64,
    pub cplx: f64,
}

/// Delays of the current task on every node, drawn whichever node is used.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRealization {
    /// Waiting delay per queued KB.
    pub waiting: Vec<f64>,
    /// Processing delay per task KB.
    pub processing: Vec<f64>,
    /// Total latency, slots.
    pub latency: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Multiply,
    Divide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Breakpoint {
    /// The change is in effect from this slot on.
    pub slot: u64,
    pub node: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BreakpointSchedule {
    pub entries: Vec<Breakpoint>,
}

impl BreakpointSchedule {
    /// Draws `config.breakpoints` distinct slots in `(nodes, horizon]`, each
    /// hitting one uniformly chosen node. A node below the geometric midpoint
    /// of `cpu_range` speeds up, otherwise it slows down, so capabilities
    /// stay bounded.
    fn generate(config: &EnvConfig, initial_cpu: &[f64], rng: &mut ChaCha8Rng) -> Self {
        let first = config.nodes as u64 + 1;
        let span = (config.horizon + 1 - first) as usize;
        let mut slots: Vec<u64> = index::sample(rng, span, config.breakpoints)
            .into_iter()
            .map(|offset| first + offset as u64)
            .collect();
        slots.sort_unstable();

        let midpoint = (config.cpu_range.0 * config.cpu_range.1).sqrt();
        let mut cpu = initial_cpu.to_vec();
        let entries = slots
            .into_iter()
            .map(|slot| {
                let node = rng.random_range(0..config.nodes);
                let direction = if cpu[node] < midpoint {
                    cpu[node] *= config.breakpoint_factor;
                    Direction::Multiply
                } else {
                    cpu[node] /= config.breakpoint_factor;
                    Direction::Divide
                };
                Breakpoint {
                    slot,
                    node,
                    direction,
                }
            })
            .collect();
        Self { entries }
    }
}

/// Result of one simulated slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub slot: u64,
    pub chosen: usize,
    pub length: f64,
    /// Queues broadcast at slot start, KB.
    pub queues: Vec<f64>,
    pub realization: TaskRealization,
    /// Expected latency of the task on every node.
    pub expected_latency: Vec<f64>,
    /// Feedbacks received during this slot.
    pub completions: Vec<CompletedFeedback>,
    pub realized_latency: f64,
    pub opt_expected: usize,
    pub opt_realized: usize,
    pub success: bool,
}

#[derive(Debug, Clone)]
struct SlotDraw {
    task: Task,
    queues: Vec<f64>,
    realization: TaskRealization,
}

#[derive(Debug)]
pub struct EnvState {
    config: EnvConfig,
    t: u64,
    nodes: Vec<NodeTruth>,
    schedule: BreakpointSchedule,
    next_breakpoint: usize,
    fired: usize,
    task_rng: ChaCha8Rng,
    wait_rng: ChaCha8Rng,
    background_rng: ChaCha8Rng,
    in_flight: Vec<CompletedFeedback>,
    current: Option<SlotDraw>,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

impl EnvState {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let mut setup = rng::stream(config.seed, Stream::Setup);
        let cplx_mean = config.cplx_mean();
        let local = config.nodes - 1;
        let nodes: Vec<NodeTruth> = (0..config.nodes)
            .map(|index| {
                let cpu = uniform(&mut setup, config.cpu_range);
                let tx = uniform(&mut setup, config.tx_range);
                let mut node = NodeTruth {
                    index,
                    cpu,
                    tx: if index == local { 0.0 } else { tx },
                    queue_kb: 0.0,
                    mu_w: 0.0,
                    mu_p: 0.0,
                };
                node.refresh(cplx_mean);
                node
            })
            .collect();
        let cpus: Vec<f64> = nodes.iter().map(|n| n.cpu).collect();
        let schedule = BreakpointSchedule::generate(&config, &cpus, &mut setup);
        Ok(Self {
            task_rng: rng::stream(config.seed, Stream::Tasks),
            wait_rng: rng::stream(config.seed, Stream::Waiting),
            background_rng: rng::stream(config.seed, Stream::Background),
            config,
            t: 1,
            nodes,
            schedule,
            next_breakpoint: 0,
            fired: 0,
            in_flight: Vec::new(),
            current: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Current slot.
    pub fn slot(&self) -> u64 {
        self.t
    }

    pub fn nodes(&self) -> &[NodeTruth] {
        &self.nodes
    }

    pub fn schedule(&self) -> &BreakpointSchedule {
        &self.schedule
    }

    /// Breakpoints applied so far.
    pub fn fired_breakpoints(&self) -> usize {
        self.fired
    }

    /// Offloaded tasks whose feedback has not been delivered, per node.
    pub fn pending_per_node(&self) -> Vec<u32> {
        let mut counts = vec![0; self.config.nodes];
        for fb in &self.in_flight {
            counts[fb.node] += 1;
        }
        counts
    }

    pub fn is_finished(&self) -> bool {
        self.t > self.config.horizon
    }

    fn check_horizon(&self) -> Result<()> {
        if self.is_finished() {
            return Err(Error::HorizonExceeded {
                slot: self.t,
                horizon: self.config.horizon,
            });
        }
        Ok(())
    }

    /// Draws the length and complexity of the next task.
    pub fn generate_task(&mut self) -> Task {
        let length = uniform(&mut self.task_rng, self.config.length_range);
        let cplx = uniform(&mut self.task_rng, self.config.cplx_range);
        Task { length, cplx }
    }

    /// Draws the delays of `task` on every node against the current queues.
    pub fn realize_delays(&mut self, task: &Task) -> TaskRealization {
        let k = self.config.nodes;
        let mut realization = TaskRealization {
            waiting: Vec::with_capacity(k),
            processing: Vec::with_capacity(k),
            latency: Vec::with_capacity(k),
        };
        for node in &self.nodes {
            let w = uniform(&mut self.wait_rng, self.config.cplx_range) / node.cpu;
            let p = task.cplx / node.cpu;
            let u = task.length * node.tx + node.queue_kb * w + task.length * p;
            realization.waiting.push(w);
            realization.processing.push(p);
            realization.latency.push(u);
        }
        realization
    }

    /// Draws the current slot's task (once) and returns what the task node
    /// observes.
    pub fn observe(&mut self) -> Result<TaskContext> {
        self.check_horizon()?;
        if self.current.is_none() {
            let task = self.generate_task();
            let realization = self.realize_delays(&task);
            let queues = self.nodes.iter().map(|n| n.queue_kb).collect();
            self.current = Some(SlotDraw {
                task,
                queues,
                realization,
            });
        }
        let draw = self.current.as_ref().expect("drawn above");
        Ok(TaskContext {
            task_id: self.t,
            length: draw.task.length,
            tx_cost: self.nodes.iter().map(|n| n.tx).collect(),
            queue: draw.queues.clone(),
        })
    }

    /// Realization of the current slot, once observed. Oracle access.
    pub fn realization(&self) -> Option<&TaskRealization> {
        self.current.as_ref().map(|d| &d.realization)
    }

    /// Exact expected latency of a `length` KB task on `node` now. Oracle
    /// access for baselines and metrics.
    pub fn true_expected_latency(&self, length: f64, node: usize) -> f64 {
        self.nodes[node].expected_latency(length)
    }

    /// Expected latencies of the current task on all nodes, once observed.
    pub fn expected_latencies(&self) -> Option<Vec<f64>> {
        let length = self.current.as_ref()?.task.length;
        Some(
            (0..self.config.nodes)
                .map(|i| self.true_expected_latency(length, i))
                .collect(),
        )
    }

    pub fn apply_breakpoint(&mut self, node: usize, direction: Direction) {
        let factor = self.config.breakpoint_factor;
        let cplx_mean = self.config.cplx_mean();
        let truth = &mut self.nodes[node];
        match direction {
            Direction::Multiply => truth.cpu *= factor,
            Direction::Divide => truth.cpu /= factor,
        }
        truth.refresh(cplx_mean);
    }

    /// Offloads the current task to `chosen` and advances to the next slot.
    pub fn step(&mut self, chosen: usize) -> Result<SlotOutcome> {
        let k = self.config.nodes;
        if chosen >= k {
            return Err(Error::InvalidArgument(format!(
                "node {chosen} out of range for {k} nodes"
            )));
        }
        self.observe()?;
        let expected_latency = self.expected_latencies().expect("observed");
        let SlotDraw {
            task,
            queues,
            realization,
        } = self.current.take().expect("observed");
        let t = self.t;
        let tau_max = self.config.tau_max;

        let realized_latency = realization.latency[chosen];
        let success = realized_latency <= f64::from(tau_max);
        let queue_at_issue = queues[chosen];
        let feedback = if success {
            let (w_obs, p_obs) = normalize_feedback(
                queue_at_issue * realization.waiting[chosen],
                task.length * realization.processing[chosen],
                queue_at_issue,
                task.length,
            )?;
            CompletedFeedback {
                task_id: t,
                node: chosen,
                receipt_slot: t + realized_latency.ceil() as u64,
                w_obs,
                p_obs,
                status: FeedbackStatus::Completed,
            }
        } else {
            let cap = f64::from(tau_max);
            let (w_obs, p_obs, status) = match self.config.timeout_feedback {
                TimeoutFeedback::Cap if queue_at_issue > 0.0 => (
                    cap / (2.0 * queue_at_issue),
                    cap / (2.0 * task.length),
                    FeedbackStatus::Censored,
                ),
                TimeoutFeedback::Cap => (0.0, cap / task.length, FeedbackStatus::Censored),
                TimeoutFeedback::Realized => (
                    realization.waiting[chosen],
                    realization.processing[chosen],
                    FeedbackStatus::Censored,
                ),
                TimeoutFeedback::Drop => (0.0, 0.0, FeedbackStatus::Dropped),
            };
            CompletedFeedback {
                task_id: t,
                node: chosen,
                receipt_slot: t + u64::from(tau_max),
                w_obs,
                p_obs,
                status,
            }
        };
        self.in_flight.push(feedback);

        let queue = &self.config.queue;
        for (i, node) in self.nodes.iter_mut().enumerate() {
            // Both draws happen every slot to keep the stream aligned.
            let arrives = self.background_rng.random::<f64>() < queue.background_prob;
            let size = uniform(&mut self.background_rng, queue.background_size);
            let mut q = node.queue_kb - queue.service_coeff * node.cpu;
            if arrives {
                q += size;
            }
            if i == chosen {
                q += task.length;
            }
            node.queue_kb = q.max(0.0);
        }

        let next = t + 1;
        while let Some(bp) = self.schedule.entries.get(self.next_breakpoint).copied() {
            if bp.slot > next {
                break;
            }
            self.apply_breakpoint(bp.node, bp.direction);
            self.next_breakpoint += 1;
            self.fired += 1;
        }

        let mut completions = Vec::new();
        self.in_flight.retain(|fb| {
            if fb.receipt_slot <= next {
                completions.push(*fb);
                false
            } else {
                true
            }
        });
        completions.sort_by_key(|fb| fb.task_id);

        self.t = next;
        let opt_expected = crate::policy::argmin_lowest(expected_latency.iter().copied());
        let opt_realized = crate::policy::argmin_lowest(realization.latency.iter().copied());
        Ok(SlotOutcome {
            slot: t,
            chosen,
            length: task.length,
            queues,
            realization,
            expected_latency,
            completions,
            realized_latency,
            opt_expected,
            opt_realized,
            success,
        })
    }
}
