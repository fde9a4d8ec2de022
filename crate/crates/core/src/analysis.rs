//! Metrics over run histories and the analytic bound on suboptimal pulls.

use crate::env::SlotOutcome;
use crate::error::{Error, Result};

/// One slot of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub t: u64,
    pub chosen: usize,
    /// Realized latency of the chosen node.
    pub latency: f64,
    pub success: bool,
    /// Expected latency of every node.
    pub expected: Vec<f64>,
    /// Realized latency of every node.
    pub realized: Vec<f64>,
    pub opt_expected: usize,
    pub opt_realized: usize,
}

impl From<SlotOutcome> for SlotRecord {
    fn from(out: SlotOutcome) -> Self {
        Self {
            t: out.slot,
            chosen: out.chosen,
            latency: out.realized_latency,
            success: out.success,
            expected: out.expected_latency,
            realized: out.realization.latency,
            opt_expected: out.opt_expected,
            opt_realized: out.opt_realized,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub policy: String,
    pub nodes: usize,
    pub tau_max: u32,
    pub records: Vec<SlotRecord>,
}

impl RunHistory {
    pub fn new(policy: impl Into<String>, nodes: usize, tau_max: u32) -> Self {
        Self {
            policy: policy.into(),
            nodes,
            tau_max,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn mean_latency(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().map(|r| r.latency).sum::<f64>() / self.records.len() as f64
    }
}

/// Which per-slot optimum the regret is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reference {
    /// Expected latency of the expected-optimal node.
    Expected,
    /// Realized latency of the realized-optimal node.
    Realized,
}

impl Reference {
    pub fn label(self) -> &'static str {
        match self {
            Reference::Expected => "P",
            Reference::Realized => "R",
        }
    }
}

/// Discount factor balancing the stationary and the changing regime:
/// `1 - sqrt(upsilon / horizon) / (4 tau_max)`.
pub fn recommended_gamma(upsilon: usize, horizon: u64, tau_max: u32) -> Result<f64> {
    if upsilon == 0 || upsilon as u64 > horizon {
        return Err(Error::InvalidArgument(format!(
            "breakpoint count must lie in (0, {horizon}], got {upsilon}"
        )));
    }
    if tau_max == 0 {
        return Err(Error::InvalidArgument("tau_max must be at least 1".into()));
    }
    let gamma = 1.0 - (upsilon as f64 / horizon as f64).sqrt() / (4.0 * f64::from(tau_max));
    if gamma <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "recommended gamma {gamma} is not positive"
        )));
    }
    Ok(gamma)
}

/// Left side of the feasibility condition,
/// `gamma^tau_max (1 - gamma^(1/(1-gamma))) / (1 - gamma)`.
pub fn feasibility_lhs(gamma: f64, tau_max: u32) -> f64 {
    let tau = f64::from(tau_max);
    gamma.powf(tau) * (1.0 - gamma.powf(1.0 / (1.0 - gamma))) / (1.0 - gamma)
}

/// Whether the suboptimal-pull bound holds for this discount factor.
pub fn gamma_feasible(gamma: f64, tau_max: u32) -> bool {
    gamma > 0.0 && gamma < 1.0 && feasibility_lhs(gamma, tau_max) > std::f64::consts::E
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub gamma: f64,
    pub xi: f64,
    pub tau_max: u32,
    pub horizon: u64,
    /// Number of breakpoints.
    pub upsilon: usize,
    /// Smallest expected-latency gap of the node, slots.
    pub delta_mu: f64,
    /// Total discounted feedback count at the end of warm-up.
    pub n_k: f64,
}

/// Bound on the expected number of suboptimal pulls of one node, with its
/// pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretBound {
    pub b: f64,
    /// `None` when there are no breakpoints and the term vanishes.
    pub c: Option<f64>,
    pub total: f64,
}

pub fn regret_bound(inputs: &BoundInputs) -> Result<RegretBound> {
    let BoundInputs {
        gamma,
        xi,
        tau_max,
        horizon,
        upsilon,
        delta_mu,
        n_k,
    } = *inputs;
    if !gamma_feasible(gamma, tau_max) {
        return Err(Error::InfeasibleGamma { gamma, tau_max });
    }
    if !(xi > 0.5) {
        return Err(Error::InvalidArgument(format!("xi must exceed 1/2, got {xi}")));
    }
    if !(delta_mu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "latency gap must be positive, got {delta_mu}"
        )));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }

    let tau = f64::from(tau_max);
    let t = horizon as f64;
    let one_minus = 1.0 - gamma;
    let gamma_tau = gamma.powf(tau);
    let horizon_mass = t * one_minus;

    let b = (-16.0 * tau * tau * xi * (gamma_tau * one_minus).ln() / (delta_mu * delta_mu) + tau)
        * (horizon_mass.ceil() / horizon_mass)
        * gamma.powf(-1.0 / one_minus)
        + 2.0 / gamma_tau * (gamma_tau / one_minus).ln();

    let c = if upsilon == 0 {
        None
    } else {
        if !(n_k > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "warm-up feedback count must exceed 1, got {n_k}"
            )));
        }
        Some((one_minus * xi * n_k.ln()).ln() / gamma.ln() + tau)
    };

    let total = 1.0 + horizon_mass * b + c.map_or(0.0, |c| upsilon as f64 * c) + 2.0 / one_minus;
    Ok(RegretBound { b, c, total })
}

/// Per node, the number of slots it was chosen while not expected-optimal.
pub fn count_suboptimal_pulls(history: &RunHistory) -> Vec<u64> {
    let mut counts = vec![0; history.nodes];
    for r in &history.records {
        if r.chosen != r.opt_expected {
            counts[r.chosen] += 1;
        }
    }
    counts
}

/// Running average of the excess latency over the per-slot optimum.
pub fn pseudo_regret(history: &RunHistory, reference: Reference) -> Vec<f64> {
    let mut total = 0.0;
    history
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let best = match reference {
                Reference::Expected => r.expected[r.opt_expected],
                Reference::Realized => r.realized[r.opt_realized],
            };
            total += r.latency - best;
            total / (i + 1) as f64
        })
        .collect()
}

/// Running fraction of tasks finished within `tau_max`.
pub fn success_ratio(history: &RunHistory, tau_max: u32) -> Vec<f64> {
    let cap = f64::from(tau_max);
    let mut ok = 0u64;
    history
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.latency <= cap {
                ok += 1;
            }
            ok as f64 / (i + 1) as f64
        })
        .collect()
}

/// Fraction of tasks with latency at most `x` for each `x` in `grid`. Failed
/// tasks never count.
pub fn latency_cdf(history: &RunHistory, grid: &[f64]) -> Vec<f64> {
    let n = history.records.len();
    if n == 0 {
        return vec![0.0; grid.len()];
    }
    let mut finished: Vec<f64> = history
        .records
        .iter()
        .filter(|r| r.success)
        .map(|r| r.latency)
        .collect();
    finished.sort_by(f64::total_cmp);
    grid.iter()
        .map(|&x| finished.partition_point(|&l| l <= x) as f64 / n as f64)
        .collect()
}

/// Per node, the smallest gap between its expected latency and the optimum
/// over the slots where it is not optimal. `None` for a node that is optimal
/// in every slot.
pub fn measure_delta_mu(history: &RunHistory) -> Vec<Option<f64>> {
    let mut gaps: Vec<Option<f64>> = vec![None; history.nodes];
    for r in &history.records {
        let best = r.expected[r.opt_expected];
        for (i, gap) in gaps.iter_mut().enumerate() {
            if i == r.opt_expected {
                continue;
            }
            let g = r.expected[i] - best;
            *gap = Some(gap.map_or(g, |cur| cur.min(g)));
        }
    }
    gaps
}
