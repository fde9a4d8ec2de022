//! Empirical check of the suboptimal-pull bound: run the learner, measure
//! each node's latency gap and count its suboptimal pulls.

use super::run::{run_jobs, Scheme};
use crate::analysis::{self, BoundInputs};
use crate::env::EnvConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSettings {
    pub gamma: f64,
    pub xi: f64,
    /// Discounted feedback count after warm-up; the node count when every
    /// warm-up feedback has arrived.
    pub n_k: f64,
}

/// Per-node result over a set of seeds. Only seeds where the node's gap is
/// defined and positive contribute.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeBound {
    /// 0-based node index.
    pub node: usize,
    pub seeds: usize,
    pub mean_delta_mu: Option<f64>,
    pub mean_pulls: Option<f64>,
    pub mean_bound: Option<f64>,
}

impl NodeBound {
    /// `None` when the node has no defined gap in any seed.
    pub fn holds(&self) -> Option<bool> {
        Some(self.mean_pulls? <= self.mean_bound?)
    }
}

pub fn evaluate_bound(
    env: &EnvConfig,
    settings: BoundSettings,
    seeds: &[u64],
    threads: usize,
) -> Result<Vec<NodeBound>> {
    if !analysis::gamma_feasible(settings.gamma, env.tau_max) {
        return Err(Error::InfeasibleGamma {
            gamma: settings.gamma,
            tau_max: env.tau_max,
        });
    }
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    env.validate()?;
    let scheme = Scheme::Tod {
        gamma: settings.gamma,
        xi: settings.xi,
    };
    let jobs: Vec<(Scheme, u64)> = seeds.iter().map(|&s| (scheme, s)).collect();
    let histories = run_jobs(env, &jobs, threads)?;

    let mut sums = vec![(0usize, 0.0, 0.0, 0.0); env.nodes];
    for h in &histories {
        let pulls = analysis::count_suboptimal_pulls(h);
        for (node, gap) in analysis::measure_delta_mu(h).into_iter().enumerate() {
            let Some(gap) = gap.filter(|&g| g > 0.0) else {
                continue;
            };
            let bound = analysis::regret_bound(&BoundInputs {
                gamma: settings.gamma,
                xi: settings.xi,
                tau_max: env.tau_max,
                horizon: env.horizon,
                upsilon: env.breakpoints,
                delta_mu: gap,
                n_k: settings.n_k,
            })?;
            let s = &mut sums[node];
            s.0 += 1;
            s.1 += gap;
            s.2 += pulls[node] as f64;
            s.3 += bound.total;
        }
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(node, (n, gap, pulls, bound))| {
            let avg = |x: f64| (n > 0).then(|| x / n as f64);
            NodeBound {
                node,
                seeds: n,
                mean_delta_mu: avg(gap),
                mean_pulls: avg(pulls),
                mean_bound: avg(bound),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infeasible_gamma_is_rejected_before_running() {
        let env = EnvConfig::paper_defaults();
        let err = evaluate_bound(
            &env,
            BoundSettings {
                gamma: 0.5,
                xi: 0.6,
                n_k: 10.0,
            },
            &[1],
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InfeasibleGamma { .. }));
    }

    #[test]
    fn short_stationary_run_respects_the_bound() {
        let env = EnvConfig {
            horizon: 2000,
            breakpoints: 0,
            ..EnvConfig::paper_defaults()
        };
        let rows = evaluate_bound(
            &env,
            BoundSettings {
                gamma: 0.999,
                xi: 0.6,
                n_k: 10.0,
            },
            &[1, 2],
            2,
        )
        .unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r.holds() != Some(false)));
    }
}
