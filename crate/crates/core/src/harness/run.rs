use rayon::prelude::*;
use rayon::ThreadPool;

use super::config::{ExperimentSpec, GammaMode, PolicyKind};
use crate::analysis::{self, Reference, RunHistory};
use crate::baselines::{greedy_expected_select, greedy_select, round_robin_select, IirConfig, IirPolicy};
use crate::env::{EnvConfig, EnvState};
use crate::error::{Error, Result};
use crate::policy::{PolicyConfig, PolicyState};

/// Exploration shares tried for the IIR scheme when none is given.
pub const IIR_EXPLORE_GRID: [f64; 5] = [0.02, 0.05, 0.1, 0.2, 0.3];

/// A fully resolved policy for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Tod { gamma: f64, xi: f64 },
    Greedy,
    GreedyExpected,
    RoundRobin,
    Iir { gamma: f64, xi: f64, explore_fraction: f64 },
}

impl Scheme {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Scheme::Tod { .. } => PolicyKind::Tod,
            Scheme::Greedy => PolicyKind::Greedy,
            Scheme::GreedyExpected => PolicyKind::GreedyExpected,
            Scheme::RoundRobin => PolicyKind::RoundRobin,
            Scheme::Iir { .. } => PolicyKind::Iir,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            Scheme::Tod { gamma, .. } | Scheme::Iir { gamma, .. } => Some(gamma),
            _ => None,
        }
    }

    pub fn explore_fraction(&self) -> Option<f64> {
        match *self {
            Scheme::Iir { explore_fraction, .. } => Some(explore_fraction),
            _ => None,
        }
    }
}

enum Learner {
    Tod(PolicyState),
    Iir(IirPolicy),
    Oracle,
}

/// Simulates one full horizon of `env` under `scheme` with the given seed.
pub fn run_once(env: &EnvConfig, scheme: Scheme, seed: u64) -> Result<RunHistory> {
    let config = EnvConfig {
        seed,
        ..env.clone()
    };
    let nodes = config.nodes;
    let tau_max = config.tau_max;
    let horizon = config.horizon;
    let mut sim = EnvState::new(config)?;
    let mut learner = match scheme {
        Scheme::Tod { gamma, xi } => Learner::Tod(PolicyState::new(PolicyConfig {
            nodes,
            gamma,
            xi,
            tau_max,
        })?),
        Scheme::Iir {
            gamma,
            xi,
            explore_fraction,
        } => Learner::Iir(IirPolicy::new(
            IirConfig {
                gamma,
                explore_fraction,
                horizon,
            },
            nodes,
            xi,
            tau_max,
        )?),
        _ => Learner::Oracle,
    };

    let mut history = RunHistory::new(scheme.kind().name(), nodes, tau_max);
    history.records.reserve(horizon as usize);
    while !sim.is_finished() {
        let ctx = sim.observe()?;
        let chosen = match (&learner, scheme) {
            (Learner::Tod(state), _) => state.select_node(&ctx),
            (Learner::Iir(iir), _) => iir.select(&ctx),
            (Learner::Oracle, Scheme::Greedy) => {
                greedy_select(sim.realization().expect("observed"))
            }
            (Learner::Oracle, Scheme::GreedyExpected) => {
                greedy_expected_select(&sim.expected_latencies().expect("observed"))
            }
            (Learner::Oracle, _) => round_robin_select(ctx.task_id, nodes),
        };
        let out = sim.step(chosen)?;
        match &mut learner {
            Learner::Tod(state) => state.advance_slot(&out.completions, chosen)?,
            Learner::Iir(iir) => iir.advance_slot(&out.completions, chosen)?,
            Learner::Oracle => {}
        }
        history.records.push(out.into());
    }
    Ok(history)
}

pub(crate) fn thread_pool(threads: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker threads: {e}")))
}

/// Runs every `(scheme, seed)` job, preserving job order in the output.
pub(crate) fn run_jobs(env: &EnvConfig, jobs: &[(Scheme, u64)], threads: usize) -> Result<Vec<RunHistory>> {
    thread_pool(threads)?.install(|| {
        jobs.par_iter()
            .map(|&(scheme, seed)| run_once(env, scheme, seed))
            .collect()
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Final average regret of a run.
pub fn final_regret(history: &RunHistory, reference: Reference) -> f64 {
    analysis::pseudo_regret(history, reference)
        .last()
        .copied()
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub mean_latency: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// One row per distinct grid value, ascending.
    pub rows: Vec<SweepRow>,
    pub best: f64,
}

/// Mean realized latency of the learner for every discount factor in
/// `grid`; the best one has the lowest mean, ties to the smaller value.
pub fn sweep_gamma(
    env: &EnvConfig,
    xi: f64,
    grid: &[f64],
    seeds: &[u64],
    threads: usize,
) -> Result<Sweep> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("gamma grid is empty".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let jobs: Vec<(Scheme, u64)> = grid
        .iter()
        .flat_map(|&gamma| seeds.iter().map(move |&s| (Scheme::Tod { gamma, xi }, s)))
        .collect();
    let histories = run_jobs(env, &jobs, threads)?;
    let rows: Vec<SweepRow> = grid
        .iter()
        .zip(histories.chunks(seeds.len()))
        .map(|(&gamma, runs)| SweepRow {
            gamma,
            mean_latency: mean(runs.iter().map(RunHistory::mean_latency)),
            seeds: seeds.len(),
        })
        .collect();
    let best = rows
        .iter()
        .fold(None::<&SweepRow>, |acc, r| match acc {
            Some(b) if b.mean_latency <= r.mean_latency => Some(b),
            _ => Some(r),
        })
        .expect("grid is non-empty")
        .gamma;
    Ok(Sweep { rows, best })
}

/// Exploration share of the IIR scheme with the lowest mean final regret
/// against the realized optimum. Returns the share and `(share, regret)` for
/// every candidate.
pub fn search_explore_fraction(
    env: &EnvConfig,
    gamma: f64,
    xi: f64,
    grid: &[f64],
    seeds: &[u64],
    threads: usize,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let jobs: Vec<(Scheme, u64)> = grid
        .iter()
        .flat_map(|&explore_fraction| {
            seeds.iter().map(move |&s| {
                (
                    Scheme::Iir {
                        gamma,
                        xi,
                        explore_fraction,
                    },
                    s,
                )
            })
        })
        .collect();
    let histories = run_jobs(env, &jobs, threads)?;
    let table: Vec<(f64, f64)> = grid
        .iter()
        .zip(histories.chunks(seeds.len()))
        .map(|(&rho, runs)| (rho, mean(runs.iter().map(|h| final_regret(h, Reference::Realized)))))
        .collect();
    let best = table
        .iter()
        .fold(None::<(f64, f64)>, |acc, &(rho, r)| match acc {
            Some((b, br)) if br <= r => Some((b, br)),
            _ => Some((rho, r)),
        })
        .ok_or_else(|| Error::InvalidConfig("explore grid is empty".into()))?
        .0;
    Ok((best, table))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub history: RunHistory,
}

/// Everything produced by one experiment spec.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub label: String,
    pub scheme: Scheme,
    pub runs: Vec<SeedRun>,
    pub sweep: Option<Sweep>,
    pub explore_search: Option<Vec<(f64, f64)>>,
}

impl Experiment {
    pub fn mean_latency(&self) -> f64 {
        mean(self.runs.iter().map(|r| r.history.mean_latency()))
    }

    pub fn mean_final_regret(&self, reference: Reference) -> f64 {
        mean(self.runs.iter().map(|r| final_regret(&r.history, reference)))
    }

    pub fn histories(&self) -> impl Iterator<Item = &RunHistory> {
        self.runs.iter().map(|r| &r.history)
    }
}

/// Resolves the discount factor of a learning policy without running
/// anything. `None` for sweep mode.
pub fn direct_gamma(spec: &ExperimentSpec) -> Result<Option<f64>> {
    match &spec.policy.gamma {
        GammaMode::Fixed { value } => Ok(Some(*value)),
        GammaMode::Auto => analysis::recommended_gamma(
            spec.env.breakpoints,
            spec.env.horizon,
            spec.env.tau_max,
        )
        .map(Some)
        .map_err(|e| Error::InvalidConfig(format!("automatic gamma unavailable: {e}"))),
        GammaMode::Sweep { .. } => Ok(None),
    }
}

/// Runs `spec` over all of its seeds, first resolving the discount factor
/// and the IIR exploration share when they are searched.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Experiment> {
    spec.validate()?;
    let env = &spec.env;
    let seeds = &spec.run.seeds;
    let threads = spec.run.threads;
    let xi = spec.policy.xi;
    let kind = spec.policy.kind;

    let mut sweep = None;
    let gamma = if kind.learns() {
        match direct_gamma(spec)? {
            Some(g) => g,
            None => {
                let GammaMode::Sweep { grid } = &spec.policy.gamma else {
                    unreachable!("direct_gamma resolves every other mode")
                };
                let s = sweep_gamma(env, xi, grid, seeds, threads)?;
                let best = s.best;
                sweep = Some(s);
                best
            }
        }
    } else {
        f64::NAN
    };

    let mut explore_search = None;
    let scheme = match kind {
        PolicyKind::Tod => Scheme::Tod { gamma, xi },
        PolicyKind::Greedy => Scheme::Greedy,
        PolicyKind::GreedyExpected => Scheme::GreedyExpected,
        PolicyKind::RoundRobin => Scheme::RoundRobin,
        PolicyKind::Iir => {
            let explore_fraction = match spec.policy.explore_fraction {
                Some(rho) => rho,
                None => {
                    let (best, table) = search_explore_fraction(
                        env,
                        gamma,
                        xi,
                        &IIR_EXPLORE_GRID,
                        seeds,
                        threads,
                    )?;
                    explore_search = Some(table);
                    best
                }
            };
            Scheme::Iir {
                gamma,
                xi,
                explore_fraction,
            }
        }
    };

    let jobs: Vec<(Scheme, u64)> = seeds.iter().map(|&s| (scheme, s)).collect();
    let runs = run_jobs(env, &jobs, threads)?
        .into_iter()
        .zip(seeds)
        .map(|(history, &seed)| SeedRun { seed, history })
        .collect();
    Ok(Experiment {
        label: kind.name().to_string(),
        scheme,
        runs,
        sweep,
        explore_search,
    })
}

/// Runs several experiments that must share the environment and seeds.
pub fn compare(specs: &[ExperimentSpec]) -> Result<Vec<Experiment>> {
    let Some(first) = specs.first() else {
        return Ok(Vec::new());
    };
    for spec in &specs[1..] {
        let mut env = spec.env.clone();
        env.seed = first.env.seed;
        if env != first.env {
            return Err(Error::MismatchedConfig(format!(
                "{} and {} use different environments",
                first.policy.kind.name(),
                spec.policy.kind.name()
            )));
        }
        if spec.run.seeds != first.run.seeds {
            return Err(Error::MismatchedConfig(format!(
                "{} and {} use different seeds",
                first.policy.kind.name(),
                spec.policy.kind.name()
            )));
        }
    }
    specs.iter().map(run_experiment).collect()
}

/// The learner from `base`, then greedy, round-robin and IIR on the same
/// environment and seeds. IIR reuses the learner's discount factor.
pub fn standard_comparison(base: &ExperimentSpec) -> Result<Vec<Experiment>> {
    let with_kind = |kind: PolicyKind| {
        let mut spec = base.clone();
        spec.policy.kind = kind;
        spec
    };
    let tod = run_experiment(&with_kind(PolicyKind::Tod))?;
    let gamma = tod.scheme.gamma().expect("learner has a discount factor");
    let mut iir = with_kind(PolicyKind::Iir);
    iir.policy.gamma = GammaMode::Fixed { value: gamma };
    let mut rest = compare(&[
        with_kind(PolicyKind::Greedy),
        with_kind(PolicyKind::RoundRobin),
        iir,
    ])?;
    rest.insert(0, tod);
    Ok(rest)
}
