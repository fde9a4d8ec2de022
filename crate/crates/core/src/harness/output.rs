//! CSV emission. Node indices are written 1-based, so node `K` is the local
//! task node. Floats use the shortest round-trip representation, which keeps
//! the files byte-identical for identical runs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::bound::NodeBound;
use super::run::{Experiment, Sweep};
use crate::analysis::{self, Reference, RunHistory};
use crate::error::Result;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Slots kept when downsampling a per-slot series: every `every`-th slot and
/// the last one.
fn kept(len: usize, every: u64) -> impl Iterator<Item = usize> {
    let every = every.max(1) as usize;
    (0..len).filter(move |&i| (i + 1) % every == 0 || i + 1 == len)
}

fn mean_series(histories: &[&RunHistory], f: impl Fn(&RunHistory) -> Vec<f64>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    for h in histories {
        let s = f(h);
        if acc.is_empty() {
            acc = s;
        } else {
            acc.iter_mut().zip(s).for_each(|(a, v)| *a += v);
        }
    }
    let n = histories.len().max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Latency grid of the CDF output: 0 to `tau_max` in half-slot steps.
pub fn cdf_grid(tau_max: u32) -> Vec<f64> {
    (0..=2 * tau_max).map(|i| f64::from(i) * 0.5).collect()
}

pub fn write_trace(path: &Path, history: &RunHistory) -> Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "t,policy,chosen,opt_expected,opt_realized,latency_slots,success,regret_r_cum,regret_p_cum"
    )?;
    let mut regret_r = 0.0;
    let mut regret_p = 0.0;
    for r in &history.records {
        regret_r += r.latency - r.realized[r.opt_realized];
        regret_p += r.latency - r.expected[r.opt_expected];
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            history.policy,
            r.chosen + 1,
            r.opt_expected + 1,
            r.opt_realized + 1,
            r.latency,
            u8::from(r.success),
            regret_r,
            regret_p
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Where the trace of `seed` goes: `trace.csv` for single-seed experiments,
/// `seed_<seed>/trace.csv` otherwise.
pub fn trace_path(dir: &Path, seed: u64, single: bool) -> PathBuf {
    if single {
        dir.join("trace.csv")
    } else {
        dir.join(format!("seed_{seed}")).join("trace.csv")
    }
}

pub fn write_summary(path: &Path, experiments: &[Experiment]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "policy,seed,gamma,explore_fraction,mean_latency,success_ratio,regret_r,regret_p"
    )?;
    for exp in experiments {
        for run in &exp.runs {
            let h = &run.history;
            let success = analysis::success_ratio(h, h.tau_max).last().copied().unwrap_or(0.0);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                exp.label,
                run.seed,
                opt(exp.scheme.gamma()),
                opt(exp.scheme.explore_fraction()),
                h.mean_latency(),
                success,
                super::run::final_regret(h, Reference::Realized),
                super::run::final_regret(h, Reference::Expected),
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Traces of every seed plus `summary.csv`.
pub fn write_experiment(dir: &Path, exp: &Experiment) -> Result<()> {
    let single = exp.runs.len() == 1;
    for run in &exp.runs {
        write_trace(&trace_path(dir, run.seed, single), &run.history)?;
    }
    write_summary(&dir.join("summary.csv"), std::slice::from_ref(exp))?;
    if let Some(sweep) = &exp.sweep {
        write_sweep(&dir.join("sweep.csv"), sweep)?;
    }
    Ok(())
}

pub fn write_sweep(path: &Path, sweep: &Sweep) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "gamma,mean_latency,seeds")?;
    for row in &sweep.rows {
        writeln!(w, "{},{},{}", row.gamma, row.mean_latency, row.seeds)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bound(path: &Path, rows: &[NodeBound]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "node,seeds,delta_mu,suboptimal_pulls,bound,holds")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.node + 1,
            r.seeds,
            opt(r.mean_delta_mu),
            opt(r.mean_pulls),
            opt(r.mean_bound),
            r.holds().map(|h| u8::from(h).to_string()).unwrap_or_default()
        )?;
    }
    w.flush()?;
    Ok(())
}

/// `cdf.csv`, `success.csv`, `regret.csv` and `summary.csv` for a set of
/// experiments; per-slot values are means over seeds.
pub fn write_comparison(dir: &Path, experiments: &[Experiment], downsample: u64) -> Result<()> {
    let mut cdf = create(&dir.join("cdf.csv"))?;
    let mut success = create(&dir.join("success.csv"))?;
    let mut regret = create(&dir.join("regret.csv"))?;
    writeln!(cdf, "policy,latency_slots,fraction")?;
    writeln!(success, "policy,t,ratio")?;
    writeln!(regret, "policy,reference,t,zeta_hat")?;

    for exp in experiments {
        let histories: Vec<&RunHistory> = exp.histories().collect();
        let Some(first) = histories.first() else {
            continue;
        };
        let tau_max = first.tau_max;
        let grid = cdf_grid(tau_max);
        let fractions = mean_series(&histories, |h| analysis::latency_cdf(h, &grid));
        for (x, f) in grid.iter().zip(&fractions) {
            writeln!(cdf, "{},{},{}", exp.label, x, f)?;
        }

        let ratio = mean_series(&histories, |h| analysis::success_ratio(h, tau_max));
        for i in kept(ratio.len(), downsample) {
            writeln!(success, "{},{},{}", exp.label, i + 1, ratio[i])?;
        }

        for reference in [Reference::Realized, Reference::Expected] {
            let zeta = mean_series(&histories, |h| analysis::pseudo_regret(h, reference));
            for i in kept(zeta.len(), downsample) {
                writeln!(
                    regret,
                    "{},{},{},{}",
                    exp.label,
                    reference.label(),
                    i + 1,
                    zeta[i]
                )?;
            }
        }
    }
    cdf.flush()?;
    success.flush()?;
    regret.flush()?;
    write_summary(&dir.join("summary.csv"), experiments)
}
