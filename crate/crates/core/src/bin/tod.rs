use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tod_core::analysis::{self, Reference};
use tod_core::harness::output;
use tod_core::harness::{
    evaluate_bound, run_experiment, standard_comparison, sweep_gamma, BoundSettings,
    ExperimentSpec, GammaMode, PolicyKind,
};
use tod_core::Error;

/// Delay-aware task offloading experiments.
#[derive(Parser)]
#[command(name = "tod", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy over every seed and write traces and a summary.
    Run(Common),
    /// Search the discount factor over a grid.
    SweepGamma {
        #[command(flatten)]
        common: Common,
        /// Comma-separated discount factors.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
    },
    /// Run the learner and the baselines on the same seeds.
    Compare(Common),
    /// Check measured suboptimal pulls against the analytic bound.
    Bound {
        #[command(flatten)]
        common: Common,
        /// Discounted feedback count after warm-up; defaults to the node count.
        #[arg(long)]
        n_k: Option<f64>,
    },
    /// Print the recommended discount factor.
    Gamma(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long, conflicts_with = "paper_defaults")]
    config: Option<PathBuf>,
    /// Use the reference setup (also the default without --config).
    #[arg(long)]
    paper_defaults: bool,
    /// Seed to run; repeat for several.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    policy: Option<String>,
    /// Fixed discount factor.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    breakpoints: Option<usize>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    tau_max: Option<u32>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
    /// Write every slot of per-slot series.
    #[arg(long)]
    full_resolution: bool,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec, Error> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::load(path)?,
            None => ExperimentSpec::paper_defaults(),
        };
        if !self.seeds.is_empty() {
            spec.run.seeds = self.seeds.clone();
        }
        if let Some(out) = &self.out {
            spec.run.output_dir = out.clone();
        }
        if let Some(name) = &self.policy {
            spec.policy.kind = PolicyKind::parse(name)?;
        }
        if let Some(value) = self.gamma {
            spec.policy.gamma = GammaMode::Fixed { value };
        }
        if let Some(xi) = self.xi {
            spec.policy.xi = xi;
        }
        if let Some(b) = self.breakpoints {
            spec.env.breakpoints = b;
        }
        if let Some(h) = self.horizon {
            spec.env.horizon = h;
        }
        if let Some(tau) = self.tau_max {
            spec.env.tau_max = tau;
        }
        if let Some(t) = self.threads {
            spec.run.threads = t;
        }
        if self.full_resolution {
            spec.run.downsample = 1;
        }
        Ok(spec)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(common) => {
            let spec = common.spec()?;
            let exp = run_experiment(&spec)?;
            output::write_experiment(&spec.run.output_dir, &exp)?;
            println!(
                "{}: gamma {} mean latency {:.4} regret(R) {:.4} regret(P) {:.4}",
                exp.label,
                exp.scheme.gamma().map_or("-".into(), |g| g.to_string()),
                exp.mean_latency(),
                exp.mean_final_regret(Reference::Realized),
                exp.mean_final_regret(Reference::Expected),
            );
        }
        Command::SweepGamma { common, grid } => {
            let mut spec = common.spec()?;
            spec.policy.gamma = GammaMode::Sweep { grid: grid.clone() };
            spec.validate()?;
            let sweep = sweep_gamma(
                &spec.env,
                spec.policy.xi,
                &grid,
                &spec.run.seeds,
                spec.run.threads,
            )?;
            output::write_sweep(&spec.run.output_dir.join("sweep.csv"), &sweep)?;
            for row in &sweep.rows {
                println!("gamma {} mean latency {:.4}", row.gamma, row.mean_latency);
            }
            println!("best gamma {}", sweep.best);
        }
        Command::Compare(common) => {
            let spec = common.spec()?;
            spec.validate()?;
            let experiments = standard_comparison(&spec)?;
            output::write_comparison(&spec.run.output_dir, &experiments, spec.run.downsample)?;
            for exp in &experiments {
                println!(
                    "{}: mean latency {:.4} regret(R) {:.4} regret(P) {:.4}",
                    exp.label,
                    exp.mean_latency(),
                    exp.mean_final_regret(Reference::Realized),
                    exp.mean_final_regret(Reference::Expected),
                );
            }
        }
        Command::Bound { common, n_k } => {
            let spec = common.spec()?;
            let gamma = match &spec.policy.gamma {
                GammaMode::Fixed { value } => *value,
                GammaMode::Auto => analysis::recommended_gamma(
                    spec.env.breakpoints,
                    spec.env.horizon,
                    spec.env.tau_max,
                )?,
                GammaMode::Sweep { .. } => {
                    return Err(Error::InvalidConfig(
                        "bound needs a fixed or automatic gamma".into(),
                    ))
                }
            };
            let settings = BoundSettings {
                gamma,
                xi: spec.policy.xi,
                n_k: n_k.unwrap_or(spec.env.nodes as f64),
            };
            let rows = evaluate_bound(&spec.env, settings, &spec.run.seeds, spec.run.threads)?;
            output::write_bound(&spec.run.output_dir.join("bound.csv"), &rows)?;
            println!("node  seeds  delta_mu  pulls  bound  holds");
            for r in &rows {
                let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
                println!(
                    "{:>4}  {:>5}  {}  {}  {}  {}",
                    r.node + 1,
                    r.seeds,
                    f(r.mean_delta_mu),
                    f(r.mean_pulls),
                    f(r.mean_bound),
                    r.holds().map_or("-", |h| if h { "yes" } else { "no" })
                );
            }
        }
        Command::Gamma(common) => {
            let spec = common.spec()?;
            let tau_max = spec.env.tau_max;
            let gamma =
                analysis::recommended_gamma(spec.env.breakpoints, spec.env.horizon, tau_max)?;
            println!("{gamma}");
            if !analysis::gamma_feasible(gamma, tau_max) {
                eprintln!("warning: {gamma} does not satisfy the bound's feasibility condition");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InfeasibleGamma { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
