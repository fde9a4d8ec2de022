//! Experiment orchestration: configs, seeded runs, parameter searches and
//! CSV output.

pub mod bound;
pub mod config;
pub mod output;
pub mod run;

pub use bound::{evaluate_bound, BoundSettings, NodeBound};
pub use config::{ExperimentSpec, GammaMode, PolicyKind, PolicySpec, RunSettings};
pub use run::{
    compare, run_experiment, run_once, search_explore_fraction, standard_comparison, sweep_gamma,
    Experiment, Scheme, SeedRun, Sweep, SweepRow,
};
