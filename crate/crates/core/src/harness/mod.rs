//! Config-driven numerical experiments.
//!
//! Each experiment simulates one path per (σ, ε, replica) cell, with seed
//! `base_seed + replica`, and evaluates every estimator of interest on it.
//! Cells run in parallel on the rayon pool; records are sorted before they
//! are emitted, so output does not depend on the thread count. A failing
//! computation produces flagged rows instead of aborting the run.

mod config;
mod experiments;
mod output;

pub use config::{DtRule, ExperimentConfig, ExperimentKind, Grid, ModelSpec};
pub use experiments::{
    run, run_bayes_bistable, run_beta_sweep, run_multidim, run_subsample_compare, run_variance_study,
    run_with_threads, run_zeta_sweep, stride_for,
};
pub use output::{emit, write_csv, CellFailure, ExperimentResult, Metadata, Record, CSV_HEADER};
