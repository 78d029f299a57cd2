//! Experiment harness: config loading, training sweeps, paired strategy
//! comparison and their CSV/SVG outputs.

mod config;
pub mod plot;
mod runner;

pub use config::{
    load_config, validate_config, EnvironmentSection, EvaluationSection, ExperimentConfig,
    TrainSection,
};
pub use runner::{
    checkpoint_name, compare, convergence_csv_name, ema, evaluate_episode, load_agent, mean_std,
    run_compare, run_train, summarize, write_convergence_csv, ComparisonReport, ConvergenceRun,
    EpisodeRecord, StrategySummary, EMA_FACTOR,
};
