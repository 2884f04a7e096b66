//! Experiment orchestration: configuration, runs over seeds, parameter
//! sweeps, fairness summaries, and CSV/JSON output.

mod config;
mod fairness;
mod io;
mod run;
mod sweep;

pub use config::{ExperimentConfig, Solver};
pub use fairness::{fairness_report, FairnessReport};
pub use io::{
    read_episode_log, read_header_lines, write_episode_log, write_genie_table, write_json, write_run,
    write_summary_json, write_training_curve, Header,
};
pub use run::{
    aggregate, evaluate_policy, run, run_seed, EpisodeLog, EpisodeRow, LearnedTables, RunOutput, SummaryMetrics,
    Training, THRESHOLD_FRACTION, THRESHOLD_WINDOW,
};
pub use sweep::{sweep_coverage_radius, sweep_sinr_threshold, write_sweep_csv, SweepRow};
