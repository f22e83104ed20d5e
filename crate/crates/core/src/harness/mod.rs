//! Experiment driver: training runs with live detection, the oracle sweep
//! and offline commands over their artifacts.

mod commands;
mod config;
mod log;
mod oracle;
mod train;

pub use commands::{cmd_detect, cmd_report, compare_logs, render_report};
pub use config::{DataConfig, DataKind, DetectorSettings, MlpShorthand, ModelSource, RunConfig};
pub use log::{EpochRecord, LogLine, LogWriter, RunHeader, RunSummary, TrainRunLog};
pub use oracle::{oracle_candidate, oracle_sweep, write_oracle_csv, OracleEntry};
pub use train::{
    checkpoint_path, resume, train, write_plot_csv, Experiment, RunOutcome, CHECKPOINT_DIR,
    LOG_FILE, PLOT_FILE, SCHEDULE_FILE, TRACE_FILE,
};
