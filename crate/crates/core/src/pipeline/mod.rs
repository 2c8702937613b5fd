//! Experiment driver: per slice, retrain the cloud model, compress or
//! delta-compress its table, ship the frame, apply it on a simulated device
//! and evaluate both sides.

mod config;
mod report;
mod run;

pub use config::{parse_delimiter, DataSource, ExperimentConfig, RatioMode};
pub use report::{
    accuracy_vs_bytes, accuracy_vs_ratio, cmd_report, discover_runs, load_runs, read_run, records_to_csv, reports_to_csv,
    reports_to_json, side_by_side, summary, write_reports, RoundReport, Run, REPORT_CSV, REPORT_JSON,
};
pub use run::{
    compress_model, load_data, simulate, simulate_with_cloud, synth_dataset, train_cloud, CloudRound, Compressed,
    Simulation, TrainRecord,
};
