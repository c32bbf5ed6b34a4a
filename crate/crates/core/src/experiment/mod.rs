//! Experiment harness: metrics, noise sweeps over (noise level, split,
//! lambda), and CSV reports.

mod metrics;
mod report;
mod spec;
mod sweep;

pub use metrics::compute_metrics;
pub use report::{
    emit_cross_section_csv, emit_loss_history_csv, emit_results_csv, emit_summary_csv,
    parse_results_csv, write_results_csv, write_summary_csv, RESULTS_HEADER, SUMMARY_HEADER,
};
pub use spec::{DatasetSource, ExperimentSpec, Method, Selection};
pub use sweep::{
    derive_seed, predict_method, run_noise_sweep, run_noise_sweep_on, split_dataset, summarize, train_method,
    Dataset, MetricsRecord, SummaryRecord, SweepResult,
};
