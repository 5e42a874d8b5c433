//! Orchestration of the full loop: baseline CNN, bootstrap ensemble,
//! virtual-sample selection, retraining and evaluation, optionally repeated
//! over several rounds.

mod config;
mod eval;
mod run;

pub use config::{DataSource, PipelineConfig};
pub use eval::{
    confusion_matrix, metrics_from_confusion, pool_accuracy, selection_precision, summary_csv,
    EvalReport, SUMMARY_CSV_HEADER,
};
pub use run::{
    apply_selection, bench_table, benchmark_parallel, bootstrap_config, bootstrap_stage,
    initial_state, load_data, model_path, parse_selected, parse_truth_csv, predictions_path,
    report_path, retrain_stage, run_baseline, run_pipeline, run_round, select_stage,
    selection_path, state_for_round, summary_path, truth_csv, write_synthetic, BenchRow,
    PipelineData, RoundOutcome, RoundState, TRUTH_CSV_HEADER,
};
