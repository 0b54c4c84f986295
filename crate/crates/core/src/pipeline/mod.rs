//! Experiment orchestration: configuration, the four pipeline stages and
//! their on-disk artifacts.
//!
//! An output directory looks like this after a full run:
//!
//! ```text
//! config.toml                      verbatim copy of the config
//! manifest.json                    per-stage artifacts with SHA-256, timings
//! model/checkpoint.bin, vocab.txt
//! tune/traces/run_NN_seed_S.csv    step,eval_loss
//! tune/selected/prompt_RR.bin      top-k prompt snapshots, best first
//! tune/ranking.csv
//! evaluate/predictions_RR.csv      one file per selected prompt
//! report/gap_report.json, absent_cells.json, net_counts.csv, summary.json
//! report/charts/<attribute>_<metric>.svg
//! ```

mod config;
mod init;
mod manifest;
mod predictions;
mod stages;
pub mod svg;

pub use config::{
    derive_seed, ExperimentConfig, ModelSection, ReportSection, TaskSection, TemplateSection,
    TuningSection, PRETRAIN_STREAM, TUNE_STREAM,
};
pub use init::{example_config, init_example, InitOptions};
pub use manifest::{file_hash, Artifact, RunManifest, StageRecord, MANIFEST_FILE};
pub use predictions::{
    format_predictions, parse_predictions, read_predictions, PredictionRow, Source,
    PREDICTIONS_HEADER,
};
pub use stages::{
    cmd_evaluate, cmd_pretrain, cmd_report, cmd_tune, load_model, load_template_packs,
    PretrainOutcome, RankedRun, ReportOutcome, ReportSummary, TaskAccuracy, TuneOutcome,
    CHECKPOINT_PATH, EVALUATE_DIR, REPORT_DIR, TUNE_DIR, VOCAB_PATH,
};
