//! Experiment configs, the CLI commands, and their file outputs.

mod commands;
mod compose;
mod config;
mod output;
mod spearman;

pub use commands::{
    check_recording, cmd_compose, cmd_replay, cmd_run, cmd_spearman, config_hash, hex64,
    IrreducibleSummary, RunManifest, RunSummary, MANIFEST_FILE, METRICS_FILE, REPLAY_MANIFEST_FILE,
    REPLAY_METRICS_FILE, REPLAY_SCORES_FILE, SCORES_FILE, SEQUENCE_FILE,
};
pub use compose::{composition_csv, selection_composition, CompositionRow, COMPOSITION_WINDOW};
pub use config::{
    build_dataset, DataSource, DatasetConfig, ExperimentConfig, IdxSource, IrreducibleSection,
    NetConfig, OutputSection, SelectionSection, SyntheticSource,
};
pub use output::{
    line_chart, metrics_csv, parse_scores_csv, scores_csv, spearman_csv, COMPOSITION_HEADER,
    METRICS_HEADER, SCORES_HEADER, SPEARMAN_HEADER,
};
pub use spearman::{average_ranks, per_step_spearman, spearman};
