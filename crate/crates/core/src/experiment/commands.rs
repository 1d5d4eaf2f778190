use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::compose::{composition_csv, selection_composition, CompositionRow, COMPOSITION_WINDOW};
use super::output::{
    metric_charts, metrics_csv, parse_scores_csv, scores_csv, spearman_csv, write_text,
};
use super::spearman::per_step_spearman;
use super::ExperimentConfig;
use crate::data::DatasetBundle;
use crate::error::{Error, Result};
use crate::sequence::{self, Sequence};
use crate::trainer::{
    replay_sequence, run_selection_loop, train_irreducible_model, verify_schedule,
    IrreducibleReport, ScoreProbe, TrainRunResult,
};
use crate::IrreducibleLossTable;

pub const SEQUENCE_FILE: &str = "sequence.gpsq";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPLAY_METRICS_FILE: &str = "replay_metrics.csv";
pub const REPLAY_SCORES_FILE: &str = "replay_scores.csv";
pub const REPLAY_MANIFEST_FILE: &str = "replay_manifest.json";

/// Everything needed to re-run a command bit-identically, plus what it produced.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub library_version: &'static str,
    /// SHA-256 over `blob <len>\0<canonical config TOML>`.
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub dataset_fingerprint: String,
    pub irreducible: Option<IrreducibleSummary>,
    pub final_model_fingerprint: String,
    pub steps: usize,
    pub wall_clock_seconds: f64,
    /// Choices the method description leaves open, with the values used.
    pub defaults: BTreeMap<&'static str, Value>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IrreducibleSummary {
    pub epochs: usize,
    pub final_validation_loss: f64,
    pub model_fingerprint: String,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub sequence: Option<Sequence>,
    pub result: TrainRunResult,
    pub manifest: RunManifest,
}

pub fn hex64(v: u64) -> String {
    format!("{v:016x}")
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = cfg.to_toml();
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", text.len()).as_bytes());
    h.update(text.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn defaults_echo(cfg: &ExperimentConfig) -> BTreeMap<&'static str, Value> {
    let t = cfg.train_loop_config();
    let mut d = BTreeMap::new();
    d.insert("optimizer", serde_json::to_value(&cfg.optimizer).unwrap());
    d.insert(
        "optimizer.decay_applies_to",
        json!("weights only, not biases"),
    );
    d.insert(
        "init",
        json!("weights uniform in +-1/sqrt(fan_in), biases zero"),
    );
    d.insert(
        "dropout",
        json!("inverted, after every hidden ReLU, train mode only"),
    );
    d.insert(
        "selection.tie_break",
        json!("higher score first, then lower id"),
    );
    d.insert(
        "selection.epoch_tail",
        json!("a final chunk smaller than batch_size joins the previous large batch"),
    );
    d.insert("selection.eval_every", json!(t.eval_every));
    d.insert("selection.score_dump_every", json!(t.score_dump_every));
    d.insert(
        "selection.score_dump_points",
        json!("the whole large batch, before the gradient step"),
    );
    d.insert("bald.samples", json!(t.bald_samples));
    d.insert("bald.warmup_steps", json!(t.bald_warmup));
    d.insert("bald.warmup_selection", json!("uniform"));
    if let Some(irr) = &cfg.irreducible {
        d.insert("irreducible.max_epochs", json!(irr.max_epochs));
        d.insert("irreducible.patience", json!(irr.patience));
        d.insert("irreducible.tolerance", json!(irr.tolerance));
        d.insert("irreducible.batch_size", json!(irr.batch_size));
        d.insert(
            "irreducible.stopping_signal",
            json!("mean training loss on the validation split"),
        );
        d.insert(
            "irreducible.optimizer",
            serde_json::to_value(&irr.optimizer).unwrap(),
        );
    }
    d.insert(
        "corruption.validation_labels_noisy",
        json!(cfg.corruption.corrupt_validation),
    );
    d.insert(
        "corruption.validation_white_noise",
        json!(cfg.corruption.white_noise_validation),
    );
    d.insert(
        "corruption.white_noise_labels",
        json!("uniform over classes"),
    );
    d.insert(
        "metrics.fraction_window",
        json!("mean over the steps since the previous row"),
    );
    d
}

/// The sequence must come from the run `cfg` describes: same dataset, kind,
/// batch size and large-batch schedule.
pub fn check_recording(
    seq: &Sequence,
    cfg: &ExperimentConfig,
    bundle: &DatasetBundle,
) -> Result<()> {
    let h = seq.header();
    if h.dataset_fingerprint != bundle.fingerprint() {
        return Err(Error::FingerprintMismatch {
            expected: h.dataset_fingerprint,
            actual: bundle.fingerprint(),
        });
    }
    if h.kind != cfg.selection.kind {
        return Err(Error::SequenceMismatch(format!(
            "recorded with {} selection, config selects with {}",
            h.kind, cfg.selection.kind
        )));
    }
    if h.batch_size as usize != cfg.selection.batch_size {
        return Err(Error::SequenceMismatch(format!(
            "recorded batch size {}, config batch size {}",
            h.batch_size, cfg.selection.batch_size
        )));
    }
    verify_schedule(seq, bundle, cfg.selection.large_batch_size)
}

fn irreducible_phase(
    cfg: &ExperimentConfig,
    bundle: &DatasetBundle,
) -> Result<Option<(IrreducibleLossTable, IrreducibleReport)>> {
    match cfg.irreducible_model_config(bundle)? {
        Some(irr_cfg) => {
            let (_, table, report) = train_irreducible_model(&irr_cfg, bundle, cfg.seed)?;
            Ok(Some((table, report)))
        }
        None => Ok(None),
    }
}

fn summary(table: &IrreducibleLossTable, report: &IrreducibleReport) -> IrreducibleSummary {
    IrreducibleSummary {
        epochs: report.epochs,
        final_validation_loss: report.final_loss,
        model_fingerprint: hex64(table.source_model_fingerprint),
    }
}

fn write_outputs(
    out: &Path,
    prefix: &str,
    cfg: &ExperimentConfig,
    result: &TrainRunResult,
    manifest: &RunManifest,
) -> Result<()> {
    write_text(
        &out.join(format!("{prefix}{METRICS_FILE}")),
        &metrics_csv(&result.rows),
    )?;
    if !result.score_dumps.is_empty() {
        write_text(
            &out.join(format!("{prefix}{SCORES_FILE}")),
            &scores_csv(&result.score_dumps),
        )?;
    }
    if cfg.output.charts {
        let title = format!("{}{}", prefix, cfg.selection.kind);
        for (name, svg) in metric_charts(&result.rows, &title) {
            write_text(&out.join(format!("{prefix}{name}")), &svg)?;
        }
    }
    let json = serde_json::to_string_pretty(manifest).map_err(|e| Error::State(e.to_string()))?;
    write_text(
        &out.join(format!("{prefix}{MANIFEST_FILE}")),
        &(json + "\n"),
    )
}

/// Irreducible pretraining, then the selection loop; writes the sequence,
/// metrics, score dumps, charts and manifest under `out`.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let start = Instant::now();
    let bundle = cfg.build_dataset()?;
    let spec = cfg.model_spec(&bundle)?;
    let irr = irreducible_phase(cfg, &bundle)?;
    let loop_cfg = cfg.train_loop_config();
    let run = run_selection_loop(&loop_cfg, &spec, &bundle, irr.as_ref().map(|(t, _)| t))?;
    std::fs::create_dir_all(out)?;
    sequence::write(out.join(SEQUENCE_FILE), &run.sequence)?;
    let manifest = RunManifest {
        command: "run",
        library_version: env!("CARGO_PKG_VERSION"),
        config_hash: config_hash(cfg),
        config: cfg.clone(),
        seed: cfg.seed,
        dataset_fingerprint: hex64(bundle.fingerprint()),
        irreducible: irr.as_ref().map(|(t, r)| summary(t, r)),
        final_model_fingerprint: hex64(run.result.final_fingerprint),
        steps: run.sequence.len(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        defaults: defaults_echo(cfg),
    };
    write_outputs(out, "", cfg, &run.result, &manifest)?;
    Ok(RunSummary {
        out_dir: out.to_path_buf(),
        sequence: Some(run.sequence),
        result: run.result,
        manifest,
    })
}

/// Trains the replay model (`[replay]`, else `[model]`) on a sequence recorded
/// by `run` with the same config; anything else is rejected before training.
/// With an `[irreducible]` section, also scores the recorder's large batches
/// at its dump steps so the two score dumps can be rank-correlated.
pub fn cmd_replay(cfg: &ExperimentConfig, sequence_path: &Path, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let start = Instant::now();
    let seq = sequence::read(sequence_path)?;
    let bundle = cfg.build_dataset()?;
    check_recording(&seq, cfg, &bundle)?;
    let spec = cfg.replay_spec(&bundle)?;
    let irr = irreducible_phase(cfg, &bundle)?;
    let loop_cfg = cfg.train_loop_config();
    let probe = match &irr {
        Some((table, _)) if loop_cfg.score_dump_every > 0 => Some(ScoreProbe::from_schedule(
            table,
            &bundle,
            loop_cfg.large_batch_size,
            seq.header().batch_size as usize,
            seq.header().seed,
            seq.len() as u64,
            loop_cfg.score_dump_every,
        )?),
        _ => None,
    };
    let rep = replay_sequence(&loop_cfg, &bundle, &seq, &spec, probe.as_ref())?;
    std::fs::create_dir_all(out)?;
    let manifest = RunManifest {
        command: "replay",
        library_version: env!("CARGO_PKG_VERSION"),
        config_hash: config_hash(cfg),
        config: cfg.clone(),
        seed: cfg.seed,
        dataset_fingerprint: hex64(bundle.fingerprint()),
        irreducible: irr.as_ref().map(|(t, r)| summary(t, r)),
        final_model_fingerprint: hex64(rep.result.final_fingerprint),
        steps: seq.len(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        defaults: defaults_echo(cfg),
    };
    write_outputs(out, "replay_", cfg, &rep.result, &manifest)?;
    Ok(RunSummary {
        out_dir: out.to_path_buf(),
        sequence: None,
        result: rep.result,
        manifest,
    })
}

/// Per-step rank correlation of two score dumps, written as `step,rho`.
pub fn cmd_spearman(dump_a: &Path, dump_b: &Path, out: &Path) -> Result<Vec<(u64, f64)>> {
    let a = parse_scores_csv(&std::fs::read_to_string(dump_a)?)?;
    let b = parse_scores_csv(&std::fs::read_to_string(dump_b)?)?;
    let rows = per_step_spearman(&a, &b);
    if rows.is_empty() {
        return Err(Error::Input(
            "the dumps share no step with at least two (step, id) keys".into(),
        ));
    }
    write_text(out, &spearman_csv(&rows))?;
    Ok(rows)
}

/// Corrupted and white-noise fractions of every recorded batch.
pub fn cmd_compose(
    sequence_path: &Path,
    cfg: &ExperimentConfig,
    out: &Path,
) -> Result<Vec<CompositionRow>> {
    let seq = sequence::read(sequence_path)?;
    let bundle = cfg.build_dataset()?;
    if seq.header().dataset_fingerprint != bundle.fingerprint() {
        return Err(Error::FingerprintMismatch {
            expected: seq.header().dataset_fingerprint,
            actual: bundle.fingerprint(),
        });
    }
    let rows = selection_composition(&bundle, seq.batches(), COMPOSITION_WINDOW)?;
    write_text(out, &composition_csv(&rows))?;
    Ok(rows)
}
