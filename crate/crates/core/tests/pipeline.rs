//! Library-level runs through the experiment commands.

use std::fs;

use goldiprox::data::{encode_idx_images, encode_idx_labels};
use goldiprox::experiment::{cmd_compose, cmd_replay, cmd_run, ExperimentConfig, SEQUENCE_FILE};
use goldiprox::{sequence, AcquisitionKind, Error};

/// Four 4x4 glyphs (one bright quadrant per class) with a little pixel jitter.
fn write_idx(dir: &std::path::Path, n: usize) {
    let mut pixels = Vec::with_capacity(n * 16);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 4;
        labels.push(class as u8);
        for p in 0..16 {
            let (r, c) = (p / 4, p % 4);
            let quadrant = (r / 2) * 2 + c / 2;
            let base: u8 = if quadrant == class { 200 } else { 30 };
            pixels.push(base + ((i * 7 + p * 13) % 40) as u8);
        }
    }
    fs::write(dir.join("images.idx"), encode_idx_images(4, 4, &pixels)).unwrap();
    fs::write(dir.join("labels.idx"), encode_idx_labels(&labels)).unwrap();
}

fn idx_config(kind: &str) -> String {
    format!(
        r#"
seed = 2

[dataset]
splits = [240, 80, 80]

[dataset.idx]
images = "images.idx"
labels = "labels.idx"
num_classes = 4

[corruption]
label_noise_rate = 0.2

[irreducible]
hidden_dims = [16]

[model]
hidden_dims = [16]

[selection]
kind = "{kind}"
large_batch_size = 40
batch_size = 8
total_steps = 150
eval_every = 50

[output]
charts = false
"#
    )
}

#[test]
fn idx_dataset_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    write_idx(dir.path(), 400);
    let cfg = ExperimentConfig::from_toml(&idx_config("reducible"), dir.path()).unwrap();
    let out = dir.path().join("out");
    let run = cmd_run(&cfg, &out).unwrap();
    assert!(
        run.result.final_accuracy().unwrap() > 0.9,
        "{:?}",
        run.result.rows
    );
    // The irreducible model learns from clean holdout labels, so reducible
    // selection should pass over most of the 20% corrupted points.
    assert!(
        run.result.mean_corrupted_after(50) < 0.2,
        "{}",
        run.result.mean_corrupted_after(50)
    );

    let seq = sequence::read(out.join(SEQUENCE_FILE)).unwrap();
    assert_eq!(seq.header().kind, AcquisitionKind::Reducible);
    assert_eq!(seq.len(), 150);

    let rows = cmd_compose(&out.join(SEQUENCE_FILE), &cfg, &dir.path().join("comp.csv")).unwrap();
    assert_eq!(rows.len(), 150);
    let total: f64 = rows.iter().map(|r| r.corrupted_frac).sum();
    let from_run: f64 = run.result.steps.iter().map(|s| s.corrupted_frac).sum();
    assert!((total - from_run).abs() < 1e-9);
}

#[test]
fn replay_rejects_a_sequence_from_another_run() {
    let dir = tempfile::tempdir().unwrap();
    write_idx(dir.path(), 400);
    let reducible = ExperimentConfig::from_toml(&idx_config("reducible"), dir.path()).unwrap();
    let uniform = ExperimentConfig::from_toml(&idx_config("uniform"), dir.path()).unwrap();
    let out = dir.path().join("rec");
    cmd_run(&uniform, &out).unwrap();
    let err = cmd_replay(
        &reducible,
        &out.join(SEQUENCE_FILE),
        &dir.path().join("rep"),
    )
    .unwrap_err();
    assert!(matches!(err, Error::SequenceMismatch(_)), "{err}");

    let mut other_sizes = uniform.clone();
    other_sizes.selection.large_batch_size = 80;
    let err = cmd_replay(
        &other_sizes,
        &out.join(SEQUENCE_FILE),
        &dir.path().join("rep"),
    )
    .unwrap_err();
    assert!(matches!(err, Error::SequenceMismatch(_)), "{err}");

    let rep = cmd_replay(&uniform, &out.join(SEQUENCE_FILE), &dir.path().join("rep")).unwrap();
    assert_eq!(rep.result.consumed.len(), 150 * 8);
}

#[test]
fn missing_idx_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = ExperimentConfig::from_toml(&idx_config("uniform"), dir.path()).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}
