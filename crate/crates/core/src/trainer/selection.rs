use std::collections::HashMap;

use super::{
    composition, evaluate, gradient_step, RowWindow, ScoreRow, StepRecord, TrainLoopConfig,
    TrainRunResult,
};
use crate::acquisition::{
    score, score_bald, select_top_k, AcquisitionKind, IrreducibleLossTable, ScoreVector,
};
use crate::data::{DatasetBundle, EpochSchedule, ExampleRecord};
use crate::error::{Error, Result};
use crate::model::{init_params, ModelSpec, ModelState};
use crate::rng::{stream, Stream};
use crate::sequence::Sequence;

#[derive(Clone, Debug)]
pub struct SelectionRun {
    pub model: ModelState,
    pub sequence: Sequence,
    pub result: TrainRunResult,
}

pub(crate) fn check_spec(spec: &ModelSpec, bundle: &DatasetBundle) -> Result<()> {
    spec.validate()?;
    if spec.input_dim != bundle.input_dim() || spec.num_classes != bundle.num_classes() {
        return Err(Error::Shape(format!(
            "model expects {} inputs / {} classes, dataset has {} / {}",
            spec.input_dim,
            spec.num_classes,
            bundle.input_dim(),
            bundle.num_classes()
        )));
    }
    if bundle.test().is_empty() {
        return Err(Error::Input("the test split is empty".into()));
    }
    Ok(())
}

/// Online batch selection: each step draws a large batch from the epoch
/// schedule, scores it, trains on the top `batch_size` ids and records them.
pub fn run_selection_loop(
    cfg: &TrainLoopConfig,
    spec: &ModelSpec,
    bundle: &DatasetBundle,
    irr: Option<&IrreducibleLossTable>,
) -> Result<SelectionRun> {
    cfg.validate()?;
    check_spec(spec, bundle)?;
    if cfg.kind.needs_irreducible() {
        let table = irr.ok_or_else(|| {
            Error::Input(format!(
                "{} selection needs an irreducible loss table",
                cfg.kind
            ))
        })?;
        if let Some(id) = bundle
            .train_ids()
            .into_iter()
            .find(|&id| table.get(id).is_err())
        {
            return Err(Error::MissingIrreducible(id));
        }
    }
    if cfg.kind == AcquisitionKind::Bald && spec.dropout_rate <= 0.0 {
        return Err(Error::Input(
            "bald selection needs a model with dropout".into(),
        ));
    }
    let batch_size =
        u32::try_from(cfg.batch_size).map_err(|_| Error::Input("batch_size too large".into()))?;

    let mut model = init_params(spec, cfg.seed)?;
    let mut schedule = EpochSchedule::new(
        bundle.train_ids(),
        cfg.large_batch_size,
        cfg.batch_size,
        stream(cfg.seed, Stream::Schedule),
    )?;
    let mut uniform_rng = stream(cfg.seed, Stream::UniformScores);
    let mut bald_rng = stream(cfg.seed, Stream::Bald);
    let mut dropout_rng = stream(cfg.seed, Stream::Dropout);
    let mut sequence = Sequence::new(bundle.fingerprint(), batch_size, cfg.kind, cfg.seed)?;
    let mut result = TrainRunResult::default();
    let mut window = RowWindow::default();

    for step in 1..=cfg.total_steps {
        let large_ids = schedule.next_large_batch();
        let large = bundle.train_records(&large_ids)?;
        let scores = step_scores(
            cfg,
            &model,
            irr,
            &large,
            step,
            &mut uniform_rng,
            &mut bald_rng,
        )?;
        if cfg.score_dump_every > 0 && step % cfg.score_dump_every == 0 {
            result
                .score_dumps
                .extend(
                    scores
                        .ids
                        .iter()
                        .zip(&scores.scores)
                        .map(|(&id, &s)| ScoreRow {
                            step,
                            id,
                            kind: scores.kind,
                            score: s,
                        }),
                );
        }
        let chosen = select_top_k(&scores, cfg.batch_size)?;
        let selected = selected_scores(&scores, &chosen);
        let batch = bundle.train_records(&chosen)?;
        gradient_step(&mut model, &batch, &cfg.optimizer, &mut dropout_rng)?;

        let (corrupted_frac, whitenoise_frac) = composition(&batch);
        let record = StepRecord {
            step,
            corrupted_frac,
            whitenoise_frac,
            mean_score: selected.iter().sum::<f64>() / selected.len() as f64,
            max_score: selected.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        };
        window.push(&record);
        result.steps.push(record);
        result.consumed.extend_from_slice(&chosen);
        sequence.push(chosen)?;

        if step % cfg.eval_every == 0 || step == cfg.total_steps {
            let acc = evaluate(&model, bundle.test())?;
            result.rows.push(window.flush(step, acc));
        }
    }
    result.final_fingerprint = model.fingerprint();
    Ok(SelectionRun {
        model,
        sequence,
        result,
    })
}

fn selected_scores(scores: &ScoreVector, chosen: &[u32]) -> Vec<f64> {
    let by_id: HashMap<u32, f64> = scores
        .ids
        .iter()
        .copied()
        .zip(scores.scores.iter().copied())
        .collect();
    chosen.iter().map(|id| by_id[id]).collect()
}

fn step_scores(
    cfg: &TrainLoopConfig,
    model: &ModelState,
    irr: Option<&IrreducibleLossTable>,
    large: &[&ExampleRecord],
    step: u64,
    uniform_rng: &mut crate::rng::Rng,
    bald_rng: &mut crate::rng::Rng,
) -> Result<ScoreVector> {
    match cfg.kind {
        AcquisitionKind::Bald if step <= cfg.bald_warmup => {
            let s = score(
                AcquisitionKind::Uniform,
                model,
                None,
                large,
                step,
                uniform_rng,
            )?;
            // Warmup steps are still recorded under the run's kind.
            Ok(ScoreVector {
                kind: AcquisitionKind::Bald,
                ..s
            })
        }
        AcquisitionKind::Bald => score_bald(model, large, cfg.bald_samples, step, bald_rng),
        AcquisitionKind::Uniform => score(cfg.kind, model, irr, large, step, uniform_rng),
        kind => score(kind, model, irr, large, step, uniform_rng),
    }
}
