use std::collections::BTreeMap;

use super::selection::check_spec;
use super::{
    composition, evaluate, gradient_step, RowWindow, ScoreRow, StepRecord, TrainLoopConfig,
    TrainRunResult,
};
use crate::acquisition::{score, AcquisitionKind, IrreducibleLossTable};
use crate::data::{DatasetBundle, EpochSchedule};
use crate::error::{Error, Result};
use crate::model::{init_params, ModelSpec, ModelState};
use crate::rng::{stream, Stream};
use crate::sequence::Sequence;

/// Ids to score with the replaying model (reducible loss) just before the
/// gradient step of each listed step.
#[derive(Clone, Debug)]
pub struct ScoreProbe<'a> {
    pub irr: &'a IrreducibleLossTable,
    pub steps: BTreeMap<u64, Vec<u32>>,
}

impl<'a> ScoreProbe<'a> {
    /// Probes the large batches a selection run with these sizes and `seed`
    /// drew at every `every`-th step, i.e. the points it scored there.
    pub fn from_schedule(
        irr: &'a IrreducibleLossTable,
        bundle: &DatasetBundle,
        large_batch_size: usize,
        batch_size: usize,
        seed: u64,
        steps: u64,
        every: u64,
    ) -> Result<Self> {
        let mut schedule = EpochSchedule::new(
            bundle.train_ids(),
            large_batch_size,
            batch_size,
            stream(seed, Stream::Schedule),
        )?;
        let mut out = BTreeMap::new();
        for step in 1..=steps {
            let ids = schedule.next_large_batch();
            if every > 0 && step % every == 0 {
                out.insert(step, ids);
            }
        }
        Ok(ScoreProbe { irr, steps: out })
    }

    /// Probes the same (step, id) keys as an existing score dump.
    pub fn from_dump(irr: &'a IrreducibleLossTable, dump: &[ScoreRow]) -> Self {
        let mut steps: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        for row in dump {
            steps.entry(row.step).or_default().push(row.id);
        }
        ScoreProbe { irr, steps }
    }
}

/// Checks that every recorded batch lies inside the large batch that a
/// selection run with the header's seed and sizes drew at that step.
/// A recording whose seed, ids or sizes were altered fails here.
pub fn verify_schedule(
    sequence: &Sequence,
    bundle: &DatasetBundle,
    large_batch_size: usize,
) -> Result<()> {
    let header = sequence.header();
    let mut schedule = EpochSchedule::new(
        bundle.train_ids(),
        large_batch_size,
        header.batch_size as usize,
        stream(header.seed, Stream::Schedule),
    )?;
    for (i, batch) in sequence.batches().iter().enumerate() {
        let large = schedule.next_large_batch();
        if let Some(id) = batch.iter().find(|id| !large.contains(id)) {
            return Err(Error::SequenceMismatch(format!(
                "step {}: id {id} is not in the large batch drawn with seed {}",
                i + 1,
                header.seed
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ReplayRun {
    pub model: ModelState,
    pub result: TrainRunResult,
}

/// Trains a fresh model on the recorded batches, in order, with no scoring.
/// Uses `cfg.seed` for initialization and dropout, so replaying a run's own
/// sequence with its spec and seed reproduces its final weights.
pub fn replay_sequence(
    cfg: &TrainLoopConfig,
    bundle: &DatasetBundle,
    sequence: &Sequence,
    spec: &ModelSpec,
    probe: Option<&ScoreProbe<'_>>,
) -> Result<ReplayRun> {
    cfg.optimizer.validate()?;
    if cfg.eval_every == 0 {
        return Err(Error::Input("eval_every must be at least 1".into()));
    }
    check_spec(spec, bundle)?;
    let header = sequence.header();
    if header.dataset_fingerprint != bundle.fingerprint() {
        return Err(Error::FingerprintMismatch {
            expected: header.dataset_fingerprint,
            actual: bundle.fingerprint(),
        });
    }
    // Resolve every id before any training so a bad sequence fails fast.
    let batches = sequence
        .batches()
        .iter()
        .map(|b| bundle.train_records(b))
        .collect::<Result<Vec<_>>>()?;

    let mut model = init_params(spec, cfg.seed)?;
    let mut dropout_rng = stream(cfg.seed, Stream::Dropout);
    let mut unused_rng = stream(cfg.seed, Stream::UniformScores);
    let mut result = TrainRunResult::default();
    let mut window = RowWindow::default();
    let total = batches.len() as u64;

    for (i, batch) in batches.iter().enumerate() {
        let step = i as u64 + 1;
        if let Some(ids) = probe.and_then(|p| p.steps.get(&step).map(|ids| (p, ids))) {
            let (p, ids) = ids;
            let recs = bundle.train_records(ids)?;
            let s = score(
                AcquisitionKind::Reducible,
                &model,
                Some(p.irr),
                &recs,
                step,
                &mut unused_rng,
            )?;
            result
                .score_dumps
                .extend(s.ids.iter().zip(&s.scores).map(|(&id, &v)| ScoreRow {
                    step,
                    id,
                    kind: s.kind,
                    score: v,
                }));
        }
        gradient_step(&mut model, batch, &cfg.optimizer, &mut dropout_rng)?;
        let (corrupted_frac, whitenoise_frac) = composition(batch);
        let record = StepRecord {
            step,
            corrupted_frac,
            whitenoise_frac,
            mean_score: f64::NAN,
            max_score: f64::NAN,
        };
        window.push(&record);
        result.steps.push(record);
        result.consumed.extend(batch.iter().map(|r| r.id));
        if step % cfg.eval_every == 0 || step == total {
            let acc = evaluate(&model, bundle.test())?;
            result.rows.push(window.flush(step, acc));
        }
    }
    result.final_fingerprint = model.fingerprint();
    Ok(ReplayRun { model, result })
}
