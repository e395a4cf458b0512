//! Cross-entropy training over candidate pairs with sampled negatives and
//! per-epoch ConceptDrop regularization.

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, EvalSplit};
use crate::error::{Error, Result};
use crate::evaluation::{auc, calibration_sweep, ScoreMatrix};
use crate::model::{ConceptPair, ModelParams, ParamGroup, TracedModel};
use crate::numeric::adam::{AdamConfig, AdamState};
use crate::numeric::tape::Tape;
use crate::numeric::tensor::{log_sum_exp_slice, Tensor};

/// How many negative candidates accompany each sample's true pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeCount {
    /// Use every eligible train pair.
    All,
    Count(usize),
}

impl NegativeCount {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(NegativeCount::All);
        }
        s.parse::<usize>()
            .map(NegativeCount::Count)
            .map_err(|_| Error::Config(format!("negatives must be 'all' or an integer, got '{s}'")))
    }

    pub fn to_string_value(self) -> String {
        match self {
            NegativeCount::All => "all".to_string(),
            NegativeCount::Count(k) => k.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr_feature: f64,
    pub lr_gating: f64,
    pub batch_size: usize,
    pub negatives: NegativeCount,
    pub concept_drop: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Keep the object/attribute lookup tables at their initial values
    /// (useful with pretrained vectors); by default they are fine-tuned.
    pub freeze_embeddings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_feature: 0.001,
            lr_gating: 0.01,
            batch_size: 256,
            negatives: NegativeCount::All,
            concept_drop: 0.05,
            epochs: 30,
            seed: 1,
            freeze_embeddings: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr_feature <= 0.0 || self.lr_gating <= 0.0 {
            return Err(Error::Config("learning rates must be positive".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".to_string()));
        }
        if let NegativeCount::Count(0) = self.negatives {
            return Err(Error::Config("negatives must be >= 1 or 'all'".to_string()));
        }
        if !(0.0..1.0).contains(&self.concept_drop) {
            return Err(Error::Config(format!(
                "concept drop fraction {} outside [0, 1)",
                self.concept_drop
            )));
        }
        Ok(())
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
    pub val_auc: f64,
    pub dropped: Vec<ConceptPair>,
    pub wall_secs: f64,
}

pub const EPOCH_LOG_HEADER: &str = "epoch\tloss\ttrain_acc\tval_auc";

impl EpochLog {
    /// The line-delimited record emitted to epoch logs. Wall time is kept out
    /// of the record so identical runs produce identical logs.
    pub fn record(&self) -> String {
        format!(
            "{}\t{:.16e}\t{:.16e}\t{:.16e}",
            self.epoch, self.mean_loss, self.train_accuracy, self.val_auc
        )
    }
}

/// Samples the per-epoch set of dropped train pairs:
/// `round(fraction * |train_pairs|)` pairs, uniformly without replacement.
pub fn concept_drop(
    train_pairs: &[ConceptPair],
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ConceptPair>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!(
            "concept drop fraction {fraction} outside [0, 1)"
        )));
    }
    let n = (fraction * train_pairs.len() as f64).round() as usize;
    let picks = rand::seq::index::sample(rng, train_pairs.len(), n);
    let mut out: Vec<ConceptPair> = picks.iter().map(|i| train_pairs[i]).collect();
    out.sort();
    Ok(out)
}

/// Uniform sample of negative candidates from the train pairs, excluding the
/// true pair and this epoch's dropped pairs.
pub fn sample_negatives(
    true_pair: ConceptPair,
    train_pairs: &[ConceptPair],
    dropped: &HashSet<ConceptPair>,
    k: NegativeCount,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ConceptPair>> {
    let pool: Vec<ConceptPair> = train_pairs
        .iter()
        .filter(|p| **p != true_pair && !dropped.contains(*p))
        .copied()
        .collect();
    match k {
        NegativeCount::All => Ok(pool),
        NegativeCount::Count(k) => {
            if k > pool.len() {
                return Err(Error::Config(format!(
                    "{k} negatives requested but only {} eligible pairs",
                    pool.len()
                )));
            }
            let picks = rand::seq::index::sample(rng, pool.len(), k);
            Ok(picks.iter().map(|i| pool[i]).collect())
        }
    }
}

/// Mean `-log p(true pair)` over the batch under a softmax across each
/// sample's candidate set. The true pair must appear exactly once per set.
pub fn cross_entropy_loss(
    params: &ModelParams,
    batch: &[(&Tensor, ConceptPair)],
    candidates: &[Vec<ConceptPair>],
) -> Result<f64> {
    if batch.is_empty() || batch.len() != candidates.len() {
        return Err(Error::Contract(
            "batch and candidate lists must be non-empty and aligned".to_string(),
        ));
    }
    let mut total = 0.0;
    for ((x, true_pair), cands) in batch.iter().zip(candidates) {
        let hits = cands.iter().filter(|c| **c == *true_pair).count();
        if hits != 1 {
            return Err(Error::Contract(format!(
                "true pair must appear exactly once among candidates, found {hits}"
            )));
        }
        let true_idx = cands.iter().position(|c| c == true_pair).unwrap();
        let scores: Vec<f64> = cands
            .iter()
            .map(|c| params.score(x, *c))
            .collect::<Result<_>>()?;
        total += log_sum_exp_slice(&scores) - scores[true_idx];
    }
    Ok(total * (1.0 / batch.len() as f64))
}

/// Outcome of [`fit`]: the checkpoint with the best validation top-1 area,
/// the final-epoch parameters, and per-epoch logs.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub best: ModelParams,
    pub final_params: ModelParams,
    pub best_epoch: Option<usize>,
    pub best_val_auc: f64,
    pub logs: Vec<EpochLog>,
}

/// Minibatch training: shuffled batches, per-sample negative sampling,
/// per-epoch ConceptDrop, separate Adam step sizes for the gating and
/// feature groups, and validation-area model selection after every epoch.
/// Deterministic given `cfg.seed`.
pub fn fit(params: ModelParams, dataset: &Dataset, cfg: &TrainConfig) -> Result<FitResult> {
    cfg.validate()?;
    if params.object_names() != dataset.vocab.objects()
        || params.attribute_names() != dataset.vocab.attributes()
    {
        return Err(Error::Contract(
            "model vocabulary does not match the dataset".to_string(),
        ));
    }
    if dataset.train.is_empty() {
        return Err(Error::Contract("dataset has no training samples".to_string()));
    }

    let mut params = params;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let train_pairs = &dataset.splits.train_pairs;
    // Per-block optimizer group; None marks blocks excluded from updates.
    let groups: Vec<Option<ParamGroup>> = params
        .blocks()
        .iter()
        .map(|(name, g, _)| {
            if cfg.freeze_embeddings && (name == "obj_embed" || name == "attr_embed") {
                None
            } else {
                Some(*g)
            }
        })
        .collect();

    let group_blocks = |want: ParamGroup, params: &ModelParams| -> Vec<Tensor> {
        params
            .blocks()
            .iter()
            .zip(&groups)
            .filter(|(_, g)| **g == Some(want))
            .map(|((_, _, t), _)| (*t).clone())
            .collect()
    };
    let gating_blocks = group_blocks(ParamGroup::Gating, &params);
    let feature_blocks = group_blocks(ParamGroup::Feature, &params);
    let mut adam_gating = AdamState::new(
        AdamConfig::new(cfg.lr_gating),
        &gating_blocks.iter().collect::<Vec<_>>(),
    )?;
    let mut adam_feature = AdamState::new(
        AdamConfig::new(cfg.lr_feature),
        &feature_blocks.iter().collect::<Vec<_>>(),
    )?;
    drop(gating_blocks);
    drop(feature_blocks);

    let val_candidates = dataset.splits.candidates(EvalSplit::Val);
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut logs = Vec::new();

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let dropped_list = concept_drop(train_pairs, cfg.concept_drop, &mut rng)?;
        let dropped: HashSet<ConceptPair> = dropped_list.iter().copied().collect();
        if dropped.len() >= train_pairs.len() {
            return Err(Error::Config(
                "concept drop removed every train pair".to_string(),
            ));
        }

        let mut order: Vec<usize> = (0..dataset.train.len())
            .filter(|i| !dropped.contains(&dataset.train[*i].label))
            .collect();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut correct = 0usize;
        let mut counted = 0usize;

        for chunk in order.chunks(cfg.batch_size) {
            let mut candidate_sets = Vec::with_capacity(chunk.len());
            for &si in chunk {
                let label = dataset.train[si].label;
                let negatives =
                    sample_negatives(label, train_pairs, &dropped, cfg.negatives, &mut rng)?;
                let mut cands = Vec::with_capacity(negatives.len() + 1);
                cands.push(label);
                cands.extend(negatives);
                candidate_sets.push(cands);
            }

            let mut tape = Tape::new();
            let mut traced = TracedModel::register(&mut tape, &params)?;
            let mut losses = Vec::with_capacity(chunk.len());
            for (&si, cands) in chunk.iter().zip(&candidate_sets) {
                let x = tape.input(dataset.train[si].features.clone())?;
                let mut score_ids = Vec::with_capacity(cands.len());
                for c in cands {
                    score_ids.push(traced.score(&mut tape, x, *c)?);
                }
                let svec = tape.concat(&score_ids)?;
                let lse = tape.log_sum_exp(svec)?;
                losses.push(tape.sub(lse, score_ids[0])?);

                let true_score = tape.value(score_ids[0]).data()[0];
                if score_ids[1..]
                    .iter()
                    .all(|id| tape.value(*id).data()[0] <= true_score)
                {
                    correct += 1;
                }
                counted += 1;
            }
            let stacked = tape.concat(&losses)?;
            let total = tape.sum(stacked)?;
            let loss = tape.scale_const(total, 1.0 / chunk.len() as f64)?;
            let grads = tape.backward(loss)?;
            let block_grads = traced.block_gradients(&grads);

            let mut gating_params: Vec<&mut Tensor> = Vec::new();
            let mut feature_params: Vec<&mut Tensor> = Vec::new();
            let mut gating_grads: Vec<&[f64]> = Vec::new();
            let mut feature_grads: Vec<&[f64]> = Vec::new();
            for (((_, _, tensor), g), grad) in params
                .blocks_mut()
                .into_iter()
                .zip(&groups)
                .zip(&block_grads)
            {
                match g {
                    Some(ParamGroup::Gating) => {
                        gating_params.push(tensor);
                        gating_grads.push(grad.data());
                    }
                    Some(ParamGroup::Feature) => {
                        feature_params.push(tensor);
                        feature_grads.push(grad.data());
                    }
                    None => {}
                }
            }
            adam_gating.step(&mut gating_params, &gating_grads)?;
            adam_feature.step(&mut feature_params, &feature_grads)?;

            loss_sum += tape.value(loss).data()[0];
            batches += 1;
        }

        let matrix = ScoreMatrix::build(&params, &dataset.val, &val_candidates)?;
        let val_auc = auc(&calibration_sweep(&matrix, 1)?);

        logs.push(EpochLog {
            epoch,
            mean_loss: if batches > 0 {
                loss_sum / batches as f64
            } else {
                0.0
            },
            train_accuracy: if counted > 0 {
                correct as f64 / counted as f64
            } else {
                0.0
            },
            val_auc,
            dropped: dropped_list,
            wall_secs: started.elapsed().as_secs_f64(),
        });

        if best.as_ref().map_or(true, |(b, _, _)| val_auc > *b) {
            best = Some((val_auc, epoch, params.clone()));
        }
    }

    let (best_val_auc, best_epoch, best_params) = match best {
        Some((a, e, p)) => (a, Some(e), p),
        None => (f64::NAN, None, params.clone()),
    };
    Ok(FitResult {
        best: best_params,
        final_params: params,
        best_epoch,
        best_val_auc,
        logs,
    })
}
