//! The training loop with dev-based model selection, evaluation against the
//! majority baseline, and the misclassified-utterance report.

mod optim;

pub use optim::{clip_global_norm, AdamState};

use rand::seq::SliceRandom;

use crate::autodiff::ParamSet;
use crate::corpus::{EncodedSample, Label, Utterance};
use crate::error::{Error, Result};
use crate::models::{Arch, Mode, ModelHandle, CLASSES};
use crate::seeds;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub clip_norm: f64,
    /// Adam learning rate. The production default is 1e-4; small synthetic
    /// runs need something larger to converge in a few epochs.
    pub lr: f64,
    pub max_epochs: usize,
    /// Epochs without a dev-accuracy improvement before stopping; 0 means
    /// exactly one epoch runs.
    pub patience: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn default_for(arch: Arch) -> Self {
        let batch_size = match arch {
            Arch::Cnn => 128,
            Arch::Lstm | Arch::CnnLstm => 32,
        };
        TrainConfig { batch_size, clip_norm: 2.0, lr: 1e-4, max_epochs: 50, patience: 5, seed: 0 }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.clip_norm <= 0.0 {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        if self.lr <= 0.0 {
            return Err(Error::Config("lr must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: f64,
}

/// `epoch,train_loss,dev_accuracy` lines, one per epoch.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,dev_accuracy\n");
    for r in history {
        out.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.dev_accuracy));
    }
    out
}

/// Seeded minibatch training with best-dev checkpointing. Returns the
/// parameters of the epoch with the highest dev accuracy (ties keep the
/// earlier epoch) and the per-epoch history.
pub fn train(
    mut model: ModelHandle,
    train_set: &[EncodedSample],
    dev_set: &[EncodedSample],
    cfg: &TrainConfig,
) -> Result<(ModelHandle, Vec<EpochRecord>)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Precondition("training set is empty".into()));
    }
    if dev_set.is_empty() {
        return Err(Error::Precondition("dev set is empty (needed for model selection)".into()));
    }
    let mut shuffle_rng = seeds::substream(cfg.seed, "shuffle");
    let mut dropout_rng = seeds::substream(cfg.seed, "dropout");
    let mut adam = AdamState::new(&model.params);
    adam.lr = cfg.lr;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, ParamSet)> = None;
    let mut since_improve = 0usize;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<EncodedSample> =
                chunk.iter().map(|&i| train_set[i].clone()).collect();
            let mut bl = model.batch_loss(&batch, Mode::Train, Some(&mut dropout_rng))?;
            bl.pass.tape.backward(bl.loss_id)?;
            let mut grads = ParamSet::new();
            for (name, &id) in &bl.pass.param_ids {
                grads.insert(name, bl.pass.tape.grad(id));
            }
            clip_global_norm(&mut grads, cfg.clip_norm)?;
            adam.step(&mut model.params, &grads)?;
            loss_sum += bl.loss * batch.len() as f64;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let dev_accuracy = evaluate(&model, dev_set)?.accuracy;
        history.push(EpochRecord { epoch, train_loss, dev_accuracy });

        if best.as_ref().map_or(true, |(acc, _)| dev_accuracy > *acc) {
            best = Some((dev_accuracy, model.params.clone()));
            since_improve = 0;
        } else {
            since_improve += 1;
        }
        if since_improve >= cfg.patience {
            break;
        }
    }
    model.params = best.expect("at least one epoch ran").1;
    Ok((model, history))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Rows = true class, columns = predicted class.
    pub confusion: [[usize; CLASSES]; CLASSES],
    /// Predicted class index per input sample, in input order.
    pub predictions: Vec<usize>,
}

impl EvalReport {
    /// Per-sample 0/1 correctness indicators, for the bootstrap test.
    pub fn correctness(&self, samples: &[EncodedSample]) -> Vec<u8> {
        self.predictions
            .iter()
            .zip(samples)
            .map(|(&p, s)| u8::from(p == s.label.class_index()))
            .collect()
    }
}

const EVAL_CHUNK: usize = 128;

pub fn evaluate(model: &ModelHandle, samples: &[EncodedSample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::Precondition("evaluate on an empty sample set".into()));
    }
    let mut confusion = [[0usize; CLASSES]; CLASSES];
    let mut predictions = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(EVAL_CHUNK) {
        let pass = model.forward(chunk, Mode::Eval, None)?;
        for (sample, logits) in chunk.iter().zip(pass.logits()) {
            // argmax with ties to class 0
            let pred = usize::from(logits[1] > logits[0]);
            confusion[sample.label.class_index()][pred] += 1;
            predictions.push(pred);
        }
    }
    let trace = confusion[0][0] + confusion[1][1];
    Ok(EvalReport {
        accuracy: trace as f64 / samples.len() as f64,
        confusion,
        predictions,
    })
}

/// Accuracy of always guessing the most frequent class.
pub fn majority_baseline(labels: &[Label]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Precondition("majority baseline on an empty set".into()));
    }
    let ad = labels.iter().filter(|&&l| l == Label::Ad).count();
    let major = ad.max(labels.len() - ad);
    Ok(major as f64 / labels.len() as f64)
}

#[derive(Debug, Clone)]
pub struct ErrorReport {
    /// Seeded draw from the misclassified true-Control pool, with the
    /// model's (wrong) prediction.
    pub sampled: Vec<(Utterance, Label)>,
    /// Share of the sampled utterances at or under `short_threshold` words.
    pub short_fraction: f64,
    pub short_threshold: usize,
    /// Size of the full qualifying pool before sampling.
    pub pool_size: usize,
}

impl ErrorReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "misclassified_control pool={} sampled={} short_fraction={:.3} short_threshold={}\n",
            self.pool_size,
            self.sampled.len(),
            self.short_fraction,
            self.short_threshold
        );
        for (u, pred) in &self.sampled {
            out.push_str(&format!(
                "{}_{} predicted={} words={}\n",
                u.transcript_id,
                u.index,
                pred.as_str(),
                u.words.join(" ")
            ));
        }
        out
    }
}

/// Sample misclassified utterances whose true label is Control and measure
/// how many are short. No misclassifications is an empty report, not an
/// error.
pub fn error_report(
    model: &ModelHandle,
    samples: &[EncodedSample],
    sample_frac: f64,
    short_threshold: usize,
    seed: u64,
) -> Result<ErrorReport> {
    if !(sample_frac > 0.0 && sample_frac <= 1.0) {
        return Err(Error::Config(format!("sample_frac must be in (0,1], got {sample_frac}")));
    }
    let report = evaluate(model, samples)?;
    let pool: Vec<usize> = (0..samples.len())
        .filter(|&i| {
            samples[i].label == Label::Control
                && report.predictions[i] != samples[i].label.class_index()
        })
        .collect();
    let take = (sample_frac * pool.len() as f64).ceil() as usize;
    let mut rng = seeds::substream(seed, "errors");
    let mut drawn: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), take).into_vec();
    drawn.sort_unstable();
    let sampled: Vec<(Utterance, Label)> = drawn
        .iter()
        .map(|&j| {
            let i = pool[j];
            let pred = if report.predictions[i] == 1 { Label::Ad } else { Label::Control };
            (samples[i].source.clone(), pred)
        })
        .collect();
    let short = sampled.iter().filter(|(u, _)| u.words.len() <= short_threshold).count();
    let short_fraction = if sampled.is_empty() { 0.0 } else { short as f64 / sampled.len() as f64 };
    Ok(ErrorReport { sampled, short_fraction, short_threshold, pool_size: pool.len() })
}
