use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, Classifier, ModelError, Result};
use crate::nn::{adam_step, AdamState, Graph, LrSchedule, Mode, ParamStore};
use crate::scalar::Scalar;

/// Samples per gradient chunk. Chunks are reduced in a fixed order, so the
/// result does not depend on how they are scheduled.
const CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Example<I> {
    pub input: I,
    pub label: usize,
}

/// Labels a run trains on: rhythm classes, or record identity for
/// pretraining the beat CNN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Rhythm,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub seed: u64,
    /// Train, test and validation fractions.
    pub split: [f64; 3],
    pub task: Task,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 1000,
            schedule: LrSchedule::default(),
            seed: 0,
            split: [0.7, 0.2, 0.1],
            task: Task::Rhythm,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(ModelError::Config("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(ModelError::Config("batch_size must be positive".into()));
        }
        if self.schedule.drop_period_epochs == 0 {
            return Err(ModelError::Config("drop_period_epochs must be positive".into()));
        }
        let lr = self.schedule.initial;
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(ModelError::Config(format!("invalid learning rate {lr}")));
        }
        if self.split.iter().any(|&r| !(0.0..=1.0).contains(&r))
            || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(ModelError::Config(format!(
                "split ratios {:?} must be in [0, 1] and sum to 1",
                self.split
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub valid_loss: f64,
    pub valid_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_valid_loss: f64,
    /// Parameters from the epoch with the lowest validation loss.
    pub best_params: ParamStore<T>,
    /// `(epoch, valid_loss)` each time the best checkpoint was replaced.
    pub checkpoint_updates: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    pub loss: f64,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
    pub probs: Vec<Vec<T>>,
}

struct ChunkResult<T> {
    grads: Vec<Vec<T>>,
    loss: f64,
    correct: usize,
}

fn check_labels<I>(data: &[Example<I>], classes: usize, what: &str) -> Result<()> {
    if data.is_empty() {
        return Err(ModelError::Data(format!("{what} split is empty")));
    }
    if let Some(e) = data.iter().find(|e| e.label >= classes) {
        return Err(ModelError::Data(format!(
            "{what} label {} out of range for {classes} classes",
            e.label
        )));
    }
    Ok(())
}

fn run_chunk<T: Scalar, M: Classifier<T>>(
    model: &M,
    batch: &[(&Example<M::Input>, u64)],
) -> Result<ChunkResult<T>> {
    let mut grads = model.params().zero_grads();
    let mut loss = 0.0;
    let mut correct = 0;
    for (ex, seed) in batch {
        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
        let mut g = Graph::new();
        let vars = model.params().bind(&mut g, true);
        let (logits, _) = model.build(&mut g, &vars, &ex.input, Mode::Train, &mut rng)?;
        let (l, probs) = g.softmax_cross_entropy(logits, ex.label)?;
        loss += g.value(l)[0].as_f64();
        correct += usize::from(argmax(&probs) == ex.label);
        g.backward(l)?;
        for (acc, &v) in grads.iter_mut().zip(&vars) {
            if let Some(d) = g.grad(v) {
                acc.iter_mut().zip(d).for_each(|(a, &b)| *a = *a + b);
            }
        }
    }
    Ok(ChunkResult { grads, loss, correct })
}

/// Mean cross-entropy, accuracy and predictions in evaluation mode.
pub fn evaluate<T: Scalar, M: Classifier<T>>(
    model: &M,
    data: &[Example<M::Input>],
) -> Result<Evaluation<T>> {
    let mut loss = 0.0;
    let mut predictions = Vec::with_capacity(data.len());
    let mut all_probs = Vec::with_capacity(data.len());
    for ex in data {
        let probs = model.forward(&ex.input)?.probs;
        if ex.label >= probs.len() {
            return Err(ModelError::Data(format!("label {} out of range", ex.label)));
        }
        let p = probs[ex.label].as_f64();
        loss -= p.max(f64::MIN_POSITIVE).ln();
        predictions.push(argmax(&probs));
        all_probs.push(probs);
    }
    let n = data.len().max(1) as f64;
    let correct = predictions.iter().zip(data).filter(|(p, e)| **p == e.label).count();
    Ok(Evaluation {
        loss: loss / n,
        accuracy: correct as f64 / n,
        predictions,
        probs: all_probs,
    })
}

/// Mini-batch Adam training with a seeded shuffle each epoch. The model is
/// left with its final parameters; the best-validation parameters are
/// returned in the outcome.
pub fn train<T: Scalar, M: Classifier<T>>(
    model: &mut M,
    train: &[Example<M::Input>],
    valid: &[Example<M::Input>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    check_labels(train, model.classes(), "train")?;
    check_labels(valid, model.classes(), "valid")?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model.params());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, ParamStore<T>)> = None;
    let mut checkpoint_updates = Vec::new();

    for epoch in 0..cfg.epochs {
        let lr = cfg.schedule.lr_at(epoch);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut epoch_loss = 0.0;
        let mut epoch_correct = 0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let items: Vec<(&Example<M::Input>, u64)> =
                idx.iter().map(|&i| (&train[i], rng.random())).collect();
            let mut grads = model.params().zero_grads();
            let mut batch_loss = 0.0;
            for chunk in items.chunks(CHUNK) {
                let r = run_chunk(&*model, chunk)?;
                batch_loss += r.loss;
                epoch_correct += r.correct;
                for (acc, g) in grads.iter_mut().zip(r.grads) {
                    acc.iter_mut().zip(g).for_each(|(a, b)| *a = *a + b);
                }
            }
            if !batch_loss.is_finite() {
                return Err(ModelError::NonFinite { epoch, batch: b });
            }
            epoch_loss += batch_loss;
            let scale = T::lit(1.0 / idx.len() as f64);
            for g in &mut grads {
                g.iter_mut().for_each(|v| *v = *v * scale);
            }
            adam_step(model.params_mut(), &grads, &mut adam, lr)?;
        }
        let v = evaluate(&*model, valid)?;
        if !v.loss.is_finite() {
            return Err(ModelError::NonFinite { epoch, batch: order.len().div_ceil(cfg.batch_size) });
        }
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: epoch_loss / train.len() as f64,
            train_acc: epoch_correct as f64 / train.len() as f64,
            valid_loss: v.loss,
            valid_acc: v.accuracy,
        };
        log::info!(
            "epoch {epoch:>3} lr {lr:.0e} train loss {:.4} acc {:.4} valid loss {:.4} acc {:.4}",
            record.train_loss,
            record.train_acc,
            record.valid_loss,
            record.valid_acc
        );
        if best.as_ref().is_none_or(|(_, l, _)| v.loss < *l) {
            best = Some((epoch, v.loss, model.params().clone()));
            checkpoint_updates.push((epoch, v.loss));
        }
        history.push(record);
    }
    let (best_epoch, best_valid_loss, best_params) = best.expect("at least one epoch");
    Ok(TrainOutcome { history, best_epoch, best_valid_loss, best_params, checkpoint_updates })
}

/// `epoch,lr,train_loss,train_acc,valid_loss,valid_acc` rows.
pub fn history_to_csv(history: &[EpochRecord]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in history {
        w.serialize(r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}
