//! Mini-batch training with Adam and early stopping on test accuracy.

use std::time::Instant;

use morpho_core::autodiff::Graph;
use morpho_core::{Rng, Scalar, Tensor};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, TrainError};
use crate::model::{Mode, Model, ParamGroup};
use crate::optim::{Adam, AdamConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainableScope {
    All,
    /// Only slopes, intercepts and structuring weights of the activations.
    ActivationsOnly,
}

impl TrainableScope {
    pub fn includes(self, group: ParamGroup) -> bool {
        match self {
            Self::All => true,
            Self::ActivationsOnly => group == ParamGroup::Activation,
        }
    }

    /// Groups that must stay untouched.
    pub fn frozen(self) -> Vec<ParamGroup> {
        [ParamGroup::Conv, ParamGroup::Dense, ParamGroup::Activation]
            .into_iter()
            .filter(|&g| !self.includes(g))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    /// Samples per forward/backward pass; gradients are summed over a batch.
    pub micro_batch: usize,
    pub eval_batch: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub scope: TrainableScope,
    /// Stop after the first epoch that ends past this many seconds.
    pub time_budget_secs: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 256,
            micro_batch: 16,
            eval_batch: 250,
            patience: 10,
            max_epochs: 50,
            seed: 0,
            scope: TrainableScope::All,
            time_budget_secs: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if !(self.adam.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.batch_size == 0 || self.micro_batch == 0 || self.eval_batch == 0 {
            return bad("batch sizes must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub seed: u64,
    pub nonlinearity: String,
    pub scope: TrainableScope,
    pub parameter_count: usize,
    pub trainable_count: usize,
    pub initial_test_accuracy: f64,
    pub epochs: Vec<EpochMetrics>,
    /// 0 when no epoch improved on the untrained network.
    pub best_epoch: usize,
    pub best_test_accuracy: f64,
    pub top1_error: f64,
    pub stopped_early: bool,
    pub frozen_checksum_before: u64,
    pub frozen_checksum_after: u64,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub correct: usize,
    pub samples: usize,
}

fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (k, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = k;
        }
    }
    best
}

fn count_correct<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> usize {
    let classes = logits.shape()[1];
    logits.data().chunks(classes).zip(labels).filter(|(row, &l)| argmax(row) == l).count()
}

/// Fraction of `ds` classified correctly.
pub fn evaluate<T: Scalar>(model: &Model<T>, ds: &Dataset, chunk: usize) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for idx in ds.batch_indices(chunk, &mut Rng::new(0), false) {
        let (x, y) = ds.gather(&idx);
        correct += count_correct(&model.predict(&x.cast())?, &y);
    }
    Ok(correct as f64 / ds.len() as f64)
}

/// Optimizer state plus the dropout stream.
pub struct Trainer<T> {
    pub cfg: TrainConfig,
    adam: Adam<T>,
    trainable: Vec<bool>,
    dropout: Rng,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: &Model<T>, cfg: TrainConfig, dropout: Rng) -> Result<Self> {
        cfg.validate()?;
        let trainable = model.params.iter().map(|p| cfg.scope.includes(p.group)).collect();
        Ok(Self {
            adam: Adam::new(cfg.adam, model.params.len()),
            cfg,
            trainable,
            dropout,
        })
    }

    /// One optimizer step on a batch; the loss is the batch mean.
    pub fn step(&mut self, model: &mut Model<T>, images: &Tensor<f64>, labels: &[usize]) -> Result<StepStats> {
        let batch = labels.len();
        let (h, w) = (images.shape()[2], images.shape()[3]);
        let area = h * w;
        let scale = T::lit(1.0 / batch as f64);
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; model.params.len()];
        let mut stats = StepStats {
            loss: 0.0,
            correct: 0,
            samples: batch,
        };
        for start in (0..batch).step_by(self.cfg.micro_batch) {
            let end = (start + self.cfg.micro_batch).min(batch);
            let x: Tensor<T> = Tensor::new(vec![end - start, 1, h, w], images.data()[start * area..end * area].to_vec())?.cast();
            let y = &labels[start..end];
            let g = Graph::new();
            let vars = model.vars(&g, |p| self.cfg.scope.includes(p.group));
            let out = model.forward(&g, &vars, &x, Mode::Train(&mut self.dropout))?;
            let loss = out.logits.softmax_cross_entropy(y, scale)?;
            stats.loss += loss.value().item().as_f64();
            stats.correct += count_correct(&out.logits.value(), y);
            let mut got = g.backward(loss)?;
            for (k, v) in vars.iter().enumerate() {
                if !self.trainable[k] {
                    continue;
                }
                if let Some(d) = got.take(*v) {
                    match &mut grads[k] {
                        Some(acc) => acc.add_assign(&d)?,
                        slot @ None => *slot = Some(d),
                    }
                }
            }
        }
        let mut params: Vec<&mut Tensor<T>> = model.params.iter_mut().map(|p| &mut p.value).collect();
        self.adam.update(&mut params, &grads);
        Ok(stats)
    }
}

/// Train until test accuracy stops improving for `patience` epochs, then
/// restore the best parameters. `on_epoch` sees every epoch as it ends.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    train_ds: &Dataset,
    test_ds: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<Metrics> {
    cfg.validate()?;
    let started = Instant::now();
    let mut root = Rng::new(cfg.seed);
    let mut shuffle = root.fork();
    let mut trainer = Trainer::new(model, cfg.clone(), root.fork())?;
    let frozen = cfg.scope.frozen();
    let checksum_before = model.checksum(&frozen);
    let initial = evaluate(model, test_ds, cfg.eval_batch)?;

    let mut best = (0, initial, model.params.clone());
    let mut epochs = Vec::new();
    let mut stopped_early = false;
    for epoch in 1..=cfg.max_epochs {
        let t0 = Instant::now();
        let (mut loss, mut correct) = (0.0, 0);
        for idx in train_ds.batch_indices(cfg.batch_size, &mut shuffle, true) {
            let (x, y) = train_ds.gather(&idx);
            let s = trainer.step(model, &x, &y)?;
            loss += s.loss * s.samples as f64;
            correct += s.correct;
        }
        let train_loss = loss / train_ds.len() as f64;
        if !train_loss.is_finite() {
            return Err(TrainError::Diverged { epoch, loss: train_loss });
        }
        let test_accuracy = evaluate(model, test_ds, cfg.eval_batch)?;
        let m = EpochMetrics {
            epoch,
            train_loss,
            train_accuracy: correct as f64 / train_ds.len() as f64,
            test_accuracy,
            seconds: t0.elapsed().as_secs_f64(),
        };
        on_epoch(&m);
        epochs.push(m);
        if test_accuracy > best.1 {
            best = (epoch, test_accuracy, model.params.clone());
        } else if epoch - best.0 >= cfg.patience {
            stopped_early = true;
            break;
        }
        if cfg.time_budget_secs.is_some_and(|b| started.elapsed().as_secs_f64() >= b) {
            break;
        }
    }
    let (best_epoch, best_acc, params) = best;
    model.params = params;
    Ok(Metrics {
        seed: cfg.seed,
        nonlinearity: model.spec.nonlinearity.to_string(),
        scope: cfg.scope,
        parameter_count: model.parameter_count(),
        trainable_count: model.params.iter().filter(|p| cfg.scope.includes(p.group)).map(|p| p.value.len()).sum(),
        initial_test_accuracy: initial,
        epochs,
        best_epoch,
        best_test_accuracy: best_acc,
        top1_error: 1.0 - best_acc,
        stopped_early,
        frozen_checksum_before: checksum_before,
        frozen_checksum_after: model.checksum(&frozen),
        seconds: started.elapsed().as_secs_f64(),
    })
}

impl Metrics {
    pub const CSV_HEADER: &'static str =
        "seed,nonlinearity,scope,parameters,initial_test_accuracy,best_epoch,best_test_accuracy,top1_error,epochs,seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{},{:.6},{:.6},{},{:.2}",
            self.seed,
            self.nonlinearity,
            serde_json::to_value(self.scope).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            self.parameter_count,
            self.initial_test_accuracy,
            self.best_epoch,
            self.best_test_accuracy,
            self.top1_error,
            self.epochs.len(),
            self.seconds
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelSpec, Nonlinearity};

    /// Ten 12×12 classes, each a bright bar at a distinct position.
    pub(crate) fn bars(count: usize, seed: u64) -> Dataset {
        let mut rng = Rng::new(seed);
        let mut data = Vec::with_capacity(count * 144);
        let mut labels = Vec::with_capacity(count);
        for k in 0..count {
            let c = k % 10;
            labels.push(c);
            for r in 0..12 {
                for col in 0..12 {
                    let on = if c < 5 { r / 2 == c + 1 } else { col / 2 == c - 4 };
                    data.push(if on { 0.8 + 0.2 * rng.uniform(0.0, 1.0) } else { 0.1 * rng.uniform(0.0, 1.0) });
                }
            }
        }
        Dataset::new(Tensor::new(vec![count, 12, 12], data).unwrap(), labels).unwrap()
    }

    fn spec(nl: Nonlinearity) -> ModelSpec {
        let mut s = ModelSpec::new(nl).with_filters(4);
        s.input = (12, 12);
        s
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            batch_size: 20,
            micro_batch: 8,
            max_epochs: 4,
            patience: 2,
            ..Default::default()
        }
    }

    #[test]
    fn activations_only_keeps_the_rest_frozen() {
        let ds = bars(60, 1);
        let mut model = Model::<f64>::build(spec(Nonlinearity::Morpho2 { n: 2, m: 2 }), &mut Rng::new(0)).unwrap();
        let before = model.clone();
        let cfg = TrainConfig {
            scope: TrainableScope::ActivationsOnly,
            ..quick()
        };
        let m = train(&mut model, &ds, &ds, &cfg, |_| {}).unwrap();
        assert_eq!(m.frozen_checksum_before, m.frozen_checksum_after);
        for (a, b) in before.params.iter().zip(&model.params) {
            if a.group != ParamGroup::Activation {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ds = bars(60, 2);
        let run = || {
            let mut model = Model::<f64>::build(spec(Nonlinearity::PosNeg), &mut Rng::new(4)).unwrap();
            let mut m = train(&mut model, &ds, &ds, &quick(), |_| {}).unwrap();
            m.seconds = 0.0;
            m.epochs.iter_mut().for_each(|e| e.seconds = 0.0);
            (m, model)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn micro_batching_does_not_change_the_step() {
        let ds = bars(20, 3);
        let (x, y) = ds.gather(&(0..20).collect::<Vec<_>>());
        let mut results = Vec::new();
        for micro in [5, 20] {
            let mut model = Model::<f64>::build(spec(Nonlinearity::Morpho1 { n: 2, m: 2 }), &mut Rng::new(5)).unwrap();
            model.spec.dropout = 0.0;
            let cfg = TrainConfig {
                micro_batch: micro,
                ..quick()
            };
            let mut t = Trainer::new(&model, cfg, Rng::new(0)).unwrap();
            let s = t.step(&mut model, &x, &y).unwrap();
            results.push((s.loss, model));
        }
        assert!((results[0].0 - results[1].0).abs() < 1e-12);
        for (a, b) in results[0].1.params.iter().zip(&results[1].1.params) {
            assert!(a.value.max_abs_diff(&b.value) < 1e-12, "{}", a.name);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(TrainConfig { patience: 0, ..quick() }.validate().is_err());
        let mut c = quick();
        c.adam.lr = 0.0;
        assert!(c.validate().is_err());
    }
}
