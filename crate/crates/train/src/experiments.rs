//! Repeated-seed comparisons, feature export and model files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use morpho_core::{Rng, Scalar};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{io_err, Result, TrainError};
use crate::model::{Model, ModelSpec, Nonlinearity};
use crate::train::{train, EpochMetrics, Metrics, TrainConfig};

/// Build a model from `seed` and train it with the same seed.
pub fn run_seed<T: Scalar>(
    spec: &ModelSpec,
    train_ds: &Dataset,
    test_ds: &Dataset,
    cfg: &TrainConfig,
    seed: u64,
    on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(Model<T>, Metrics)> {
    let mut model = Model::build(spec.clone(), &mut Rng::new(seed))?;
    let cfg = TrainConfig { seed, ..cfg.clone() };
    let metrics = train(&mut model, train_ds, test_ds, &cfg, on_epoch)?;
    Ok((model, metrics))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub spread: f64,
    pub delta_vs_baseline: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub baseline: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<VariantSummary>,
    pub runs: Vec<Metrics>,
}

pub fn mean_and_spread(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let spread = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, spread)
}

/// Train every variant with every seed and compare mean test accuracy
/// against the first variant, which must be the baseline.
pub fn run_table1_protocol<T: Scalar>(
    base: &ModelSpec,
    variants: &[Nonlinearity],
    train_ds: &Dataset,
    test_ds: &Dataset,
    cfg: &TrainConfig,
    seeds: &[u64],
    mut on_run: impl FnMut(&Metrics),
) -> Result<ProtocolReport> {
    let Some(&baseline) = variants.first() else {
        return Err(TrainError::InvalidConfig("no variants given".into()));
    };
    if seeds.is_empty() {
        return Err(TrainError::InvalidConfig("no seeds given".into()));
    }
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &nl in variants {
        let spec = ModelSpec {
            nonlinearity: nl,
            ..base.clone()
        };
        let mut accuracies = Vec::new();
        for &seed in seeds {
            let (_, m) = run_seed::<T>(&spec, train_ds, test_ds, cfg, seed, |_| {})?;
            on_run(&m);
            accuracies.push(m.best_test_accuracy);
            runs.push(m);
        }
        let (mean, spread) = mean_and_spread(&accuracies);
        rows.push(VariantSummary {
            variant: nl.tag().to_string(),
            n: nl.terms().map(|t| t.0),
            m: nl.terms().map(|t| t.1),
            accuracies,
            mean,
            spread,
            delta_vs_baseline: 0.0,
        });
    }
    let base_mean = rows[0].mean;
    for r in &mut rows {
        r.delta_vs_baseline = r.mean - base_mean;
    }
    Ok(ProtocolReport {
        baseline: baseline.to_string(),
        seeds: seeds.to_vec(),
        rows,
        runs,
    })
}

impl ProtocolReport {
    /// Accuracies in percent, one row per variant.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,n,m,mean_accuracy,spread,delta_vs_baseline,per_seed\n");
        let opt = |v: Option<usize>| v.map_or(String::new(), |v| v.to_string());
        for r in &self.rows {
            let per_seed: Vec<String> = r.accuracies.iter().map(|a| format!("{:.2}", 100.0 * a)).collect();
            writeln!(
                out,
                "{},{},{},{:.2},{:.2},{:+.2},{}",
                r.variant,
                opt(r.n),
                opt(r.m),
                100.0 * r.mean,
                100.0 * r.spread,
                100.0 * r.delta_vs_baseline,
                per_seed.join(";")
            )
            .expect("write to string");
        }
        out
    }
}

/// Penultimate features of every sample plus its label, as CSV.
pub fn last_layer_features_csv<T: Scalar>(model: &Model<T>, ds: &Dataset, chunk: usize) -> Result<String> {
    let width = model.spec.feature_width()?;
    let mut out = String::new();
    let header: Vec<String> = (0..width).map(|k| format!("f{k}")).chain(["label".to_string()]).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for idx in ds.batch_indices(chunk.max(1), &mut Rng::new(0), false) {
        let (x, y) = ds.gather(&idx);
        let feats = model.features(&x.cast())?;
        for (row, label) in feats.data().chunks(width).zip(y) {
            for v in row {
                write!(out, "{},", v.as_f64()).expect("write to string");
            }
            writeln!(out, "{label}").expect("write to string");
        }
    }
    Ok(out)
}

pub fn export_last_layer_features<T: Scalar>(model: &Model<T>, ds: &Dataset, path: &Path) -> Result<()> {
    let csv = last_layer_features_csv(model, ds, 250)?;
    fs::write(path, csv).map_err(io_err(path))
}

pub fn save_model<T: Scalar + Serialize>(model: &Model<T>, path: &Path) -> Result<()> {
    let json = serde_json::to_string(model)?;
    fs::write(path, json).map_err(io_err(path))
}

pub fn load_model<T: Scalar + for<'de> Deserialize<'de>>(path: &Path) -> Result<Model<T>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let model: Model<T> = serde_json::from_str(&text)?;
    model.spec.validate()?;
    let fresh = Model::<T>::build(model.spec.clone(), &mut Rng::new(0))?;
    let layout = |m: &Model<T>| m.params.iter().map(|p| (p.name.clone(), p.value.shape().to_vec())).collect::<Vec<_>>();
    if layout(&fresh) != layout(&model) {
        return Err(TrainError::InvalidConfig(format!(
            "{} does not hold the parameters of a {} model",
            path.display(),
            model.spec.nonlinearity
        )));
    }
    Ok(model)
}
