use morpho_core::{Rng, Tensor};
use morpho_train::data::Dataset;
use morpho_train::model::{Model, ModelSpec, Nonlinearity};
use morpho_train::optim::AdamConfig;
use morpho_train::train::{train, TrainConfig, Trainer};

const VARIANTS: [Nonlinearity; 7] = [
    Nonlinearity::ReluMaxPool,
    Nonlinearity::Relu6MaxPool,
    Nonlinearity::SelfDual,
    Nonlinearity::PosNeg,
    Nonlinearity::PlActMaxPool { n: 2, m: 2 },
    Nonlinearity::Morpho1 { n: 2, m: 2 },
    Nonlinearity::Morpho2 { n: 2, m: 2 },
];

/// Noise images with a faint class-dependent blob, so that 64 samples
/// can be memorized but not trivially.
fn noisy(count: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut data = Vec::with_capacity(count * 144);
    let mut labels = Vec::with_capacity(count);
    for k in 0..count {
        let c = k % 10;
        labels.push(c);
        for r in 0..12 {
            for col in 0..12 {
                let blob = if r / 4 == c % 3 && col / 4 == c / 4 { 0.3 } else { 0.0 };
                data.push(blob + rng.uniform(0.0, 0.7));
            }
        }
    }
    Dataset::new(Tensor::new(vec![count, 12, 12], data).unwrap(), labels).unwrap()
}

fn small(nl: Nonlinearity) -> ModelSpec {
    let mut spec = ModelSpec::new(nl).with_filters(8);
    spec.input = (12, 12);
    spec.dropout = 0.0;
    spec
}

#[test]
fn every_variant_overfits_64_samples_within_200_steps() {
    let ds = noisy(64, 1);
    let (x, y) = ds.gather(&(0..64).collect::<Vec<_>>());
    let cfg = TrainConfig {
        adam: AdamConfig {
            lr: 1e-2,
            ..Default::default()
        },
        batch_size: 64,
        micro_batch: 64,
        ..Default::default()
    };
    for nl in VARIANTS {
        let mut model = Model::<f64>::build(small(nl), &mut Rng::new(7)).unwrap();
        let mut trainer = Trainer::new(&model, cfg.clone(), Rng::new(0)).unwrap();
        let mut losses = Vec::new();
        for _ in 0..200 {
            let loss = trainer.step(&mut model, &x, &y).unwrap().loss;
            losses.push(loss);
            if loss < 0.05 {
                break;
            }
        }
        let last = *losses.last().unwrap();
        assert!(last < 0.05, "{nl}: loss {last} after {} steps", losses.len());
        let head: f64 = losses[..10].iter().sum::<f64>() / 10.0;
        let tail: f64 = losses[losses.len() - 10..].iter().sum::<f64>() / 10.0;
        assert!(tail < head, "{nl}: loss did not decrease on average");
    }
}

#[test]
fn fixed_seed_reproduces_metrics_and_other_seeds_differ() {
    let ds = noisy(40, 2);
    let cfg = TrainConfig {
        batch_size: 16,
        micro_batch: 8,
        max_epochs: 2,
        ..Default::default()
    };
    let run = |seed: u64| {
        let mut model = Model::<f64>::build(small(Nonlinearity::Morpho1 { n: 2, m: 3 }), &mut Rng::new(seed)).unwrap();
        let mut m = train(&mut model, &ds, &ds, &TrainConfig { seed, ..cfg.clone() }, |_| {}).unwrap();
        m.seconds = 0.0;
        m.epochs.iter_mut().for_each(|e| e.seconds = 0.0);
        (m, model)
    };
    let a = run(3);
    assert_eq!(a, run(3));
    assert_ne!(a.1, run(4).1);
}

#[test]
fn fused_layers_match_relu6_maxpool_at_full_width() {
    let mut rng = Rng::new(11);
    let images: Tensor<f64> = rng.uniform_tensor(&[2, 1, 28, 28], 0.0, 1.0);
    let reference = Model::<f64>::build(ModelSpec::new(Nonlinearity::Relu6MaxPool), &mut Rng::new(5)).unwrap();
    let want = reference.predict(&images).unwrap();
    for nl in [
        Nonlinearity::Morpho1 { n: 2, m: 2 },
        Nonlinearity::Morpho2 { n: 2, m: 2 },
        Nonlinearity::Morpho1 { n: 4, m: 3 },
        Nonlinearity::Morpho2 { n: 3, m: 4 },
    ] {
        let model = Model::<f64>::build(ModelSpec::new(nl), &mut Rng::new(5)).unwrap();
        let diff = model.predict(&images).unwrap().max_abs_diff(&want);
        assert!(diff <= 1e-12, "{nl}: {diff}");
    }
}
