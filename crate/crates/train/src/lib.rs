//! Datasets, the two-convolution classifier and its training procedures.
//!
//! ```no_run
//! use morpho_train::{data::Dataset, model::{Model, ModelSpec, Nonlinearity}, train::{train, TrainConfig}};
//! use morpho_core::Rng;
//!
//! let dir = std::path::Path::new("data/mnist");
//! let train_ds = Dataset::load_split(dir, true)?;
//! let test_ds = Dataset::load_split(dir, false)?;
//! let spec = ModelSpec::new(Nonlinearity::Morpho2 { n: 2, m: 2 });
//! let mut model = Model::<f64>::build(spec, &mut Rng::new(1))?;
//! let metrics = train(&mut model, &train_ds, &test_ds, &TrainConfig::default(), |e| println!("{e:?}"))?;
//! println!("{:.2}%", 100.0 * metrics.best_test_accuracy);
//! # Ok::<(), morpho_train::TrainError>(())
//! ```

pub mod data;
pub mod error;
pub mod experiments;
pub mod model;
pub mod optim;
pub mod train;

pub use error::{Result, TrainError};
