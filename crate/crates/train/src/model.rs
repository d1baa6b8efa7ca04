//! The two-convolution classifier and its interchangeable nonlinearities.
//!
//! Layout: `conv 3×3 → nonlinearity+pool → conv 3×3 → nonlinearity+pool →
//! dropout → dense`, valid convolutions with stride 1 and a `2×2` pooling
//! window with stride 2.

use std::fmt;
use std::str::FromStr;

use morpho_core::activations::{diff as act, MorphoActivationParams, MorphoVariant};
use morpho_core::autodiff::{Graph, Var};
use morpho_core::morphops::{diff as morph, PoolSpec};
use morpho_core::{Rng, Scalar, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};

/// The activation-and-pooling block used after each convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Nonlinearity {
    /// ReLU followed by max-pooling.
    ReluMaxPool,
    /// `min(ReLU(x), 6)` followed by max-pooling.
    Relu6MaxPool,
    /// Positive and negative parts max-pooled separately.
    SelfDual,
    /// Parametric positive/negative pooling with learnable slopes.
    PosNeg,
    /// Max-min activation followed by max-pooling.
    PlActMaxPool { n: usize, m: usize },
    /// Activation rows pooled with their own structuring functions.
    Morpho1 { n: usize, m: usize },
    /// Pooling per column, then the max-min activation.
    Morpho2 { n: usize, m: usize },
}

impl Nonlinearity {
    /// Tags accepted by [`FromStr`], without their `(N, M)` terms.
    pub const TAGS: [&'static str; 7] = [
        "relu-maxpool",
        "relu6-maxpool",
        "selfdual",
        "posneg",
        "plact-maxpool",
        "morpho1",
        "morpho2",
    ];

    /// Build from a tag plus terms; terms are ignored by fixed variants.
    pub fn from_tag(tag: &str, n: usize, m: usize) -> Result<Self> {
        let v = match tag {
            "relu-maxpool" => Self::ReluMaxPool,
            "relu6-maxpool" => Self::Relu6MaxPool,
            "selfdual" => Self::SelfDual,
            "posneg" => Self::PosNeg,
            "plact-maxpool" => Self::PlActMaxPool { n, m },
            "morpho1" => Self::Morpho1 { n, m },
            "morpho2" => Self::Morpho2 { n, m },
            other => {
                return Err(TrainError::InvalidConfig(format!(
                    "unknown nonlinearity `{other}`; expected one of {}",
                    Self::TAGS.join(", ")
                )))
            }
        };
        if let Some((n, m)) = v.terms() {
            if n == 0 || m == 0 {
                return Err(TrainError::InvalidConfig(format!("{tag} needs N, M ≥ 1")));
            }
        }
        Ok(v)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::ReluMaxPool => "relu-maxpool",
            Self::Relu6MaxPool => "relu6-maxpool",
            Self::SelfDual => "selfdual",
            Self::PosNeg => "posneg",
            Self::PlActMaxPool { .. } => "plact-maxpool",
            Self::Morpho1 { .. } => "morpho1",
            Self::Morpho2 { .. } => "morpho2",
        }
    }

    pub fn terms(&self) -> Option<(usize, usize)> {
        match *self {
            Self::PlActMaxPool { n, m } | Self::Morpho1 { n, m } | Self::Morpho2 { n, m } => Some((n, m)),
            _ => None,
        }
    }

    /// Intercepts of the fused layers absorb any convolution bias.
    pub fn conv_bias(&self) -> bool {
        !matches!(self, Self::Morpho1 { .. } | Self::Morpho2 { .. })
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.terms() {
            Some((n, m)) => write!(f, "{}[n={n},m={m}]", self.tag()),
            None => f.write_str(self.tag()),
        }
    }
}

impl FromStr for Nonlinearity {
    type Err = TrainError;

    /// `tag` or `tag:N,M`.
    fn from_str(s: &str) -> Result<Self> {
        let (tag, terms) = s.split_once(':').unwrap_or((s, "2,2"));
        let bad = || TrainError::InvalidConfig(format!("cannot parse terms in `{s}`; use tag:N,M"));
        let (n, m) = terms.split_once(',').ok_or_else(bad)?;
        Self::from_tag(tag, n.trim().parse().map_err(|_| bad())?, m.trim().parse().map_err(|_| bad())?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub nonlinearity: Nonlinearity,
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
    pub stride: usize,
    pub dropout: f64,
    pub input: (usize, usize),
    pub classes: usize,
}

impl ModelSpec {
    pub fn new(nonlinearity: Nonlinearity) -> Self {
        Self {
            nonlinearity,
            filters: 128,
            kernel: 3,
            pool: 2,
            stride: 2,
            dropout: 0.5,
            input: (28, 28),
            classes: 10,
        }
    }

    pub fn with_filters(mut self, filters: usize) -> Self {
        self.filters = filters;
        self
    }

    pub fn pool_spec(&self) -> Result<PoolSpec> {
        Ok(PoolSpec::square(self.pool, self.stride)?)
    }

    /// Spatial extents after each convolution and pooling stage.
    fn stages(&self) -> Result<[(usize, usize); 4]> {
        let p = self.pool_spec()?;
        let conv = |(h, w): (usize, usize)| -> Result<(usize, usize)> {
            if h < self.kernel || w < self.kernel {
                return Err(TrainError::InvalidConfig(format!("{h}x{w} input is smaller than the kernel")));
            }
            Ok((h - self.kernel + 1, w - self.kernel + 1))
        };
        let pool = |(h, w): (usize, usize)| -> Result<(usize, usize)> {
            let e = p.output_extent(&[h, w])?;
            Ok((e[0], e[1]))
        };
        let c1 = conv(self.input)?;
        let p1 = pool(c1)?;
        let c2 = conv(p1)?;
        let p2 = pool(c2)?;
        Ok([c1, p1, c2, p2])
    }

    /// Width of the flattened features entering the dense layer.
    pub fn feature_width(&self) -> Result<usize> {
        let (h, w) = self.stages()?[3];
        Ok(self.filters * h * w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.filters == 0 || self.classes == 0 || self.kernel == 0 {
            return Err(TrainError::InvalidConfig("filters, classes and kernel must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(TrainError::InvalidConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        self.stages().map(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    Conv,
    Dense,
    Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param<T> {
    pub name: String,
    pub group: ParamGroup,
    pub value: Tensor<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model<T> {
    pub spec: ModelSpec,
    pub params: Vec<Param<T>>,
}

/// Dropout at training time; evaluation runs the deterministic network.
pub enum Mode<'r> {
    Train(&'r mut Rng),
    Eval,
}

pub struct Forward<'g, T> {
    pub logits: Var<'g, T>,
    /// Flattened features before dropout and the dense layer.
    pub features: Var<'g, T>,
}

fn he_uniform<T: Scalar>(rng: &mut Rng, shape: &[usize], fan_in: usize) -> Tensor<T> {
    let limit = (6.0 / fan_in as f64).sqrt();
    rng.uniform_tensor(shape, -limit, limit)
}

fn activation_params<T: Scalar>(nl: Nonlinearity, channels: usize, window: usize, layer: usize) -> Vec<Param<T>> {
    let param = |name: &str, shape: Vec<usize>, data: Vec<T>| Param {
        name: format!("act{layer}.{name}"),
        group: ParamGroup::Activation,
        value: Tensor::new(shape, data).expect("static shape"),
    };
    let tile = |v: &[T]| v.iter().copied().cycle().take(v.len() * channels).collect::<Vec<T>>();
    match nl {
        Nonlinearity::ReluMaxPool | Nonlinearity::Relu6MaxPool | Nonlinearity::SelfDual => Vec::new(),
        Nonlinearity::PosNeg => vec![
            param("beta_pos", vec![channels], vec![T::one(); channels]),
            param("beta_neg", vec![channels], vec![T::one(); channels]),
        ],
        Nonlinearity::PlActMaxPool { n, m } | Nonlinearity::Morpho1 { n, m } | Nonlinearity::Morpho2 { n, m } => {
            let act = match nl {
                Nonlinearity::Morpho2 { .. } => MorphoActivationParams::<T>::clamp(n, m).transposed(),
                _ => MorphoActivationParams::<T>::clamp(m, n),
            };
            let mut out = vec![
                param("beta", vec![channels, m, n], tile(&act.beta)),
                param("alpha", vec![channels, m, n], tile(&act.alpha)),
            ];
            let banks = match nl {
                Nonlinearity::Morpho1 { .. } => m,
                Nonlinearity::Morpho2 { .. } => n,
                _ => 0,
            };
            if banks > 0 {
                out.push(param("weights", vec![channels, banks, window], vec![T::zero(); channels * banks * window]));
            }
            out
        }
    }
}

impl<T: Scalar> Model<T> {
    /// Convolution weights `conv1`, `conv2` and the dense weights are drawn
    /// in that order from `rng`, fan-in scaled uniform; biases start at 0
    /// and activations at the clamp `max(min(ReLU(x), 6), −6)`.
    pub fn build(spec: ModelSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let f = spec.filters;
        let k = spec.kernel;
        let window = spec.pool_spec()?.window_len();
        let nl = spec.nonlinearity;
        let w1 = he_uniform(rng, &[f, 1, k, k], k * k);
        let w2 = he_uniform(rng, &[f, f, k, k], f * k * k);
        let width = spec.feature_width()?;
        let wd = he_uniform(rng, &[width, spec.classes], width);

        let p = |name: &str, group, value| Param {
            name: name.to_string(),
            group,
            value,
        };
        let mut params = vec![p("conv1.weight", ParamGroup::Conv, w1)];
        if nl.conv_bias() {
            params.push(p("conv1.bias", ParamGroup::Conv, Tensor::zeros(&[f])));
        }
        params.extend(activation_params(nl, f, window, 1));
        params.push(p("conv2.weight", ParamGroup::Conv, w2));
        if nl.conv_bias() {
            params.push(p("conv2.bias", ParamGroup::Conv, Tensor::zeros(&[f])));
        }
        params.extend(activation_params(nl, f, window, 2));
        params.push(p("dense.weight", ParamGroup::Dense, wd));
        params.push(p("dense.bias", ParamGroup::Dense, Tensor::zeros(&[spec.classes])));
        Ok(Self { spec, params })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn param(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    /// FNV-1a over the bit patterns of every parameter in `groups`.
    pub fn checksum(&self, groups: &[ParamGroup]) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in self.params.iter().filter(|p| groups.contains(&p.group)) {
            for v in p.value.data() {
                for byte in v.as_f64().to_bits().to_le_bytes() {
                    h ^= u64::from(byte);
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }

    /// Register parameters on `g`; those rejected by `trainable` become
    /// constants.
    pub fn vars<'g>(&self, g: &'g Graph<T>, trainable: impl Fn(&Param<T>) -> bool) -> Vec<Var<'g, T>> {
        self.params.iter().map(|p| g.input(p.value.clone(), trainable(p))).collect()
    }

    /// Logits for images `[batch, 1, h, w]`, using parameter vars from
    /// [`Model::vars`].
    pub fn forward<'g>(
        &self,
        g: &'g Graph<T>,
        vars: &[Var<'g, T>],
        images: &Tensor<T>,
        mode: Mode<'_>,
    ) -> Result<Forward<'g, T>> {
        let var = |name: &str| -> Var<'g, T> {
            let k = self.params.iter().position(|p| p.name == name).expect("parameter registered at build");
            vars[k]
        };
        let pool = self.spec.pool_spec()?;
        let nl = self.spec.nonlinearity;
        let x = g.constant(images.clone());
        let mut h = x;
        for layer in 1..=2 {
            h = h.conv2d(var(&format!("conv{layer}.weight")))?;
            if nl.conv_bias() {
                h = h.add_channel_bias(var(&format!("conv{layer}.bias")), 2)?;
            }
            let a = |name: &str| var(&format!("act{layer}.{name}"));
            h = match nl {
                Nonlinearity::ReluMaxPool => morph::max_pool(h.relu(), &pool)?,
                Nonlinearity::Relu6MaxPool => morph::max_pool(h.relu().min_scalar(T::lit(6.0)), &pool)?,
                Nonlinearity::SelfDual => morph::selfdual_pool(h, &pool)?,
                Nonlinearity::PosNeg => morph::posneg_pool_param(h, &pool, a("beta_pos"), a("beta_neg"))?,
                Nonlinearity::PlActMaxPool { .. } => {
                    morph::max_pool(act::pl_activation(h, a("beta"), a("alpha"), 2)?, &pool)?
                }
                Nonlinearity::Morpho1 { .. } => act::morpho_act1(h, a("beta"), a("alpha"), a("weights"), &pool)?,
                Nonlinearity::Morpho2 { .. } => act::morpho_act2(h, a("beta"), a("alpha"), a("weights"), &pool)?,
            };
        }
        let batch = images.shape()[0];
        let features = h.reshape(&[batch, self.spec.feature_width()?])?;
        let dropped = match mode {
            Mode::Train(rng) if self.spec.dropout > 0.0 => {
                let keep = 1.0 - self.spec.dropout;
                let scale = T::lit(1.0 / keep);
                let mask: Vec<T> = (0..features.value().len())
                    .map(|_| if rng.bernoulli(keep) { scale } else { T::zero() })
                    .collect();
                features * g.constant(Tensor::new(features.shape(), mask)?)
            }
            _ => features,
        };
        let logits = dropped.linear(var("dense.weight"), var("dense.bias"))?;
        Ok(Forward { logits, features })
    }

    /// Logits without a training graph.
    pub fn predict(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        let g = Graph::new();
        let vars = self.vars(&g, |_| false);
        let out = self.forward(&g, &vars, images, Mode::Eval)?;
        Ok((*out.logits.value()).clone())
    }

    /// Penultimate features `[batch, width]`.
    pub fn features(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        let g = Graph::new();
        let vars = self.vars(&g, |_| false);
        let out = self.forward(&g, &vars, images, Mode::Eval)?;
        Ok((*out.features.value()).clone())
    }

    /// The per-channel activation of layer `layer` as a scalar function, for
    /// variants that have one.
    pub fn activation_curves(&self, layer: usize) -> Vec<Box<dyn Fn(T) -> T + '_>> {
        let nl = self.spec.nonlinearity;
        let Some((n, m)) = nl.terms() else {
            return match nl {
                Nonlinearity::ReluMaxPool => vec![Box::new(|x: T| x.max(T::zero()))],
                Nonlinearity::Relu6MaxPool => vec![Box::new(|x: T| x.max(T::zero()).min(T::lit(6.0)))],
                _ => Vec::new(),
            };
        };
        let (Some(beta), Some(alpha)) = (self.param(&format!("act{layer}.beta")), self.param(&format!("act{layer}.alpha")))
        else {
            return Vec::new();
        };
        let per = m * n;
        (0..self.spec.filters)
            .map(|c| {
                let params = MorphoActivationParams::new(
                    m,
                    n,
                    beta.value.data()[c * per..(c + 1) * per].to_vec(),
                    alpha.value.data()[c * per..(c + 1) * per].to_vec(),
                )
                .expect("shape fixed at build");
                let variant = match nl {
                    Nonlinearity::Morpho2 { .. } => MorphoVariant::PoolThenAct,
                    _ => MorphoVariant::ActThenPool,
                };
                Box::new(move |x: T| match variant {
                    MorphoVariant::PoolThenAct => params.transposed().eval(x),
                    MorphoVariant::ActThenPool => params.eval(x),
                }) as Box<dyn Fn(T) -> T>
            })
            .collect()
    }
}
