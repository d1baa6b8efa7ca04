//! Max-min piecewise-linear activations and fused activation-pooling layers.
//!
//! A continuous piecewise-linear function of one variable can be written
//! as `min_j max_i β[j][i]·x + α[j][i]`: every row is a convex max of
//! affine pieces and the outer minimum glues them. [`MorphoLayerParams`]
//! couples such an activation with a strided pooling whose window carries
//! learnable additive weights, in one of two orders:
//!
//! - [`MorphoVariant::ActThenPool`]: each row `j` is activated and then
//!   pooled with its own structuring function `b_j` before the minimum.
//! - [`MorphoVariant::PoolThenAct`]: each column `i` pools with `b_i`, the
//!   column's max of affine maps is applied, then the minimum over columns.
//!
//! Structuring functions here are indexed by window position: for output
//! `x` and position `u` in the `R`-window the input sample is `f(K·x + u)`.

pub mod diff;
pub(crate) mod kernels;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphops::{PoolSpec, StructuringFunction};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Slopes and intercepts of `min_j max_i β[j][i]·x + α[j][i]`, stored
/// row-major as `M` rows of `N` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorphoActivationParams<T> {
    pub n: usize,
    pub m: usize,
    pub beta: Vec<T>,
    pub alpha: Vec<T>,
}

impl<T: Scalar> MorphoActivationParams<T> {
    pub fn new(m: usize, n: usize, beta: Vec<T>, alpha: Vec<T>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidParameter("need at least one max and one min term".into()));
        }
        if beta.len() != m * n || alpha.len() != m * n {
            return Err(Error::InvalidParameter(format!(
                "expected {m}x{n} slopes and intercepts, got {} and {}",
                beta.len(),
                alpha.len()
            )));
        }
        if !beta.iter().chain(&alpha).all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("slopes and intercepts must be finite".into()));
        }
        Ok(Self { n, m, beta, alpha })
    }

    /// Build from nested rows given as `f64` literals.
    pub fn from_rows(beta: &[&[f64]], alpha: &[&[f64]]) -> Result<Self> {
        let m = beta.len();
        let n = beta.first().map_or(0, |r| r.len());
        if beta.iter().chain(alpha).any(|r| r.len() != n) || alpha.len() != m {
            return Err(Error::InvalidParameter("ragged parameter rows".into()));
        }
        let flat = |rows: &[&[f64]]| rows.iter().flat_map(|r| r.iter().map(|&v| T::lit(v))).collect();
        Self::new(m, n, flat(beta), flat(alpha))
    }

    /// Parameters whose activation is `max(min(ReLU(x), 6), −6)`.
    ///
    /// Row 0 holds the pieces `x` and `0`, row 1 the constant `6`; every
    /// further slot is a constant `−6`, which never wins a row maximum that
    /// already contains `0` or `6`. With `N = 1` the `0` piece does not
    /// fit and row 0 is plain `x`; with `M = 1` there is no upper clamp.
    pub fn clamp(m: usize, n: usize) -> Self {
        let mut beta = vec![T::zero(); m * n];
        let mut alpha = vec![T::lit(-6.0); m * n];
        beta[0] = T::one();
        alpha[0] = T::zero();
        if n > 1 {
            alpha[1] = T::zero();
        }
        for j in 1..m {
            alpha[j * n] = T::lit(6.0);
        }
        Self { n, m, beta, alpha }
    }

    /// The ReLU `max(x, 0)` as one row of two pieces.
    pub fn relu() -> Self {
        Self::from_rows(&[&[1.0, 0.0]], &[&[0.0, 0.0]]).expect("static shape")
    }

    pub fn beta_at(&self, j: usize, i: usize) -> T {
        self.beta[j * self.n + i]
    }

    pub fn alpha_at(&self, j: usize, i: usize) -> T {
        self.alpha[j * self.n + i]
    }

    /// Swap the roles of rows and columns.
    pub fn transposed(&self) -> Self {
        let mut beta = Vec::with_capacity(self.beta.len());
        let mut alpha = Vec::with_capacity(self.alpha.len());
        for i in 0..self.n {
            for j in 0..self.m {
                beta.push(self.beta_at(j, i));
                alpha.push(self.alpha_at(j, i));
            }
        }
        Self {
            n: self.m,
            m: self.n,
            beta,
            alpha,
        }
    }

    /// `min_j max_i β[j][i]·x + α[j][i]`.
    pub fn eval(&self, x: T) -> T {
        let mut out = T::zero();
        for j in 0..self.m {
            let mut row = self.beta_at(j, 0) * x + self.alpha_at(j, 0);
            for i in 1..self.n {
                let v = self.beta_at(j, i) * x + self.alpha_at(j, i);
                if v > row {
                    row = v;
                }
            }
            if j == 0 || row < out {
                out = row;
            }
        }
        out
    }

    pub(crate) fn tensors(&self) -> (Tensor<T>, Tensor<T>) {
        let shape = vec![1, self.m, self.n];
        (
            Tensor::new(shape.clone(), self.beta.clone()).expect("validated"),
            Tensor::new(shape, self.alpha.clone()).expect("validated"),
        )
    }
}

/// Elementwise max-min activation.
pub fn pl_activation_eval<T: Scalar>(x: &Tensor<T>, p: &MorphoActivationParams<T>) -> Tensor<T> {
    x.map(|v| p.eval(v))
}

/// Dense weights over the `R` window positions of `pool`, `−∞` where `b`
/// has no offset. Offsets must be window positions `[0, R)` per axis.
pub fn window_weights<T: Scalar>(b: &StructuringFunction<T>, pool: &PoolSpec) -> Result<Vec<T>> {
    if b.rank() != pool.rank() {
        return Err(Error::InvalidParameter(format!(
            "structuring function rank {} does not match pool rank {}",
            b.rank(),
            pool.rank()
        )));
    }
    let ((rh, rw), _) = pool.as_2d();
    let mut out = vec![T::neg_infinity(); rh * rw];
    for ((a, c), &w) in b.offsets_2d().into_iter().zip(b.weights()) {
        if a < 0 || c < 0 || a as usize >= rh || c as usize >= rw {
            return Err(Error::InvalidParameter(format!(
                "offset ({a}, {c}) lies outside the {:?} pooling window",
                pool.window()
            )));
        }
        out[a as usize * rw + c as usize] = w;
    }
    if out.iter().all(|w| *w == T::neg_infinity()) {
        return Err(Error::EmptyWindow { position: vec![] });
    }
    Ok(out)
}

fn weight_bank<T: Scalar>(structuring: &[StructuringFunction<T>], pool: &PoolSpec) -> Result<Tensor<T>> {
    if structuring.is_empty() {
        return Err(Error::InvalidParameter("need at least one structuring function".into()));
    }
    let mut data = Vec::with_capacity(structuring.len() * pool.window_len());
    for b in structuring {
        data.extend(window_weights(b, pool)?);
    }
    Tensor::new(vec![1, structuring.len(), pool.window_len()], data)
}

/// Increasing pooling `min_j max_u f(K·x + u) + b_j(u)`.
pub fn general_pool<T: Scalar>(f: &Tensor<T>, structuring: &[StructuringFunction<T>], pool: &PoolSpec) -> Result<Tensor<T>> {
    let weights = weight_bank(structuring, pool)?;
    // identity activation in every column: slope 1, intercept 0
    let j = structuring.len();
    let beta = Tensor::full(&[1, 1, j], T::one());
    let alpha = Tensor::zeros(&[1, 1, j]);
    Ok(kernels::act2(f, &beta, &alpha, &weights, pool)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MorphoVariant {
    /// Activation rows are pooled individually, then the minimum is taken.
    ActThenPool,
    /// Pooling per column, then the column activations, then the minimum.
    PoolThenAct,
}

/// One channel's activation-pooling layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorphoLayerParams<T> {
    pub act: MorphoActivationParams<T>,
    pub structuring: Vec<StructuringFunction<T>>,
    pub pool: PoolSpec,
    pub variant: MorphoVariant,
}

impl<T: Scalar> MorphoLayerParams<T> {
    pub fn new(
        act: MorphoActivationParams<T>,
        structuring: Vec<StructuringFunction<T>>,
        pool: PoolSpec,
        variant: MorphoVariant,
    ) -> Result<Self> {
        let expected = match variant {
            MorphoVariant::ActThenPool => act.m,
            MorphoVariant::PoolThenAct => act.n,
        };
        if structuring.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "{variant:?} with M={}, N={} needs {expected} structuring functions, got {}",
                act.m,
                act.n,
                structuring.len()
            )));
        }
        weight_bank(&structuring, &pool)?;
        Ok(Self {
            act,
            structuring,
            pool,
            variant,
        })
    }

    /// Clamp activation with flat learnable structuring functions: the
    /// layer starts as `ReLU6` followed by max-pooling whenever `M, N ≥ 2`.
    pub fn init(variant: MorphoVariant, n: usize, m: usize, pool: PoolSpec) -> Self {
        let (act, banks) = match variant {
            MorphoVariant::ActThenPool => (MorphoActivationParams::clamp(m, n), m),
            MorphoVariant::PoolThenAct => (MorphoActivationParams::clamp(n, m).transposed(), n),
        };
        let flat = StructuringFunction::flat_window(pool.window()).with_learnable(true);
        Self {
            act,
            structuring: vec![flat; banks],
            pool,
            variant,
        }
    }

    /// The activation as a function of one value, pooling aside.
    pub fn curve(&self, x: T) -> T {
        match self.variant {
            MorphoVariant::ActThenPool => self.act.eval(x),
            MorphoVariant::PoolThenAct => self.act.transposed().eval(x),
        }
    }

    pub fn forward(&self, f: &Tensor<T>) -> Result<Tensor<T>> {
        let (beta, alpha) = self.act.tensors();
        let weights = weight_bank(&self.structuring, &self.pool)?;
        let out = match self.variant {
            MorphoVariant::ActThenPool => kernels::act1(f, &beta, &alpha, &weights, &self.pool)?,
            MorphoVariant::PoolThenAct => kernels::act2(f, &beta, &alpha, &weights, &self.pool)?,
        };
        Ok(out.0)
    }
}

/// Activate then pool; see [`MorphoVariant::ActThenPool`].
pub fn morpho_act1_forward<T: Scalar>(f: &Tensor<T>, p: &MorphoLayerParams<T>) -> Result<Tensor<T>> {
    if p.variant != MorphoVariant::ActThenPool {
        return Err(Error::InvalidParameter("expected an activate-then-pool layer".into()));
    }
    p.forward(f)
}

/// Pool then activate; see [`MorphoVariant::PoolThenAct`].
pub fn morpho_act2_forward<T: Scalar>(f: &Tensor<T>, p: &MorphoLayerParams<T>) -> Result<Tensor<T>> {
    if p.variant != MorphoVariant::PoolThenAct {
        return Err(Error::InvalidParameter("expected a pool-then-activate layer".into()));
    }
    p.forward(f)
}

/// CSV of `x` and one column per unit, on `lo, lo + step, ..., hi`.
pub fn curve_csv<T: Scalar>(units: &[&dyn Fn(T) -> T], lo: f64, hi: f64, step: f64) -> Result<String> {
    if !(step > 0.0) || hi < lo {
        return Err(Error::InvalidParameter(format!("bad grid [{lo}, {hi}] step {step}")));
    }
    let count = ((hi - lo) / step).round() as usize;
    let mut out = String::from("x");
    for u in 0..units.len() {
        let _ = write!(out, ",unit{u}");
    }
    out.push('\n');
    for k in 0..=count {
        let x = lo + (hi - lo) * k as f64 / count.max(1) as f64;
        let x = (x / step).round() * step;
        let _ = write!(out, "{}", round_for_display(x, step));
        for f in units {
            let _ = write!(out, ",{}", f(T::lit(x)));
        }
        out.push('\n');
    }
    Ok(out)
}

fn round_for_display(x: f64, step: f64) -> String {
    let decimals = (-step.log10()).ceil().max(0.0) as usize;
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64s(v)
    }

    #[test]
    fn relu_and_affine_special_cases() {
        let x = t(&[-2.0, 0.0, 3.5]);
        assert_eq!(pl_activation_eval(&x, &MorphoActivationParams::relu()).data(), &[0.0, 0.0, 3.5]);
        let affine = MorphoActivationParams::from_rows(&[&[2.0]], &[&[1.0]]).unwrap();
        assert_eq!(pl_activation_eval(&x, &affine).data(), &[-3.0, 1.0, 8.0]);
    }

    #[test]
    fn experiment_clamp_form() {
        // min(max(β₀x+α₀, β₁x+α₁, α₂), α₃) at (1, 0, 0, −6, 0, 6)
        let p = MorphoActivationParams::<f64>::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]], &[&[0.0, -6.0, 0.0], &[6.0, -6.0, -6.0]])
            .unwrap();
        assert_eq!(p.eval(10.0), 6.0);
        assert_eq!(p.eval(-3.0), 0.0);
        assert_eq!(p.eval(2.0), 2.0);
        let c = MorphoActivationParams::<f64>::clamp(2, 3);
        for x in [-10.0, -3.0, 0.0, 2.0, 5.99, 6.0, 10.0] {
            assert_eq!(c.eval(x), p.eval(x));
        }
    }

    #[test]
    fn clamp_is_relu6_for_all_sizes_from_two() {
        for m in 2..5 {
            for n in 2..5 {
                let c = MorphoActivationParams::<f64>::clamp(m, n);
                let ct = MorphoActivationParams::<f64>::clamp(n, m).transposed().transposed();
                for x in [-7.0, -1.0, 0.0, 0.5, 6.0, 7.5] {
                    assert_eq!(c.eval(x), x.clamp(0.0, 6.0));
                    assert_eq!(ct.eval(x), x.clamp(0.0, 6.0));
                }
            }
        }
    }

    #[test]
    fn general_pool_examples() {
        let p = PoolSpec::new_1d(2, 1).unwrap();
        let b1 = StructuringFunction::flat_window(&[2]);
        let b2 = StructuringFunction::from_pairs_1d(&[(0, 1.0), (1, -5.0)]).unwrap();
        let f = t(&[0.0, 2.0, 1.0]);
        assert_eq!(general_pool(&f, &[b1.clone(), b2], &p).unwrap().data(), &[1.0, 2.0]);
        let b1_plus = b1.with_weights(vec![1.0, 1.0]).unwrap();
        assert_eq!(
            general_pool(&f, &[b1.clone(), b1_plus], &p).unwrap(),
            crate::morphops::max_pool(&f, &p).unwrap()
        );
        assert!(general_pool::<f64>(&f, &[], &p).is_err());
        let outside = StructuringFunction::from_pairs_1d(&[(2, 0.0)]).unwrap();
        assert!(general_pool(&f, &[outside], &p).is_err());
    }

    #[test]
    fn layer_reductions() {
        let f = t(&[1.0, -2.0, 3.0, 0.5, -1.0]);
        let p = PoolSpec::new_1d(2, 2).unwrap();
        let maxpool = crate::morphops::max_pool(&f, &p).unwrap();
        let one = MorphoActivationParams::from_rows(&[&[1.0]], &[&[0.0]]).unwrap();
        for variant in [MorphoVariant::ActThenPool, MorphoVariant::PoolThenAct] {
            let layer = MorphoLayerParams::new(one.clone(), vec![StructuringFunction::flat_window(&[2])], p.clone(), variant).unwrap();
            assert_eq!(layer.forward(&f).unwrap(), maxpool);
        }
        let id = PoolSpec::new_1d(1, 1).unwrap();
        let relu = MorphoLayerParams::new(
            MorphoActivationParams::relu(),
            vec![StructuringFunction::identity(1)],
            id,
            MorphoVariant::ActThenPool,
        )
        .unwrap();
        assert_eq!(morpho_act1_forward(&f, &relu).unwrap(), crate::morphops::relu(&f));
        assert!(morpho_act2_forward(&f, &relu).is_err());
    }

    #[test]
    fn structuring_count_must_match_variant() {
        let act = MorphoActivationParams::<f64>::clamp(2, 3);
        let p = PoolSpec::new_1d(2, 2).unwrap();
        let b = StructuringFunction::flat_window(&[2]);
        assert!(MorphoLayerParams::new(act.clone(), vec![b.clone(); 2], p.clone(), MorphoVariant::ActThenPool).is_ok());
        assert!(MorphoLayerParams::new(act.clone(), vec![b.clone(); 2], p.clone(), MorphoVariant::PoolThenAct).is_err());
        assert!(MorphoLayerParams::new(act, vec![b; 3], p, MorphoVariant::PoolThenAct).is_ok());
    }

    #[test]
    fn init_layers_are_relu6_then_maxpool() {
        let f = t(&[7.0, -2.0, 3.0, 0.5, -1.0, 9.0]);
        let p = PoolSpec::new_1d(2, 2).unwrap();
        let reference = crate::morphops::max_pool(&f.map(|v| v.clamp(0.0, 6.0)), &p).unwrap();
        for variant in [MorphoVariant::ActThenPool, MorphoVariant::PoolThenAct] {
            for (n, m) in [(2, 2), (3, 2), (2, 4), (4, 3)] {
                let layer = MorphoLayerParams::init(variant, n, m, p.clone());
                assert_eq!(layer.forward(&f).unwrap(), reference, "{variant:?} n={n} m={m}");
                assert_eq!(layer.curve(10.0), 6.0);
                assert_eq!(layer.curve(-3.0), 0.0);
            }
        }
    }

    #[test]
    fn curve_csv_shape() {
        let relu = MorphoActivationParams::<f64>::relu();
        let clamp = MorphoActivationParams::<f64>::clamp(2, 2);
        let (a, b) = (|x| relu.eval(x), |x| clamp.eval(x));
        let csv = curve_csv::<f64>(&[&a, &b], -10.0, 10.0, 0.01).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2002);
        assert_eq!(lines[0], "x,unit0,unit1");
        assert_eq!(lines[1], "-10.00,0,0");
        assert_eq!(lines[1001], "0.00,0,0");
        assert_eq!(lines[2001], "10.00,10,6");
    }
}
