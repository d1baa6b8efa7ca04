//! Differentiable versions of the morphological operators.
//!
//! Scalar parameters are per-channel vectors of shape `[C]` (use `[1]` for
//! a single shared value); plane `p` of the input uses entry `p % C`.

use std::rc::Rc;

use super::kernels::{self, Extremum};
use super::{PoolSpec, StructuringFunction};
use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn morph<'g, T: Scalar>(f: Var<'g, T>, g: &StructuringFunction<T>, weights: Var<'g, T>, erode: bool) -> Result<Var<'g, T>> {
    let w = weights.value();
    if w.shape() != [g.len()] {
        return Err(Error::ShapeMismatch {
            expected: vec![g.len()],
            found: w.shape().to_vec(),
        });
    }
    let se = g.with_weights(w.data().to_vec())?;
    let Extremum { value, source, slot } = kernels::morph(&f.value(), &se, erode)?;
    let in_shape = f.shape();
    let n = g.len();
    Ok(f.graph().record(
        value,
        &[f, weights],
        Box::new(move |up, needs| {
            let df = needs[0].then(|| kernels::scatter(&in_shape, up, &source));
            let dw = needs[1].then(|| {
                let mut dw = Tensor::zeros(&[n]);
                for (&u, &k) in up.data().iter().zip(&slot) {
                    if erode {
                        dw.data_mut()[k] -= u;
                    } else {
                        dw.data_mut()[k] += u;
                    }
                }
                dw
            });
            vec![df, dw]
        }),
    ))
}

/// Dilation of `f` over the offsets of `g`, with weights read from the
/// `weights` variable (shape `[g.len()]`) instead of `g`'s own.
pub fn dilate<'g, T: Scalar>(f: Var<'g, T>, g: &StructuringFunction<T>, weights: Var<'g, T>) -> Result<Var<'g, T>> {
    morph(f, g, weights, false)
}

/// Erosion; see [`dilate`].
pub fn erode<'g, T: Scalar>(f: Var<'g, T>, g: &StructuringFunction<T>, weights: Var<'g, T>) -> Result<Var<'g, T>> {
    morph(f, g, weights, true)
}

fn pool<'g, T: Scalar>(f: Var<'g, T>, p: &PoolSpec, maximize: bool) -> Result<Var<'g, T>> {
    let Extremum { value, source, .. } = kernels::pool(&f.value(), p, maximize, None)?;
    let in_shape = f.shape();
    let source = Rc::new(source);
    Ok(f.graph().record(
        value,
        &[f],
        Box::new(move |up, _| vec![Some(kernels::scatter(&in_shape, up, &source))]),
    ))
}

pub fn max_pool<'g, T: Scalar>(f: Var<'g, T>, p: &PoolSpec) -> Result<Var<'g, T>> {
    pool(f, p, true)
}

pub fn min_pool<'g, T: Scalar>(f: Var<'g, T>, p: &PoolSpec) -> Result<Var<'g, T>> {
    pool(f, p, false)
}

/// Window maximum of `max(0, f + α)` with per-channel `α`.
pub fn act_pool<'g, T: Scalar>(f: Var<'g, T>, p: &PoolSpec, alpha: Var<'g, T>) -> Result<Var<'g, T>> {
    max_pool(f.add_channel_bias(alpha, p.rank())?.relu(), p)
}

/// `max(β⁻ f, β⁺ f)` with per-channel slopes; every `β⁺ ≥ β⁻`.
pub fn prelu2<'g, T: Scalar>(
    f: Var<'g, T>,
    beta_pos: Var<'g, T>,
    beta_neg: Var<'g, T>,
    spatial_rank: usize,
) -> Result<Var<'g, T>> {
    for (&bp, &bn) in beta_pos.value().data().iter().zip(beta_neg.value().data()) {
        super::check_prelu2(bp, bn)?;
    }
    f.scale_channels(beta_neg, spatial_rank)?
        .max(f.scale_channels(beta_pos, spatial_rank)?)
}

pub fn pos_neg_split<'g, T: Scalar>(f: Var<'g, T>) -> (Var<'g, T>, Var<'g, T>) {
    (f.relu(), (-f).relu())
}

/// `max_pool(f⁺) − max_pool(f⁻)`.
pub fn selfdual_pool<'g, T: Scalar>(f: Var<'g, T>, p: &PoolSpec) -> Result<Var<'g, T>> {
    let (pos, neg) = pos_neg_split(f);
    max_pool(pos, p)?.try_sub(max_pool(neg, p)?)
}

/// `max_pool(max(0, β⁻ f)) + min_pool(min(0, β⁺ f))` with per-channel slopes.
pub fn posneg_pool_param<'g, T: Scalar>(
    f: Var<'g, T>,
    p: &PoolSpec,
    beta_pos: Var<'g, T>,
    beta_neg: Var<'g, T>,
) -> Result<Var<'g, T>> {
    let upper = f.scale_channels(beta_neg, p.rank())?.relu();
    let lower = f.scale_channels(beta_pos, p.rank())?.min_scalar(T::zero());
    max_pool(upper, p)?.try_add(min_pool(lower, p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_difference_grad, relative_error, Graph};
    use crate::morphops;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64s(v)
    }

    #[test]
    fn values_match_pure_operators() {
        let f = t(&[0.3, -1.2, 2.5, 0.7, -0.4, 1.9]);
        let p = PoolSpec::new_1d(3, 2).unwrap();
        let g = Graph::new();
        let x = g.constant(f.clone());
        let one = g.constant(t(&[1.0]));
        let half = g.constant(t(&[0.5]));
        assert_eq!(*max_pool(x, &p).unwrap().value(), morphops::max_pool(&f, &p).unwrap());
        assert_eq!(*min_pool(x, &p).unwrap().value(), morphops::min_pool(&f, &p).unwrap());
        assert_eq!(*selfdual_pool(x, &p).unwrap().value(), morphops::selfdual_pool(&f, &p).unwrap());
        assert_eq!(*act_pool(x, &p, half).unwrap().value(), morphops::act_pool(&f, &p, 0.5).unwrap());
        assert_eq!(*prelu2(x, one, half, 1).unwrap().value(), morphops::prelu2(&f, 1.0, 0.5).unwrap());
        assert_eq!(
            *posneg_pool_param(x, &p, half, one).unwrap().value(),
            morphops::posneg_pool_param(&f, &p, 0.5, 1.0).unwrap()
        );
        let se = StructuringFunction::from_pairs_1d(&[(-1, 0.2), (0, 0.0), (2, -0.3)]).unwrap();
        let w = g.constant(Tensor::from_slice(se.weights()));
        assert_eq!(*dilate(x, &se, w).unwrap().value(), morphops::dilate(&f, &se).unwrap());
        assert_eq!(*erode(x, &se, w).unwrap().value(), morphops::erode(&f, &se).unwrap());
    }

    #[test]
    fn prelu2_rejects_inverted_slopes() {
        let g = Graph::new();
        let x = g.constant(t(&[1.0]));
        assert!(prelu2(x, g.constant(t(&[0.0])), g.constant(t(&[1.0])), 1).is_err());
    }

    #[test]
    fn dilation_weight_gradient_counts_attaining_offsets() {
        let g = Graph::new();
        let x = g.leaf(t(&[0.0, 1.0, 0.0]));
        let se = StructuringFunction::from_pairs_1d(&[(-1, 0.0), (0, 2.0), (1, 0.0)]).unwrap();
        let w = g.leaf(Tensor::from_slice(se.weights()));
        let out = dilate(x, &se, w).unwrap().sum();
        let grads = g.backward(out).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[0.0, 3.0, 0.0]);
        assert_eq!(grads.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn erosion_gradients_match_finite_differences() {
        let f = t(&[0.31, -1.17, 2.53, 0.72, -0.45]);
        let se = StructuringFunction::from_pairs_1d(&[(-1, 0.21), (0, 0.0), (1, -0.33)]).unwrap();
        let wt = Tensor::from_slice(se.weights());
        let coeffs = t(&[1.0, -2.0, 0.5, 3.0, 1.5]);
        let loss = |f: &Tensor<f64>, w: &Tensor<f64>| {
            let s = se.with_weights(w.data().to_vec()).unwrap();
            morphops::erode(f, &s).unwrap().zip_map(&coeffs, |a, b| a * b).unwrap().sum()
        };
        let g = Graph::new();
        let x = g.leaf(f.clone());
        let w = g.leaf(wt.clone());
        let root = erode(x, &se, w).unwrap().dot_const(&coeffs).unwrap();
        let grads = g.backward(root).unwrap();
        let nf = finite_difference_grad(|v| loss(v, &wt), &f, 1e-5);
        let nw = finite_difference_grad(|v| loss(&f, v), &wt, 1e-5);
        assert!(relative_error(grads.get(x).unwrap(), &nf) < 1e-6);
        assert!(relative_error(grads.get(w).unwrap(), &nw) < 1e-6);
    }
}
