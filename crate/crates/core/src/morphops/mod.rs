//! Morphological operators on signals and images.
//!
//! Every operator acts on the trailing one or two spatial axes and treats
//! all leading axes as independent planes. Pooling is valid-mode: the
//! window for output `x` spans `[K·x, K·x + R − 1]` on each axis, so the
//! output extent is `⌊(n − R) / K⌋ + 1`. Full-resolution dilation and
//! erosion skip offsets that fall outside the signal.
//!
//! The [`diff`] submodule records the same operators on a
//! [`Graph`](crate::autodiff::Graph).

pub mod diff;
pub(crate) mod kernels;
mod structuring;

pub use structuring::{PoolSpec, StructuringFunction};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Sup-convolution `out(x) = sup_y f(x − y) + g(y)`.
pub fn dilate<T: Scalar>(f: &Tensor<T>, g: &StructuringFunction<T>) -> Result<Tensor<T>> {
    Ok(kernels::morph(f, g, false)?.value)
}

/// Inf-convolution `out(x) = inf_y f(x + y) − g(y)`.
pub fn erode<T: Scalar>(f: &Tensor<T>, g: &StructuringFunction<T>) -> Result<Tensor<T>> {
    Ok(kernels::morph(f, g, true)?.value)
}

pub fn relu<T: Scalar>(f: &Tensor<T>) -> Tensor<T> {
    f.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn max_pool<T: Scalar>(f: &Tensor<T>, p: &PoolSpec) -> Result<Tensor<T>> {
    Ok(kernels::pool(f, p, true, None)?.value)
}

/// Window minimum; equal to `−max_pool(−f)`.
pub fn min_pool<T: Scalar>(f: &Tensor<T>, p: &PoolSpec) -> Result<Tensor<T>> {
    Ok(kernels::pool(f, p, false, None)?.value)
}

/// Window maximum of `max(0, f + α)`.
pub fn act_pool<T: Scalar>(f: &Tensor<T>, p: &PoolSpec, alpha: T) -> Result<Tensor<T>> {
    max_pool(&relu(&f.map(|v| v + alpha)), p)
}

/// `max(β⁻ f, β⁺ f)`; requires `β⁺ ≥ β⁻`.
pub fn prelu2<T: Scalar>(f: &Tensor<T>, beta_pos: T, beta_neg: T) -> Result<Tensor<T>> {
    check_prelu2(beta_pos, beta_neg)?;
    Ok(f.map(|v| {
        let (a, b) = (beta_neg * v, beta_pos * v);
        if b > a {
            b
        } else {
            a
        }
    }))
}

pub(crate) fn check_prelu2<T: Scalar>(beta_pos: T, beta_neg: T) -> Result<()> {
    if beta_pos < beta_neg || beta_pos.is_nan() || beta_neg.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "prelu2 needs beta_pos >= beta_neg, got {beta_pos} < {beta_neg}"
        )));
    }
    Ok(())
}

/// `(f⁺, f⁻) = (max(0, f), max(0, −f))`.
pub fn pos_neg_split<T: Scalar>(f: &Tensor<T>) -> (Tensor<T>, Tensor<T>) {
    (relu(f), relu(&f.neg()))
}

/// `max_pool(f⁺) − max_pool(f⁻)`.
pub fn selfdual_pool<T: Scalar>(f: &Tensor<T>, p: &PoolSpec) -> Result<Tensor<T>> {
    let (pos, neg) = pos_neg_split(f);
    max_pool(&pos, p)?.zip_map(&max_pool(&neg, p)?, |a, b| a - b)
}

/// `max_pool(max(0, β⁻ f)) + min_pool(min(0, β⁺ f))`.
///
/// The slope on the positive branch is `β⁻` and on the negative branch
/// `β⁺`, in that order; with `β⁺ = β⁻ = 1` this is [`selfdual_pool`].
pub fn posneg_pool_param<T: Scalar>(f: &Tensor<T>, p: &PoolSpec, beta_pos: T, beta_neg: T) -> Result<Tensor<T>> {
    let upper = relu(&f.map(|v| beta_neg * v));
    let lower = f.map(|v| {
        let s = beta_pos * v;
        if s < T::zero() {
            s
        } else {
            T::zero()
        }
    });
    max_pool(&upper, p)?.zip_map(&min_pool(&lower, p)?, |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64s(v)
    }

    #[test]
    fn dilation_examples() {
        let f = t(&[0.0, 1.0, 0.0]);
        assert_eq!(dilate(&f, &StructuringFunction::flat_1d(-1, 1)).unwrap().data(), &[1.0, 1.0, 1.0]);
        assert_eq!(dilate(&f, &StructuringFunction::identity(1)).unwrap(), f);
        let g = StructuringFunction::from_pairs_1d(&[(-1, 0.0), (0, 2.0), (1, 0.0)]).unwrap();
        assert_eq!(dilate(&f, &g).unwrap().data(), &[2.0, 3.0, 2.0]);
    }

    #[test]
    fn erosion_examples() {
        let f = t(&[0.0, 1.0, 0.0]);
        assert_eq!(erode(&f, &StructuringFunction::flat_1d(-1, 1)).unwrap().data(), &[0.0, 0.0, 0.0]);
        assert_eq!(erode(&f, &StructuringFunction::identity(1)).unwrap(), f);
    }

    #[test]
    fn erosion_is_dual_of_dilation_by_transpose() {
        let f = t(&[3.0, -1.0, 4.0, 1.0, -5.0]);
        let g = StructuringFunction::from_pairs_1d(&[(-1, 0.5), (0, 2.0), (2, -1.0)]).unwrap();
        let lhs = erode(&f, &g.transpose()).unwrap();
        let rhs = dilate(&f.neg(), &g).unwrap().neg();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn empty_window_is_an_error() {
        let f = t(&[1.0, 2.0]);
        let g = StructuringFunction::from_pairs_1d(&[(5, 0.0)]).unwrap();
        assert!(matches!(dilate(&f, &g), Err(Error::EmptyWindow { .. })));
    }

    #[test]
    fn neg_infinity_weight_never_contributes() {
        let f = t(&[1.0, 9.0, 1.0]);
        let g = StructuringFunction::new(vec![vec![0], vec![1]], vec![0.0, f64::NEG_INFINITY]).unwrap();
        assert_eq!(dilate(&f, &g).unwrap(), f);
    }

    #[test]
    fn pooling_examples() {
        let p = PoolSpec::new_1d(2, 2).unwrap();
        let f = t(&[1.0, 3.0, 2.0, 0.0]);
        assert_eq!(max_pool(&f, &p).unwrap().data(), &[3.0, 2.0]);
        assert_eq!(min_pool(&f, &p).unwrap().data(), &[1.0, 0.0]);
        let id = PoolSpec::new_1d(1, 1).unwrap();
        assert_eq!(max_pool(&f, &id).unwrap(), f);
        assert_eq!(min_pool(&f, &id).unwrap(), f);
        assert!(max_pool(&t(&[1.0]), &p).is_err());
    }

    #[test]
    fn pooling_2d_with_channels() {
        let f = Tensor::new(vec![2, 2, 3], (0..12).map(f64::from).collect()).unwrap();
        let p = PoolSpec::square(2, 1).unwrap();
        let out = max_pool(&f, &p).unwrap();
        assert_eq!(out.shape(), &[2, 1, 2]);
        assert_eq!(out.data(), &[4.0, 5.0, 10.0, 11.0]);
    }

    #[test]
    fn act_pool_examples() {
        let p = PoolSpec::new_1d(2, 1).unwrap();
        assert_eq!(act_pool(&t(&[-5.0, -1.0]), &p, 2.0).unwrap().data(), &[1.0]);
        let f = t(&[-1.0, 2.0, -3.0, 0.5]);
        assert_eq!(act_pool(&f, &p, 0.0).unwrap(), max_pool(&relu(&f), &p).unwrap());
    }

    #[test]
    fn prelu2_examples() {
        let f = t(&[-10.0, 3.0]);
        assert_eq!(prelu2(&f, 1.0, 0.01).unwrap().data(), &[-0.1, 3.0]);
        assert_eq!(prelu2(&f, 1.0, 0.0).unwrap(), relu(&f));
        assert_eq!(prelu2(&f, 2.0, 2.0).unwrap().data(), &[-20.0, 6.0]);
        assert!(prelu2(&f, 0.0, 1.0).is_err());
    }

    #[test]
    fn pos_neg_split_reconstructs() {
        let f = t(&[2.0, -3.0]);
        let (pos, neg) = pos_neg_split(&f);
        assert_eq!(pos.data(), &[2.0, 0.0]);
        assert_eq!(neg.data(), &[0.0, 3.0]);
        assert_eq!(pos.zip_map(&neg, |a, b| a - b).unwrap(), f);
    }

    #[test]
    fn selfdual_and_posneg_examples() {
        let p = PoolSpec::new_1d(2, 1).unwrap();
        let f = t(&[1.0, -2.0]);
        assert_eq!(selfdual_pool(&f, &p).unwrap().data(), &[-1.0]);
        assert_eq!(posneg_pool_param(&f, &p, 0.5, 2.0).unwrap().data(), &[1.0]);
        assert_eq!(posneg_pool_param(&f, &p, 1.0, 1.0).unwrap(), selfdual_pool(&f, &p).unwrap());
        let (pos, _) = pos_neg_split(&f);
        assert_eq!(posneg_pool_param(&f, &p, 0.0, 1.0).unwrap(), max_pool(&pos, &p).unwrap());
    }
}
