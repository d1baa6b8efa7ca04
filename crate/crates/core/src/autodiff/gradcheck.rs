//! Central finite differences, the oracle for every gradient test.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `(f(x + h e_k) − f(x − h e_k)) / 2h` for every coordinate `k`.
pub fn finite_difference_grad<T: Scalar>(f: impl Fn(&Tensor<T>) -> T, x: &Tensor<T>, h: T) -> Tensor<T> {
    assert!(h > T::zero(), "finite-difference step must be positive");
    let mut probe = x.clone();
    let mut grad = Tensor::zeros_like(x);
    let two_h = h + h;
    for k in 0..x.len() {
        let orig = x.data()[k];
        probe.data_mut()[k] = orig + h;
        let up = f(&probe);
        probe.data_mut()[k] = orig - h;
        let down = f(&probe);
        probe.data_mut()[k] = orig;
        grad.data_mut()[k] = (up - down) / two_h;
    }
    grad
}

/// Largest elementwise relative error `|a − n| / max(|a|, |n|)`.
///
/// Pairs whose magnitudes are both below `1e-8` contribute their absolute
/// difference instead, so exact zeros on both sides count as agreement.
pub fn relative_error<T: Scalar>(analytic: &Tensor<T>, numeric: &Tensor<T>) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape(), "gradient shapes differ");
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| pair_error(a.as_f64(), n.as_f64()))
        .fold(0.0, f64::max)
}

fn pair_error(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-8 {
        (a - n).abs()
    } else {
        (a - n).abs() / scale
    }
}

/// Outcome of comparing one analytic gradient to its finite-difference
/// estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub label: String,
    pub max_rel_error: f64,
    /// Flat index of the worst coordinate.
    pub worst_index: usize,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn compare<T: Scalar>(label: impl Into<String>, analytic: &Tensor<T>, numeric: &Tensor<T>) -> Self {
        let (worst_index, max_rel_error) = analytic
            .data()
            .iter()
            .zip(numeric.data())
            .map(|(&a, &n)| pair_error(a.as_f64(), n.as_f64()))
            .enumerate()
            .fold((0, 0.0), |best, (i, e)| if e > best.1 { (i, e) } else { best });
        Self {
            label: label.into(),
            max_rel_error,
            worst_index,
            checked: analytic.len(),
        }
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error <= tolerance
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_derivative() {
        let x = Tensor::<f64>::from_f64s(&[3.0]);
        let g = finite_difference_grad(|t| t.data().iter().map(|v| v * v).sum(), &x, 1e-5);
        assert!((g.item() - 6.0).abs() < 1e-8);
    }

    #[test]
    fn relu_away_from_kink() {
        let x = Tensor::<f64>::from_f64s(&[5.0]);
        let g = finite_difference_grad(|t| t.item().max(0.0), &x, 1e-5);
        assert!((g.item() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_slope_relu_negative_branch() {
        // max(β⁻ x, β⁺ x) with β⁺ = 1, β⁻ = 0.01 at x = −2.
        let x = Tensor::<f64>::from_f64s(&[-2.0]);
        let g = finite_difference_grad(|t| (0.01 * t.item()).max(t.item()), &x, 1e-5);
        assert!((g.item() - 0.01).abs() < 1e-9);
    }

    #[test]
    fn report_locates_worst_coordinate() {
        let a = Tensor::<f64>::from_f64s(&[1.0, 2.0, 0.0]);
        let n = Tensor::<f64>::from_f64s(&[1.0, 2.2, 0.0]);
        let r = GradCheckReport::compare("x", &a, &n);
        assert_eq!(r.worst_index, 1);
        assert!((r.max_rel_error - 0.2 / 2.2).abs() < 1e-12);
        assert!(!r.passes(1e-4));
    }
}
