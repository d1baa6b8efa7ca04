use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Finite window of lattice offsets with an additive weight per offset.
///
/// Offsets are 1-D (`[y]`) or 2-D (`[row, col]`). A weight of `-∞` marks
/// padding that never contributes; every other weight is finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuringFunction<T> {
    offsets: Vec<Vec<i64>>,
    weights: Vec<T>,
    pub learnable: bool,
}

impl<T: Scalar> StructuringFunction<T> {
    pub fn new(offsets: Vec<Vec<i64>>, weights: Vec<T>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::InvalidParameter("structuring function needs at least one offset".into()));
        }
        let rank = offsets[0].len();
        if !(1..=2).contains(&rank) || offsets.iter().any(|o| o.len() != rank) {
            return Err(Error::InvalidParameter("offsets must all be 1-D or all be 2-D".into()));
        }
        if offsets.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} offsets but {} weights",
                offsets.len(),
                weights.len()
            )));
        }
        for (i, o) in offsets.iter().enumerate() {
            if offsets[..i].contains(o) {
                return Err(Error::InvalidParameter(format!("duplicate offset {o:?}")));
            }
        }
        if weights.iter().any(|w| w.is_nan() || *w == T::infinity()) {
            return Err(Error::InvalidParameter("weights must be finite or -inf".into()));
        }
        Ok(Self {
            offsets,
            weights,
            learnable: false,
        })
    }

    /// All-zero weights over `offsets`.
    pub fn flat(offsets: Vec<Vec<i64>>) -> Result<Self> {
        let n = offsets.len();
        Self::new(offsets, vec![T::zero(); n])
    }

    /// Flat 1-D window `{lo, ..., hi}`.
    pub fn flat_1d(lo: i64, hi: i64) -> Self {
        Self::flat((lo..=hi).map(|y| vec![y]).collect()).expect("non-empty range")
    }

    /// 1-D structuring function from `(offset, weight)` pairs.
    pub fn from_pairs_1d(pairs: &[(i64, f64)]) -> Result<Self> {
        Self::new(
            pairs.iter().map(|&(y, _)| vec![y]).collect(),
            pairs.iter().map(|&(_, w)| T::lit(w)).collect(),
        )
    }

    /// Flat window of window positions `[0, R)` per axis, row-major; this is
    /// the structuring function that turns a pooled dilation into max-pooling.
    pub fn flat_window(window: &[usize]) -> Self {
        let offsets = match *window {
            [r] => (0..r as i64).map(|u| vec![u]).collect(),
            [rh, rw] => (0..rh as i64)
                .flat_map(|a| (0..rw as i64).map(move |b| vec![a, b]))
                .collect(),
            _ => panic!("window must be 1-D or 2-D"),
        };
        Self::flat(offsets).expect("non-empty window")
    }

    /// The single offset `0` with weight 0.
    pub fn identity(rank: usize) -> Self {
        Self::flat(vec![vec![0; rank]]).expect("one offset")
    }

    pub fn with_learnable(mut self, learnable: bool) -> Self {
        self.learnable = learnable;
        self
    }

    pub fn rank(&self) -> usize {
        self.offsets[0].len()
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn is_flat(&self) -> bool {
        self.weights.iter().all(|w| *w == T::zero())
    }

    /// Offsets as `(row, col)` pairs; 1-D offsets live on row 0.
    pub(crate) fn offsets_2d(&self) -> Vec<(i64, i64)> {
        self.offsets
            .iter()
            .map(|o| match o.as_slice() {
                [y] => (0, *y),
                [a, b] => (*a, *b),
                _ => unreachable!("validated rank"),
            })
            .collect()
    }

    /// Transpose `ǧ(y) = g(−y)`.
    pub fn transpose(&self) -> Self {
        Self {
            offsets: self.offsets.iter().map(|o| o.iter().map(|v| -v).collect()).collect(),
            weights: self.weights.clone(),
            learnable: self.learnable,
        }
    }

    /// Replace the weights, keeping the offsets.
    pub fn with_weights(&self, weights: Vec<T>) -> Result<Self> {
        Self::new(self.offsets.clone(), weights).map(|s| s.with_learnable(self.learnable))
    }
}

/// Pooling window extent `R` and stride `K` per spatial axis (1-D or 2-D).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    window: Vec<usize>,
    stride: Vec<usize>,
}

impl PoolSpec {
    pub fn new(window: Vec<usize>, stride: Vec<usize>) -> Result<Self> {
        if window.is_empty() || window.len() > 2 || window.len() != stride.len() {
            return Err(Error::InvalidParameter(format!(
                "pool window {window:?} and stride {stride:?} must share rank 1 or 2"
            )));
        }
        if window.iter().chain(&stride).any(|&v| v == 0) {
            return Err(Error::InvalidParameter("pool window and stride must be >= 1".into()));
        }
        Ok(Self { window, stride })
    }

    pub fn new_1d(window: usize, stride: usize) -> Result<Self> {
        Self::new(vec![window], vec![stride])
    }

    /// Square `R × R` window with stride `K` on both axes.
    pub fn square(window: usize, stride: usize) -> Result<Self> {
        Self::new(vec![window, window], vec![stride, stride])
    }

    pub fn rank(&self) -> usize {
        self.window.len()
    }

    pub fn window(&self) -> &[usize] {
        &self.window
    }

    pub fn stride(&self) -> &[usize] {
        &self.stride
    }

    pub fn window_len(&self) -> usize {
        self.window.iter().product()
    }

    /// `n′ = ⌊(n − R) / K⌋ + 1` per axis.
    pub fn output_extent(&self, extent: &[usize]) -> Result<Vec<usize>> {
        if extent.len() != self.rank() || extent.iter().zip(&self.window).any(|(&n, &r)| r > n) {
            return Err(Error::WindowTooLarge {
                window: self.window.clone(),
                extent: extent.to_vec(),
            });
        }
        Ok(extent
            .iter()
            .zip(&self.window)
            .zip(&self.stride)
            .map(|((&n, &r), &k)| (n - r) / k + 1)
            .collect())
    }

    /// `(rows, cols)` window and stride, with 1-D specs on a single row.
    pub(crate) fn as_2d(&self) -> ((usize, usize), (usize, usize)) {
        match (self.window.as_slice(), self.stride.as_slice()) {
            ([r], [k]) => ((1, *r), (1, *k)),
            ([rh, rw], [kh, kw]) => ((*rh, *rw), (*kh, *kw)),
            _ => unreachable!("validated rank"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_offsets() {
        assert!(StructuringFunction::<f64>::flat(vec![vec![0], vec![0]]).is_err());
        assert!(StructuringFunction::<f64>::flat(vec![vec![0], vec![0, 1]]).is_err());
    }

    #[test]
    fn output_extent_formula() {
        let p = PoolSpec::new_1d(2, 2).unwrap();
        assert_eq!(p.output_extent(&[4]).unwrap(), vec![2]);
        assert_eq!(p.output_extent(&[5]).unwrap(), vec![2]);
        let p = PoolSpec::square(3, 2).unwrap();
        assert_eq!(p.output_extent(&[7, 8]).unwrap(), vec![3, 3]);
        assert!(PoolSpec::new_1d(5, 1).unwrap().output_extent(&[4]).is_err());
        assert!(PoolSpec::new_1d(0, 1).is_err());
    }

    #[test]
    fn flat_window_enumerates_row_major() {
        let s = StructuringFunction::<f64>::flat_window(&[2, 2]);
        assert_eq!(s.offsets(), &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }
}
