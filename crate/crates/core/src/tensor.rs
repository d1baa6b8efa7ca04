//! Dense row-major tensors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense multidimensional array stored in row-major order.
///
/// Invariant: `shape.iter().product() == data.len()`, every extent is
/// positive. A rank-0 tensor (empty shape) holds exactly one scalar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidShape {
                shape,
                reason: "extents must be positive".into(),
            });
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidShape {
                shape,
                reason: format!("expects {expected} elements, got {}", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    /// 1-D tensor from a slice.
    pub fn from_slice(values: &[T]) -> Self {
        assert!(!values.is_empty(), "tensor must hold at least one value");
        Self {
            shape: vec![values.len()],
            data: values.to_vec(),
        }
    }

    /// 1-D tensor from `f64` literals, converted to `T`.
    pub fn from_f64s(values: &[f64]) -> Self {
        let data: Vec<T> = values.iter().map(|&v| T::lit(v)).collect();
        Self::from_slice(&data)
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let n: usize = shape.iter().product();
        Self::new(shape.to_vec(), vec![value; n]).expect("positive extents")
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self::full(&other.shape, T::zero())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.data.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.contains(&0) {
            return Err(Error::ShapeMismatch {
                expected: self.shape,
                found: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                found: other.shape.clone(),
            });
        }
        Ok(())
    }

    /// In-place `self += other`; shapes must agree.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn neg(&self) -> Self {
        self.map(|v| -v)
    }

    /// Sum of all elements, accumulated left to right.
    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    /// Pointwise supremum `self ∨ other`.
    pub fn sup(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| if b > a { b } else { a })
    }

    /// Pointwise infimum `self ∧ other`.
    pub fn inf(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| if b < a { b } else { a })
    }

    /// `self ≤ other` in the pointwise order.
    pub fn le(&self, other: &Self) -> bool {
        self.shape == other.shape && self.data.iter().zip(&other.data).all(|(a, b)| a <= b)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), |m, d| if d > m { d } else { m })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Convert element type.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// How a tensor splits into independent planes and a trailing spatial block.
///
/// The last `spatial_rank` axes are spatial; every leading axis is folded
/// into the plane count. For a `[batch, channels, h, w]` tensor with two
/// spatial axes, plane `p` belongs to channel `p % channels`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlaneLayout {
    pub planes: usize,
    pub extent: Vec<usize>,
}

impl PlaneLayout {
    pub fn of(shape: &[usize], spatial_rank: usize) -> Result<Self> {
        if spatial_rank == 0 || spatial_rank > 2 || shape.len() < spatial_rank {
            return Err(Error::InvalidShape {
                shape: shape.to_vec(),
                reason: format!("cannot take {spatial_rank} trailing spatial axes"),
            });
        }
        let split = shape.len() - spatial_rank;
        Ok(Self {
            planes: shape[..split].iter().product(),
            extent: shape[split..].to_vec(),
        })
    }

    pub fn plane_len(&self) -> usize {
        self.extent.iter().product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inconsistent_data_length() {
        assert!(Tensor::<f64>::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(Tensor::<f64>::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn scalar_has_one_element() {
        let t = Tensor::scalar(3.0f64);
        assert_eq!(t.rank(), 0);
        assert_eq!(t.item(), 3.0);
    }

    #[test]
    fn plane_layout_folds_leading_axes() {
        let l = PlaneLayout::of(&[4, 3, 5, 6], 2).unwrap();
        assert_eq!(l.planes, 12);
        assert_eq!(l.extent, vec![5, 6]);
        assert_eq!(PlaneLayout::of(&[7], 1).unwrap().planes, 1);
        assert!(PlaneLayout::of(&[7], 2).is_err());
    }
}
