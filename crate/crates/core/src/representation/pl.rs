//! Max-min polynomials of affine functions and their difference-of-concave
//! form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub slope: Vec<f64>,
    pub intercept: f64,
}

impl Affine {
    pub fn new(slope: Vec<f64>, intercept: f64) -> Self {
        Self { slope, intercept }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.slope.iter().zip(x).fold(self.intercept, |acc, (b, v)| acc + b * v)
    }

    /// Tangent plane `⟨∇f(t), x − t⟩ + f(t)`.
    pub fn tangent(t: &[f64], value: f64, grad: &[f64]) -> Self {
        let offset: f64 = grad.iter().zip(t).map(|(g, t)| g * t).sum();
        Self::new(grad.to_vec(), value - offset)
    }
}

/// `x ↦ max_k min_{j ∈ K_k} g_j(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PLFunction {
    components: Vec<Affine>,
    families: Vec<Vec<usize>>,
}

impl PLFunction {
    /// `families` index into `components` (0-based).
    pub fn new(components: Vec<Affine>, families: Vec<Vec<usize>>) -> Result<Self> {
        let dim = components.first().map(|c| c.slope.len());
        if components.iter().any(|c| Some(c.slope.len()) != dim) {
            return Err(Error::InvalidParameter("components must share one dimension".into()));
        }
        if families.is_empty() || families.iter().any(|k| k.is_empty()) {
            return Err(Error::InvalidParameter("families must be non-empty".into()));
        }
        if let Some(&j) = families.iter().flatten().find(|&&j| j >= components.len()) {
            return Err(Error::InvalidParameter(format!(
                "family references component {j} of {}",
                components.len()
            )));
        }
        Ok(Self { components, families })
    }

    /// Maximum of the tangent planes of a convex function at `points`.
    pub fn from_tangents(points: &[Vec<f64>], f: impl Fn(&[f64]) -> f64, grad: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let components: Vec<Affine> = points.iter().map(|t| Affine::tangent(t, f(t), &grad(t))).collect();
        let families = (0..components.len()).map(|j| vec![j]).collect();
        Self::new(components, families)
    }

    pub fn components(&self) -> &[Affine] {
        &self.components
    }

    pub fn families(&self) -> &[Vec<usize>] {
        &self.families
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.slope.len())
    }

    /// `h_k(x) = min_{j ∈ K_k} g_j(x)`.
    pub fn family_min(&self, k: usize, x: &[f64]) -> f64 {
        self.families[k]
            .iter()
            .map(|&j| self.components[j].eval(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of a component whose value equals `f(x)` exactly.
    pub fn selected_component(&self, x: &[f64]) -> Option<usize> {
        let v = pl_eval(self, x);
        self.components.iter().position(|c| c.eval(x) == v)
    }
}

pub fn pl_eval(f: &PLFunction, x: &[f64]) -> f64 {
    (0..f.families.len()).map(|k| f.family_min(k, x)).fold(f64::NEG_INFINITY, f64::max)
}

/// `Σ_k h_k`: a sum of concave minima of affine functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcaveSum {
    pub terms: Vec<Vec<Affine>>,
}

impl ConcaveSum {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.iter().map(|a| a.eval(x)).fold(f64::INFINITY, f64::min))
            .sum()
    }
}

/// `min_i Σ_{k≠i} h_k`; zero when there is only one family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcaveMin {
    pub sums: Vec<ConcaveSum>,
}

impl ConcaveMin {
    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.sums.iter().all(|s| s.terms.is_empty()) {
            return 0.0;
        }
        self.sums.iter().map(|s| s.eval(x)).fold(f64::INFINITY, f64::min)
    }
}

/// Split `f = max_k h_k` as `Σ_k h_k − min_i Σ_{k≠i} h_k`, both concave.
pub fn dc_decompose(f: &PLFunction) -> (ConcaveSum, ConcaveMin) {
    let h: Vec<Vec<Affine>> = f
        .families
        .iter()
        .map(|k| k.iter().map(|&j| f.components[j].clone()).collect())
        .collect();
    let sums = (0..h.len())
        .map(|i| ConcaveSum {
            terms: h.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, t)| t.clone()).collect(),
        })
        .collect();
    (ConcaveSum { terms: h }, ConcaveMin { sums })
}
