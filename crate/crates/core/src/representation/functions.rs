//! Translation-invariant increasing operators on quantized functions.
//!
//! Functions live on a few integer points around the origin and take
//! integer levels. Kernel and basis functions range over the wider level
//! set `{−∞} ∪ [−s, s]`, where `s` is the spread of the input levels;
//! `−∞` marks points a basis function ignores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::sets::BasisSet;

/// The increasing operator, evaluated at the origin. It receives values in
/// the extended levels, including `±∞`.
pub type Rule = Box<dyn Fn(&[f64]) -> f64>;

pub struct FunctionOperator {
    /// Domain points, one coordinate each.
    pub domain: Vec<i64>,
    pub origin: usize,
    pub rule: Rule,
}

impl FunctionOperator {
    pub fn new(domain: Vec<i64>, rule: Rule) -> Result<Self> {
        if domain.is_empty() || domain.len() > 4 {
            return Err(Error::InvalidParameter("function domain must have 1 to 4 points".into()));
        }
        let origin = domain
            .iter()
            .position(|&p| p == 0)
            .ok_or_else(|| Error::InvalidParameter("domain must contain the origin".into()))?;
        Ok(Self { domain, origin, rule })
    }

    /// `min` over the domain: flat erosion by the whole domain.
    pub fn flat_erosion(domain: Vec<i64>) -> Result<Self> {
        Self::new(domain, Box::new(|f| f.iter().copied().fold(f64::INFINITY, f64::min)))
    }

    /// `max` over the domain: flat dilation by the (symmetric) domain.
    pub fn flat_dilation(domain: Vec<i64>) -> Result<Self> {
        Self::new(domain, Box::new(|f| f.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
    }

    pub fn identity(domain: Vec<i64>) -> Result<Self> {
        let op = Self::new(domain, Box::new(|_| 0.0))?;
        let o = op.origin;
        Ok(Self {
            rule: Box::new(move |f| f[o]),
            ..op
        })
    }

    pub fn eval(&self, f: &[f64]) -> f64 {
        (self.rule)(f)
    }

    /// `Ψ̄(f) = −Ψ(−f)`.
    pub fn dual(&self) -> impl Fn(&[f64]) -> f64 + '_ {
        move |f| {
            let neg: Vec<f64> = f.iter().map(|v| -v).collect();
            -self.eval(&neg)
        }
    }
}

/// Every function from `domain_len` points to `levels`, in odometer order.
fn all_functions(domain_len: usize, levels: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..domain_len {
        out = out
            .into_iter()
            .flat_map(|f| {
                levels.iter().map(move |&l| {
                    let mut g = f.clone();
                    g.push(l);
                    g
                })
            })
            .collect();
    }
    out
}

fn le(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// Minimal elements under the pointwise order.
pub fn function_basis(kernel: &[Vec<f64>]) -> BasisSet<Vec<f64>> {
    let mut sorted: Vec<&Vec<f64>> = kernel.iter().collect();
    let key = |f: &Vec<f64>| -> (usize, f64) {
        let finite: Vec<f64> = f.iter().copied().filter(|v| v.is_finite()).collect();
        (finite.len(), finite.iter().sum())
    };
    sorted.sort_by(|a, b| key(a).partial_cmp(&key(b)).expect("finite keys"));
    let mut elements: Vec<Vec<f64>> = Vec::new();
    for f in sorted {
        if !elements.iter().any(|g| le(g, f)) {
            elements.retain(|g| !le(f, g));
            elements.push(f.clone());
        }
    }
    BasisSet { elements }
}

/// `(f ⊖ g)(0) = min_y f(y) − g(y)` over points where `g > −∞`.
pub fn erosion_at_origin(f: &[f64], g: &[f64]) -> f64 {
    f.iter().zip(g).filter(|(_, g)| g.is_finite()).map(|(f, g)| f - g).fold(f64::INFINITY, f64::min)
}

/// `(f ⊕ h)(0) = max_z f(z) + h(z)` over points where `h > −∞`.
pub fn dilation_at_origin(f: &[f64], h: &[f64]) -> f64 {
    f.iter().zip(h).filter(|(_, h)| h.is_finite()).map(|(f, h)| f + h).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionReport {
    pub domain: Vec<i64>,
    pub levels: Vec<i64>,
    pub functions_checked: usize,
    pub kernel_size: usize,
    /// Basis functions; `None` marks `−∞`.
    pub basis: Vec<Vec<Option<i64>>>,
    pub dual_basis: Vec<Vec<Option<i64>>>,
    pub sup_form: bool,
    pub inf_form: bool,
}

fn export(basis: &BasisSet<Vec<f64>>) -> Vec<Vec<Option<i64>>> {
    basis
        .elements
        .iter()
        .map(|g| g.iter().map(|v| v.is_finite().then_some(*v as i64)).collect())
        .collect()
}

/// Extract the kernel `{g : Ψ(g)(0) ≥ 0}` and its basis on the extended
/// level set, then check `Ψ(f) = sup_g (f ⊖ g)(0)` and, through the dual
/// operator, `Ψ(f) = inf_h (f ⊕ h)(0)` on every function with values in
/// `levels`.
pub fn function_operator_check(op: &FunctionOperator, levels: &[i64]) -> Result<FunctionReport> {
    if levels.is_empty() || levels.len() > 7 {
        return Err(Error::InvalidParameter("use between 1 and 7 levels".into()));
    }
    let input_levels: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
    let spread = levels.iter().max().unwrap() - levels.iter().min().unwrap();
    let mut extended = vec![f64::NEG_INFINITY];
    extended.extend((-spread..=spread).map(|l| l as f64));

    let d = op.domain.len();
    let inputs = all_functions(d, &input_levels);
    for f in &inputs {
        for k in 0..d {
            for &l in &input_levels {
                if l > f[k] {
                    let mut g = f.clone();
                    g[k] = l;
                    if op.eval(&g) < op.eval(f) {
                        return Err(Error::InvalidParameter(format!("operator is not increasing at {f:?} ≤ {g:?}")));
                    }
                }
            }
        }
    }

    let candidates = all_functions(d, &extended);
    let kernel: Vec<Vec<f64>> = candidates.iter().filter(|g| op.eval(g) >= 0.0).cloned().collect();
    let basis = function_basis(&kernel);
    let dual = op.dual();
    let dual_kernel: Vec<Vec<f64>> = candidates.iter().filter(|g| dual(g) >= 0.0).cloned().collect();
    let dual_basis = function_basis(&dual_kernel);

    for f in &inputs {
        let want = op.eval(f);
        let sup = basis.elements.iter().map(|g| erosion_at_origin(f, g)).fold(f64::NEG_INFINITY, f64::max);
        let inf = dual_basis.elements.iter().map(|h| dilation_at_origin(f, h)).fold(f64::INFINITY, f64::min);
        for (form, got) in [("sup of erosions", sup), ("inf of dilations", inf)] {
            if got != want {
                return Err(Error::ReconstructionMismatch {
                    witness: format!("{form} gives {got} instead of {want} for f = {f:?}"),
                });
            }
        }
    }
    Ok(FunctionReport {
        domain: op.domain.clone(),
        levels: levels.to_vec(),
        functions_checked: inputs.len(),
        kernel_size: kernel.len(),
        basis: export(&basis),
        dual_basis: export(&dual_basis),
        sup_form: true,
        inf_form: true,
    })
}
