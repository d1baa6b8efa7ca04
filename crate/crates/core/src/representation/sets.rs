//! Translation-invariant increasing set operators on a finite window.
//!
//! A configuration is a subset of the window encoded as a bitmask over the
//! window's row-major point order. An operator is known through its value
//! at the origin for every configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Config = u32;

/// Largest window for exhaustive sweeps: `2^25` configurations.
pub const MAX_WINDOW_BITS: usize = 25;

/// A finite set of lattice points `(row, col)` containing the origin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    points: Vec<[i64; 2]>,
    origin: usize,
}

impl Window {
    /// Points are stored sorted row-major.
    pub fn new(mut points: Vec<[i64; 2]>) -> Result<Self> {
        points.sort();
        points.dedup();
        if points.len() > MAX_WINDOW_BITS {
            return Err(Error::TooManyConfigurations {
                bits: points.len(),
                limit: MAX_WINDOW_BITS,
            });
        }
        let origin = points
            .iter()
            .position(|p| *p == [0, 0])
            .ok_or_else(|| Error::InvalidParameter("window must contain the origin".into()))?;
        Ok(Self { points, origin })
    }

    /// `(2r + 1) × (2r + 1)` square centred on the origin.
    pub fn square(radius: i64) -> Result<Self> {
        Self::new((-radius..=radius).flat_map(|a| (-radius..=radius).map(move |b| [a, b])).collect())
    }

    /// The origin and its four neighbours.
    pub fn cross5() -> Self {
        Self::new(vec![[-1, 0], [0, -1], [0, 0], [0, 1], [1, 0]]).expect("static window")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[i64; 2]] {
        &self.points
    }

    pub fn origin_bit(&self) -> Config {
        1 << self.origin
    }

    pub fn full(&self) -> Config {
        if self.len() == 32 {
            Config::MAX
        } else {
            (1 << self.len()) - 1
        }
    }

    pub fn configurations(&self) -> usize {
        1 << self.len()
    }

    pub fn bit(&self, point: [i64; 2]) -> Option<Config> {
        self.points.iter().position(|p| *p == point).map(|k| 1 << k)
    }

    /// Bitmask of `points`; fails if one lies outside the window.
    pub fn mask(&self, points: &[[i64; 2]]) -> Result<Config> {
        points.iter().try_fold(0, |acc, &p| {
            self.bit(p)
                .map(|b| acc | b)
                .ok_or_else(|| Error::InvalidParameter(format!("point {p:?} lies outside the window")))
        })
    }

    pub fn points_of(&self, config: Config) -> Vec<[i64; 2]> {
        (0..self.len()).filter(|k| config >> k & 1 == 1).map(|k| self.points[k]).collect()
    }

    /// Human-readable configuration, e.g. `{(0,0),(0,1)}`.
    pub fn describe(&self, config: Config) -> String {
        let items: Vec<String> = self.points_of(config).iter().map(|[a, b]| format!("({a},{b})")).collect();
        format!("{{{}}}", items.join(","))
    }
}

/// Truth table of a translation-invariant increasing set operator:
/// `table[X]` says whether the origin belongs to `Ψ(X)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorTable {
    window: Window,
    table: Vec<bool>,
    pub translation_invariant: bool,
}

impl OperatorTable {
    /// Tabulate `rule` on every configuration; rejects non-increasing rules
    /// with a witness pair.
    pub fn from_fn(window: Window, rule: impl Fn(Config) -> bool) -> Result<Self> {
        let table: Vec<bool> = (0..window.configurations() as Config).map(&rule).collect();
        let op = Self {
            window,
            table,
            translation_invariant: true,
        };
        op.check_increasing()?;
        Ok(op)
    }

    fn check_increasing(&self) -> Result<()> {
        for x in 0..self.window.configurations() as Config {
            if !self.table[x as usize] {
                continue;
            }
            for k in 0..self.window.len() {
                let y = x | 1 << k;
                if !self.table[y as usize] {
                    return Err(Error::InvalidParameter(format!(
                        "operator is not increasing: {} is in the kernel but its superset {} is not",
                        self.window.describe(x),
                        self.window.describe(y)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn eval(&self, x: Config) -> bool {
        self.table[x as usize]
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    /// `Ψ̄(X) = [Ψ(Xᶜ)]ᶜ`.
    pub fn dual(&self) -> Self {
        let full = self.window.full();
        Self {
            window: self.window.clone(),
            table: (0..self.window.configurations() as Config).map(|x| !self.eval(full & !x)).collect(),
            translation_invariant: self.translation_invariant,
        }
    }

    /// Pointwise order `self ≤ other` on every configuration.
    pub fn le(&self, other: &Self) -> bool {
        self.table.iter().zip(&other.table).all(|(&a, &b)| !a || b)
    }

    pub fn first_difference(&self, other: &Self) -> Option<Config> {
        self.table.iter().zip(&other.table).position(|(a, b)| a != b).map(|k| k as Config)
    }

    pub fn first_violation_of_le(&self, other: &Self) -> Option<Config> {
        self.table.iter().zip(&other.table).position(|(&a, &b)| a && !b).map(|k| k as Config)
    }
}

/// The fixture operators, each given by its rule at the origin.
pub mod fixtures {
    use super::*;

    /// `0 ∈ X ⊖ B ⟺ B ⊆ X`.
    pub fn erosion(window: Window, se: &[[i64; 2]]) -> Result<OperatorTable> {
        let b = window.mask(se)?;
        OperatorTable::from_fn(window, |x| x & b == b)
    }

    /// `0 ∈ X ⊕ B ⟺ X ∩ B̌ ≠ ∅`.
    pub fn dilation(window: Window, se: &[[i64; 2]]) -> Result<OperatorTable> {
        let reflected: Vec<[i64; 2]> = se.iter().map(|[a, b]| [-a, -b]).collect();
        let bt = window.mask(&reflected)?;
        OperatorTable::from_fn(window, |x| x & bt != 0)
    }

    /// `0 ∈ (X ⊖ B) ⊕ B ⟺ ∃ b ∈ B: B − b ⊆ X`.
    pub fn opening(window: Window, se: &[[i64; 2]]) -> Result<OperatorTable> {
        let shifted = se
            .iter()
            .map(|[a, b]| window.mask(&se.iter().map(|[c, d]| [c - a, d - b]).collect::<Vec<_>>()))
            .collect::<Result<Vec<Config>>>()?;
        OperatorTable::from_fn(window, |x| shifted.iter().any(|&m| x & m == m))
    }

    /// Origin belongs to the output when at least `k` window points are set.
    pub fn rank(window: Window, k: u32) -> Result<OperatorTable> {
        OperatorTable::from_fn(window, |x| x.count_ones() >= k)
    }

    /// Majority vote over the window (3 of 5 on the cross).
    pub fn median(window: Window) -> Result<OperatorTable> {
        let k = window.len() as u32 / 2 + 1;
        rank(window, k)
    }

    pub fn identity(window: Window) -> Result<OperatorTable> {
        let o = window.origin_bit();
        OperatorTable::from_fn(window, |x| x & o != 0)
    }
}

/// Minimal elements of a kernel: an antichain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSet<E> {
    pub elements: Vec<E>,
}

impl<E> BasisSet<E> {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// All configurations `A` with `0 ∈ Ψ(A)`, in increasing mask order.
pub fn kernel_enumerate(op: &OperatorTable) -> Vec<Config> {
    (0..op.window.configurations() as Config).filter(|&x| op.eval(x)).collect()
}

/// Minimal kernel sets under inclusion.
pub fn basis_extract(kernel: &[Config]) -> BasisSet<Config> {
    let mut sorted = kernel.to_vec();
    sorted.sort_by_key(|x| (x.count_ones(), *x));
    let mut elements: Vec<Config> = Vec::new();
    for x in sorted {
        if !elements.iter().any(|&m| m & !x == 0) {
            elements.push(x);
        }
    }
    BasisSet { elements }
}

/// `X ↦ ⋃_M X ⊖ M`, at the origin: some `M ⊆ X`.
pub fn sup_of_erosions(window: &Window, basis: &[Config]) -> OperatorTable {
    OperatorTable {
        window: window.clone(),
        table: (0..window.configurations() as Config).map(|x| basis.iter().any(|&m| m & !x == 0)).collect(),
        translation_invariant: true,
    }
}

/// `X ↦ ⋂_N X ⊕ Ň`, at the origin: `X` meets every `N`.
pub fn inf_of_dilations(window: &Window, dual_basis: &[Config]) -> OperatorTable {
    OperatorTable {
        window: window.clone(),
        table: (0..window.configurations() as Config).map(|x| dual_basis.iter().all(|&n| n & x != 0)).collect(),
        translation_invariant: true,
    }
}

fn verify(op: &OperatorTable, rebuilt: OperatorTable) -> Result<OperatorTable> {
    match op.first_difference(&rebuilt) {
        None => Ok(rebuilt),
        Some(x) => Err(Error::ReconstructionMismatch {
            witness: op.window.describe(x),
        }),
    }
}

/// Rebuild `op` as a union of erosions over `basis` and check it matches.
pub fn reconstruct_sup_erosions(op: &OperatorTable, basis: &BasisSet<Config>) -> Result<OperatorTable> {
    verify(op, sup_of_erosions(&op.window, &basis.elements))
}

/// Basis of the dual operator.
pub fn dual_basis(op: &OperatorTable) -> BasisSet<Config> {
    basis_extract(&kernel_enumerate(&op.dual()))
}

/// Rebuild `op` as an intersection of dilations over the dual basis and
/// check it matches.
pub fn reconstruct_inf_dilations(op: &OperatorTable) -> Result<OperatorTable> {
    verify(op, inf_of_dilations(&op.window, &dual_basis(op).elements))
}

/// Lower and upper bounds from partial bases: `Ψ_l ≤ Ψ ≤ Ψ_u`.
pub fn truncated_bounds(
    op: &OperatorTable,
    subbasis: &[Config],
    dual_subbasis: &[Config],
) -> Result<(OperatorTable, OperatorTable)> {
    let basis = basis_extract(&kernel_enumerate(op));
    let dual = dual_basis(op);
    for (sub, full, what) in [(subbasis, &basis, "basis"), (dual_subbasis, &dual, "dual basis")] {
        if let Some(x) = sub.iter().find(|x| !full.elements.contains(x)) {
            return Err(Error::InvalidParameter(format!(
                "{} is not an element of the {what}",
                op.window.describe(*x)
            )));
        }
    }
    Ok((sup_of_erosions(&op.window, subbasis), inf_of_dilations(&op.window, dual_subbasis)))
}

/// Summary of the representation checks for one operator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetReport {
    pub window: Vec<[i64; 2]>,
    pub configurations: usize,
    pub kernel_size: usize,
    pub basis: Vec<Vec<[i64; 2]>>,
    pub dual_basis: Vec<Vec<[i64; 2]>>,
    pub sup_of_erosions: bool,
    pub inf_of_dilations: bool,
    /// Every subset of the basis (resp. dual basis) checked as a bound.
    pub truncated_bounds: bool,
    pub truncations_checked: usize,
    /// A configuration where a proper sub-basis gives a strictly smaller
    /// operator, when one exists.
    pub strict_lower_witness: Option<String>,
    pub witnesses: Vec<String>,
}

impl SetReport {
    pub fn passed(&self) -> bool {
        self.sup_of_erosions && self.inf_of_dilations && self.truncated_bounds
    }
}

/// Bases larger than this have their truncations sampled by prefix only.
const EXHAUSTIVE_SUBSETS: usize = 16;

fn subsets(elements: &[Config]) -> Vec<Vec<Config>> {
    if elements.len() <= EXHAUSTIVE_SUBSETS {
        (0..1usize << elements.len())
            .map(|s| (0..elements.len()).filter(|k| s >> k & 1 == 1).map(|k| elements[k]).collect())
            .collect()
    } else {
        (0..=elements.len()).map(|k| elements[..k].to_vec()).collect()
    }
}

/// Run kernel and basis extraction, both reconstructions and every
/// truncated bound.
pub fn analyze(op: &OperatorTable) -> SetReport {
    let w = &op.window;
    let kernel = kernel_enumerate(op);
    let basis = basis_extract(&kernel);
    let dual = dual_basis(op);
    let mut witnesses = Vec::new();
    let sup_ok = match reconstruct_sup_erosions(op, &basis) {
        Ok(_) => true,
        Err(e) => {
            witnesses.push(format!("sup of erosions: {e}"));
            false
        }
    };
    let inf_ok = match reconstruct_inf_dilations(op) {
        Ok(_) => true,
        Err(e) => {
            witnesses.push(format!("inf of dilations: {e}"));
            false
        }
    };
    let mut bounds_ok = true;
    let mut checked = 0;
    let mut strict = None;
    for sub in subsets(&basis.elements) {
        let lower = sup_of_erosions(w, &sub);
        checked += 1;
        if let Some(x) = lower.first_violation_of_le(op) {
            bounds_ok = false;
            witnesses.push(format!("lower bound exceeds operator at {}", w.describe(x)));
        } else if strict.is_none() && !sub.is_empty() {
            strict = op.first_difference(&lower).map(|x| w.describe(x));
        }
    }
    for sub in subsets(&dual.elements) {
        let upper = inf_of_dilations(w, &sub);
        checked += 1;
        if let Some(x) = op.first_violation_of_le(&upper) {
            bounds_ok = false;
            witnesses.push(format!("operator exceeds upper bound at {}", w.describe(x)));
        }
    }
    SetReport {
        window: w.points.clone(),
        configurations: w.configurations(),
        kernel_size: kernel.len(),
        basis: basis.elements.iter().map(|&m| w.points_of(m)).collect(),
        dual_basis: dual.elements.iter().map(|&m| w.points_of(m)).collect(),
        sup_of_erosions: sup_ok,
        inf_of_dilations: inf_ok,
        truncated_bounds: bounds_ok,
        truncations_checked: checked,
        strict_lower_witness: strict,
        witnesses,
    }
}
