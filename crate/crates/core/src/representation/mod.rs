//! Brute-force checks of the kernel/basis representation of increasing
//! translation-invariant operators, and max-min piecewise-linear algebra.
//!
//! The representation theorems are stated for upper semi-continuous
//! operators on infinite lattices; here they are verified only on finite
//! windows and finite level sets, where every operator is trivially
//! semi-continuous.

pub mod functions;
pub mod pl;
pub mod sets;

pub use functions::{function_operator_check, FunctionOperator, FunctionReport};
pub use pl::{dc_decompose, pl_eval, Affine, ConcaveMin, ConcaveSum, PLFunction};
pub use sets::{
    analyze, basis_extract, fixtures, kernel_enumerate, reconstruct_inf_dilations, reconstruct_sup_erosions,
    truncated_bounds, BasisSet, Config, OperatorTable, SetReport, Window,
};
