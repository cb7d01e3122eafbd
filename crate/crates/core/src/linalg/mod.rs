//! Numerical kernels: compressed sparse storage, a sparse LU for complex
//! shifted pencils, a dense Sylvester solver and adaptive quadrature.

pub mod ordering;
pub mod quad;
pub mod sparse;
pub mod sparse_lu;
pub mod sylvester;

pub use sparse::CsMatrix;
pub use sparse_lu::SparseLu;
pub use sylvester::{solve_lyapunov, solve_sylvester};

use nalgebra::DMatrix;

use crate::C64;

pub(crate) fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// Largest absolute entry.
pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
