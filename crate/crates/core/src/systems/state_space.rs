use std::path::Path;

use nalgebra::DMatrix;

use super::FrequencySystem;
use crate::error::{Error, Result};
use crate::linalg::ordering::{reverse_cuthill_mckee, symmetric_adjacency};
use crate::linalg::sparse_lu::{SingularPivot, SparseLu, SparsePattern};
use crate::linalg::{to_complex, CsMatrix};
use crate::{matrix_market, TransferMatrix, C64};

/// Relative pivot size below which a shifted pencil is declared singular.
const SINGULAR_RTOL: f64 = 1e-13;
const PIVOT_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateMatrix {
    Dense(DMatrix<f64>),
    Sparse(CsMatrix),
}

impl StateMatrix {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            StateMatrix::Dense(m) => m.shape(),
            StateMatrix::Sparse(m) => (m.nrows(), m.ncols()),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            StateMatrix::Dense(m) => m.clone(),
            StateMatrix::Sparse(m) => m.to_dense(),
        }
    }

    pub fn to_sparse(&self) -> CsMatrix {
        match self {
            StateMatrix::Dense(m) => CsMatrix::from_dense(m),
            StateMatrix::Sparse(m) => m.clone(),
        }
    }

    /// `M X`.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            StateMatrix::Dense(m) => m * x,
            StateMatrix::Sparse(m) => {
                let mut out = DMatrix::zeros(m.nrows(), x.ncols());
                for j in 0..x.ncols() {
                    let col: Vec<f64> = x.column(j).iter().copied().collect();
                    out.column_mut(j).copy_from_slice(&m.mul_vec(&col));
                }
                out
            }
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            StateMatrix::Dense(m) => {
                let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                (m - m.transpose()).iter().all(|v| v.abs() <= 1e-14 * scale)
            }
            StateMatrix::Sparse(m) => m.is_symmetric(),
        }
    }
}

/// Precomputed union pattern of `E` and `A` plus a fill-reducing order.
#[derive(Debug, Clone)]
struct SparsePencil {
    pattern: SparsePattern,
    e_vals: Vec<f64>,
    a_vals: Vec<f64>,
    order: Vec<usize>,
}

impl SparsePencil {
    fn new(e: &CsMatrix, a: &CsMatrix) -> Self {
        let n = a.nrows();
        let union = CsMatrix::from_triplets(
            n,
            n,
            e.triplets().map(|(r, c, _)| (r, c, 0.0)).chain(a.triplets().map(|(r, c, _)| (r, c, 0.0))),
        )
        .expect("same dimensions");
        let pattern = SparsePattern {
            n,
            col_ptr: union.col_ptr().to_vec(),
            row_idx: union.row_idx().to_vec(),
        };
        let scatter = |m: &CsMatrix| {
            let mut vals = vec![0.0; pattern.row_idx.len()];
            for c in 0..n {
                let slots = pattern.col_ptr[c]..pattern.col_ptr[c + 1];
                for (r, v) in m.column(c) {
                    let k = pattern.row_idx[slots.clone()]
                        .binary_search(&r)
                        .expect("entry belongs to the union pattern");
                    vals[slots.start + k] += v;
                }
            }
            vals
        };
        let e_vals = scatter(e);
        let a_vals = scatter(a);
        let adj = symmetric_adjacency(n, &pattern.col_ptr, &pattern.row_idx);
        let order = reverse_cuthill_mckee(&adj);
        Self {
            pattern,
            e_vals,
            a_vals,
            order,
        }
    }

    fn factor(&self, omega: f64) -> Result<SparseLu> {
        self.factor_combination(C64::new(0.0, omega), C64::new(-1.0, 0.0))
            .map_err(|_| Error::SingularShift { omega })
    }

    /// LU of `se·E + sa·A`.
    fn factor_combination(&self, se: C64, sa: C64) -> std::result::Result<SparseLu, SingularPivot> {
        let values: Vec<C64> = self
            .e_vals
            .iter()
            .zip(&self.a_vals)
            .map(|(&e, &a)| se * e + sa * a)
            .collect();
        let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        SparseLu::factor(&self.pattern, &values, &self.order, PIVOT_THRESHOLD, SINGULAR_RTOL * scale)
    }
}

/// `E ẋ = A x + B u`, `y = C x`, evaluated as `C (iωE − A)⁻¹ B`.
#[derive(Debug, Clone)]
pub struct DescriptorStateSpace {
    e: StateMatrix,
    a: StateMatrix,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    pencil: Option<SparsePencil>,
}

impl DescriptorStateSpace {
    /// Validates dimensions. Sparse storage is used when `A` is sparse; a dense
    /// `E` next to a sparse `A` is converted.
    pub fn new(e: StateMatrix, a: StateMatrix, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let (n, n2) = a.shape();
        if n != n2 {
            return Err(Error::dim(format!("A is {n}x{n2}, expected square")));
        }
        if e.shape() != (n, n) {
            return Err(Error::dim(format!("E is {:?}, A is {n}x{n}", e.shape())));
        }
        if b.nrows() != n {
            return Err(Error::dim(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::dim(format!("C has {} columns, expected {n}", c.ncols())));
        }
        let (e, a, pencil) = match (e, a) {
            (e, StateMatrix::Sparse(a)) => {
                let e = e.to_sparse();
                let pencil = SparsePencil::new(&e, &a);
                (StateMatrix::Sparse(e), StateMatrix::Sparse(a), Some(pencil))
            }
            (e, a @ StateMatrix::Dense(_)) => (StateMatrix::Dense(e.to_dense()), a, None),
        };
        Ok(Self { e, a, b, c, pencil })
    }

    pub fn dense(e: DMatrix<f64>, a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        Self::new(StateMatrix::Dense(e), StateMatrix::Dense(a), b, c)
    }

    pub fn sparse(e: CsMatrix, a: CsMatrix, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        Self::new(StateMatrix::Sparse(e), StateMatrix::Sparse(a), b, c)
    }

    /// Loads `E`, `A`, `B`, `C` from four Matrix Market files.
    pub fn from_matrix_market(
        e: impl AsRef<Path>,
        a: impl AsRef<Path>,
        b: impl AsRef<Path>,
        c: impl AsRef<Path>,
    ) -> Result<Self> {
        let e = matrix_market::read_file(e)?;
        let a = matrix_market::read_file(a)?;
        let b = matrix_market::read_file(b)?.to_dense();
        let c = matrix_market::read_file(c)?.to_dense();
        Self::sparse(e, a, b, c)
    }

    pub fn order(&self) -> usize {
        self.a.shape().0
    }

    pub fn storage(&self) -> Storage {
        match self.a {
            StateMatrix::Dense(_) => Storage::Dense,
            StateMatrix::Sparse(_) => Storage::Sparse,
        }
    }

    pub fn e(&self) -> &StateMatrix {
        &self.e
    }

    pub fn a(&self) -> &StateMatrix {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Same system with `C` replaced.
    pub fn with_output(&self, c: DMatrix<f64>) -> Result<Self> {
        Self::new(self.e.clone(), self.a.clone(), self.b.clone(), c)
    }

    pub fn to_dense_storage(&self) -> Self {
        Self::dense(self.e.to_dense(), self.a.to_dense(), self.b.clone(), self.c.clone())
            .expect("dimensions already validated")
    }

    pub fn to_sparse_storage(&self) -> Self {
        Self::sparse(self.e.to_sparse(), self.a.to_sparse(), self.b.clone(), self.c.clone())
            .expect("dimensions already validated")
    }

    /// `(iωE − A)⁻¹ B`.
    pub fn shifted_solve(&self, omega: f64) -> Result<DMatrix<C64>> {
        self.shifted_solve_rhs(omega, &to_complex(&self.b))
    }

    /// `(iωE − A)⁻¹ R` for an arbitrary right-hand side.
    pub fn shifted_solve_rhs(&self, omega: f64, rhs: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        let n = self.order();
        if rhs.nrows() != n {
            return Err(Error::dim(format!("right-hand side has {} rows, expected {n}", rhs.nrows())));
        }
        match (&self.pencil, &self.e, &self.a) {
            (Some(pencil), _, _) => {
                let lu = pencil.factor(omega)?;
                let mut x = DMatrix::<C64>::zeros(n, rhs.ncols());
                for j in 0..rhs.ncols() {
                    let col: Vec<C64> = rhs.column(j).iter().copied().collect();
                    let sol = lu.solve(&col);
                    x.column_mut(j).copy_from_slice(&sol);
                }
                Ok(x)
            }
            (None, StateMatrix::Dense(e), StateMatrix::Dense(a)) => {
                let s = C64::new(0.0, omega);
                let m = to_complex(e) * s - to_complex(a);
                let scale = m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
                let lu = m.lu();
                let u = lu.u();
                let min_pivot = u.diagonal().iter().fold(f64::INFINITY, |acc, z| acc.min(z.norm()));
                if n > 0 && !(min_pivot > SINGULAR_RTOL * scale) {
                    return Err(Error::SingularShift { omega });
                }
                lu.solve(rhs).ok_or(Error::SingularShift { omega })
            }
            _ => unreachable!("dense systems keep dense E and A"),
        }
    }

    /// Stability test for symmetric pencils: with `E`, `A` symmetric and `E`
    /// positive definite, the spectrum is real and the system is stable iff
    /// `A` is negative definite. Reads the inertia from diagonally pivoted
    /// factorizations; `None` when the pencil is not symmetric or the
    /// inertia could not be read.
    pub fn symmetric_stability(&self) -> Option<bool> {
        if !(self.e.is_symmetric() && self.a.is_symmetric()) {
            return None;
        }
        let n = self.order();
        match &self.pencil {
            Some(pencil) => {
                let one = C64::new(1.0, 0.0);
                let zero = C64::new(0.0, 0.0);
                let e = pencil.factor_combination(one, zero).ok()?.diagonal_pivot_inertia()?;
                if e.0 != n {
                    return None;
                }
                Some(match pencil.factor_combination(zero, -one) {
                    Ok(lu) => lu.diagonal_pivot_inertia()?.0 == n,
                    Err(_) => false,
                })
            }
            None => {
                let e = self.e.to_dense();
                if e.clone().cholesky().is_none() {
                    return None;
                }
                Some((-self.a.to_dense()).cholesky().is_some())
            }
        }
    }
}

impl FrequencySystem for DescriptorStateSpace {
    fn dims(&self) -> (usize, usize) {
        (self.c.nrows(), self.b.ncols())
    }

    fn evaluate(&self, omega: f64) -> Result<TransferMatrix> {
        let x = self.shifted_solve(omega)?;
        Ok(to_complex(&self.c) * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_order() -> DescriptorStateSpace {
        let one = DMatrix::from_element(1, 1, 1.0);
        DescriptorStateSpace::dense(one.clone(), -one.clone(), one.clone(), one).unwrap()
    }

    #[test]
    fn unit_lag_values() {
        let g = first_order();
        let dc = g.evaluate(0.0).unwrap()[(0, 0)];
        assert_eq!(dc, C64::new(1.0, 0.0));
        let v = g.evaluate(1.0).unwrap()[(0, 0)];
        let oracle = C64::new(1.0, 0.0) / C64::new(1.0, 1.0);
        assert!((v - oracle).norm() < 1e-15);
        assert!((v - C64::new(0.5, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn identity_system_dc_gain() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let g = DescriptorStateSpace::dense(i2.clone(), -i2.clone(), i2.clone(), i2).unwrap();
        let v = g.evaluate(0.0).unwrap();
        assert_eq!(v, DMatrix::<C64>::identity(2, 2));
        let gs = g.to_sparse_storage();
        assert_eq!(gs.storage(), Storage::Sparse);
        assert!((gs.evaluate(0.0).unwrap() - v).norm() < 1e-15);
    }

    #[test]
    fn imaginary_axis_pole_is_an_error() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let g = DescriptorStateSpace::dense(i2.clone(), a.clone(), b.clone(), c.clone()).unwrap();
        assert!(matches!(g.evaluate(1.0), Err(Error::SingularShift { .. })));
        let gs = g.to_sparse_storage();
        assert!(matches!(gs.evaluate(1.0), Err(Error::SingularShift { .. })));
        assert!(gs.evaluate(2.0).is_ok());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let b = DMatrix::zeros(3, 1);
        let c = DMatrix::zeros(1, 2);
        assert!(DescriptorStateSpace::dense(i2.clone(), i2, b, c).is_err());
    }
}
