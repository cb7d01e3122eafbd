use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::to_complex;
use crate::systems::{DescriptorStateSpace, FrequencySystem};
use crate::{TransferMatrix, C64};

/// Largest order the dense oracle accepts by default.
pub const DEFAULT_MAX_ORDER: usize = 2000;

/// `ẋ = A x + B u`, `y = C x` with dense matrices (`E` already eliminated).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseRealization {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl DenseRealization {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || c.ncols() != n {
            return Err(Error::dim(format!(
                "realization: A {:?}, B {:?}, C {:?}",
                a.shape(),
                b.shape(),
                c.shape()
            )));
        }
        Ok(Self { a, b, c })
    }

    /// The zero system, realized with no states.
    pub fn zero(outputs: usize, inputs: usize) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, inputs),
            c: DMatrix::zeros(outputs, 0),
        }
    }

    /// Eliminates `E` by an explicit LU solve. Singular `E` is rejected.
    pub fn from_descriptor(sys: &DescriptorStateSpace, max_order: usize) -> Result<Self> {
        let n = sys.order();
        if n > max_order {
            return Err(Error::SizeLimit { n, cap: max_order });
        }
        let e = sys.e().to_dense();
        let a = sys.a().to_dense();
        if e == DMatrix::identity(n, n) {
            return Self::new(a, sys.b().clone(), sys.c().clone());
        }
        let lu = e.lu();
        if !lu.is_invertible() {
            return Err(Error::invalid("descriptor matrix E is singular"));
        }
        let a = lu.solve(&a).ok_or_else(|| Error::invalid("descriptor matrix E is singular"))?;
        let b = lu
            .solve(sys.b())
            .ok_or_else(|| Error::invalid("descriptor matrix E is singular"))?;
        Self::new(a, b, sys.c().clone())
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
}

impl FrequencySystem for DenseRealization {
    fn dims(&self) -> (usize, usize) {
        (self.c.nrows(), self.b.ncols())
    }

    fn evaluate(&self, omega: f64) -> Result<TransferMatrix> {
        let n = self.order();
        if n == 0 {
            return Ok(TransferMatrix::zeros(self.c.nrows(), self.b.ncols()));
        }
        let m = DMatrix::<C64>::identity(n, n) * C64::new(0.0, omega) - to_complex(&self.a);
        let scale = m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        let lu = m.lu();
        let min_pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |acc, z| acc.min(z.norm()));
        if !(min_pivot > 1e-13 * scale) {
            return Err(Error::SingularShift { omega });
        }
        let x = lu.solve(&to_complex(&self.b)).ok_or(Error::SingularShift { omega })?;
        Ok(to_complex(&self.c) * x)
    }
}
