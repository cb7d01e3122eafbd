use nalgebra::DMatrix;

use super::{ParameterBox, ParametrizedSystem};
use crate::error::{Error, Result};
use crate::linalg::to_complex;
use crate::oracle::{DenseRealization, RealizableFamily};
use crate::{TransferMatrix, C64};

#[derive(Debug, Clone)]
struct Term {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

/// Dense family `A(μ) = A₀ + Σ μ_j A_j`, likewise for `B` and `C`, with `E = I`.
///
/// The parameter-gradient system `∂G/∂μ_j = C_j R B + C R A_j R B + C R B_j`
/// (with `R = (sI − A)⁻¹`) has the realization
/// `([[A, A_j], [0, A]], [B_j; B], [C, C_j])`.
#[derive(Debug, Clone)]
pub struct AffineStateSpaceFamily {
    a0: DMatrix<f64>,
    b0: DMatrix<f64>,
    c0: DMatrix<f64>,
    terms: Vec<Term>,
    domain: ParameterBox,
}

impl AffineStateSpaceFamily {
    pub fn new(a0: DMatrix<f64>, b0: DMatrix<f64>, c0: DMatrix<f64>) -> Result<Self> {
        let n = a0.nrows();
        if !a0.is_square() || b0.nrows() != n || c0.ncols() != n {
            return Err(Error::dim(format!(
                "affine family: A {:?}, B {:?}, C {:?}",
                a0.shape(),
                b0.shape(),
                c0.shape()
            )));
        }
        Ok(Self {
            a0,
            b0,
            c0,
            terms: Vec::new(),
            domain: ParameterBox::unbounded(0),
        })
    }

    /// Appends the coefficient matrices of the next parameter.
    pub fn term(mut self, a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if a.shape() != self.a0.shape() || b.shape() != self.b0.shape() || c.shape() != self.c0.shape() {
            return Err(Error::dim(format!(
                "affine term {} has shapes A {:?}, B {:?}, C {:?}",
                self.terms.len(),
                a.shape(),
                b.shape(),
                c.shape()
            )));
        }
        self.terms.push(Term { a, b, c });
        self.domain = ParameterBox::unbounded(self.terms.len());
        Ok(self)
    }

    pub fn with_domain(mut self, domain: ParameterBox) -> Result<Self> {
        if domain.dim() != self.terms.len() {
            return Err(Error::dim("domain dimension differs from the number of terms"));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.a0.nrows()
    }

    pub fn matrices(&self, mu: &[f64]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let mut a = self.a0.clone();
        let mut b = self.b0.clone();
        let mut c = self.c0.clone();
        for (t, &m) in self.terms.iter().zip(mu) {
            if m != 0.0 {
                a += &t.a * m;
                b += &t.b * m;
                c += &t.c * m;
            }
        }
        (a, b, c)
    }
}

impl ParametrizedSystem for AffineStateSpaceFamily {
    fn n_params(&self) -> usize {
        self.terms.len()
    }

    fn dims(&self) -> (usize, usize) {
        (self.c0.nrows(), self.b0.ncols())
    }

    fn domain(&self) -> &ParameterBox {
        &self.domain
    }

    fn evaluate_unchecked(&self, mu: &[f64], omega: f64) -> Result<(TransferMatrix, Vec<TransferMatrix>)> {
        let n = self.order();
        let (a, b, c) = self.matrices(mu);
        let shifted = DMatrix::<C64>::identity(n, n) * C64::new(0.0, omega) - to_complex(&a);
        let scale = shifted.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        let lu = shifted.lu();
        let min_pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |acc, z| acc.min(z.norm()));
        if n > 0 && !(min_pivot > 1e-13 * scale) {
            return Err(Error::SingularShift { omega });
        }
        let cc = to_complex(&c);
        let x = lu.solve(&to_complex(&b)).ok_or(Error::SingularShift { omega })?;
        let g = &cc * &x;
        let grads = self
            .terms
            .iter()
            .map(|t| {
                let rhs = to_complex(&t.a) * &x + to_complex(&t.b);
                let z = lu.solve(&rhs).ok_or(Error::SingularShift { omega })?;
                Ok(to_complex(&t.c) * &x + &cc * z)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((g, grads))
    }
}

impl RealizableFamily for AffineStateSpaceFamily {
    fn realization(&self, mu: &[f64]) -> Result<DenseRealization> {
        self.domain.check(mu)?;
        let (a, b, c) = self.matrices(mu);
        DenseRealization::new(a, b, c)
    }

    fn gradient_realization(&self, mu: &[f64], j: usize) -> Result<DenseRealization> {
        self.domain.check(mu)?;
        let t = self
            .terms
            .get(j)
            .ok_or_else(|| Error::dim(format!("no parameter {j}")))?;
        let (a, b, c) = self.matrices(mu);
        let n = a.nrows();
        let mut ad = DMatrix::zeros(2 * n, 2 * n);
        ad.view_mut((0, 0), (n, n)).copy_from(&a);
        ad.view_mut((0, n), (n, n)).copy_from(&t.a);
        ad.view_mut((n, n), (n, n)).copy_from(&a);
        let mut bd = DMatrix::zeros(2 * n, b.ncols());
        bd.rows_mut(0, n).copy_from(&t.b);
        bd.rows_mut(n, n).copy_from(&b);
        let mut cd = DMatrix::zeros(c.nrows(), 2 * n);
        cd.columns_mut(0, n).copy_from(&c);
        cd.columns_mut(n, n).copy_from(&t.c);
        DenseRealization::new(ad, bd, cd)
    }
}
