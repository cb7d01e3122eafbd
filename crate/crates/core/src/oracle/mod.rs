//! Exact small-scale ground truth.
//!
//! H2 inner products come from one Sylvester equation on the pair of
//! realizations; analytic systems without a realization go through
//! [`h2_norm_quadrature`]. Instability is a value ([`H2Value::Infinite`]),
//! not an error, so optimizer checkpoints can record it.

mod quadrature;
mod realization;

pub use quadrature::{gradient_quadrature, gradient_quadrature_between, h2_norm_quadrature, QuadratureNorm};
pub use realization::{DenseRealization, DEFAULT_MAX_ORDER};

use std::fmt;

use nalgebra::{DMatrix, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, solve_sylvester};
use crate::systems::{FrequencySystem, ParametrizedSystem};

/// Spectral abscissa above `-STABILITY_RTOL · max(1, max|A_ij|)` counts as unstable.
pub const STABILITY_RTOL: f64 = 1e-12;

/// A squared norm or inner product; `Infinite` for unstable systems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum H2Value {
    Finite(f64),
    Infinite,
}

impl H2Value {
    pub fn is_finite(self) -> bool {
        matches!(self, H2Value::Finite(_))
    }

    /// The value, with `+∞` for [`H2Value::Infinite`].
    pub fn value(self) -> f64 {
        match self {
            H2Value::Finite(v) => v,
            H2Value::Infinite => f64::INFINITY,
        }
    }

    pub fn scale(self, factor: f64) -> Self {
        match self {
            H2Value::Finite(v) => H2Value::Finite(v * factor),
            H2Value::Infinite => H2Value::Infinite,
        }
    }
}

impl fmt::Display for H2Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            H2Value::Finite(v) => write!(f, "{v:.17e}"),
            H2Value::Infinite => f.write_str("inf"),
        }
    }
}

/// A parametrized family that can also produce dense realizations.
pub trait RealizableFamily: ParametrizedSystem {
    fn realization(&self, mu: &[f64]) -> Result<DenseRealization>;

    fn gradient_realization(&self, mu: &[f64], j: usize) -> Result<DenseRealization>;
}

/// Maximum real part of the eigenvalues of `A` (`−∞` for an empty matrix).
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let scale = max_abs(a).max(1.0);
    let schur = Schur::try_new(a.clone(), f64::EPSILON * scale, 200 * a.nrows().max(10))
        .ok_or_else(|| Error::NotConverged("real Schur decomposition".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re)))
}

/// True when every eigenvalue lies strictly in the open left half-plane.
pub fn is_stable(r: &DenseRealization) -> Result<bool> {
    let tol = STABILITY_RTOL * max_abs(r.a()).max(1.0);
    Ok(spectral_abscissa(r.a())? < -tol)
}

/// `⟨X, Y⟩ = tr(C_x P C_yᵀ)` with `A_x P + P A_yᵀ + B_x B_yᵀ = 0`.
pub fn h2_inner(x: &DenseRealization, y: &DenseRealization) -> Result<H2Value> {
    if x.dims() != y.dims() {
        return Err(Error::dim(format!(
            "inner product of {:?} and {:?} systems",
            x.dims(),
            y.dims()
        )));
    }
    for r in [x, y] {
        if r.order() > DEFAULT_MAX_ORDER {
            return Err(Error::SizeLimit {
                n: r.order(),
                cap: DEFAULT_MAX_ORDER,
            });
        }
    }
    if !is_stable(x)? || !is_stable(y)? {
        return Ok(H2Value::Infinite);
    }
    let rhs = -(x.b() * y.b().transpose());
    let p = solve_sylvester(x.a(), &y.a().transpose(), &rhs)?;
    Ok(H2Value::Finite((x.c() * p * y.c().transpose()).trace()))
}

pub fn h2_norm_squared(x: &DenseRealization) -> Result<H2Value> {
    h2_inner(x, x)
}

/// `c(μ) = ½‖G(μ)‖²`.
pub fn cost(family: &dyn RealizableFamily, mu: &[f64]) -> Result<H2Value> {
    Ok(h2_norm_squared(&family.realization(mu)?)?.scale(0.5))
}

/// `∇c(μ)_j = ⟨G(μ), ∂G/∂μ_j(μ)⟩`; unstable `G(μ)` gives [`Error::Unstable`].
pub fn exact_gradient(family: &dyn RealizableFamily, mu: &[f64]) -> Result<Vec<f64>> {
    let g = family.realization(mu)?;
    if !is_stable(&g)? {
        return Err(Error::Unstable {
            abscissa: spectral_abscissa(g.a())?,
        });
    }
    (0..family.n_params())
        .map(|j| {
            let dg = family.gradient_realization(mu, j)?;
            match h2_inner(&g, &dg)? {
                H2Value::Finite(v) => Ok(v),
                H2Value::Infinite => Err(Error::Unstable {
                    abscissa: spectral_abscissa(dg.a())?,
                }),
            }
        })
        .collect()
}

/// Both sides of `max_{ξ∈[0,1]} ‖x‖‖ξx + y‖ ≤ 2(‖x‖² + ‖y‖²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `‖ξx + y‖` is convex in `ξ`, so the maximum over `[0, 1]` sits at an endpoint.
pub fn lemma_norm_xi_check(x: &[f64], y: &[f64]) -> LemmaCheck {
    assert_eq!(x.len(), y.len(), "vectors must share a dimension");
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nxy = x.iter().zip(y).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
    let lhs = nx * ny.max(nxy);
    let rhs = 2.0 * (nx * nx + ny * ny);
    LemmaCheck {
        lhs,
        rhs,
        holds: lhs <= rhs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag(a: f64) -> DenseRealization {
        DenseRealization::new(
            DMatrix::from_element(1, 1, -a),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn first_order_norm() {
        assert_eq!(h2_norm_squared(&lag(1.0)).unwrap(), H2Value::Finite(0.5));
        let v = h2_norm_squared(&lag(4.0)).unwrap().value();
        assert!((v - 0.125).abs() < 1e-15);
    }

    #[test]
    fn inner_with_zero_system() {
        let zero = DenseRealization::zero(1, 1);
        assert_eq!(h2_inner(&lag(1.0), &zero).unwrap(), H2Value::Finite(0.0));
    }

    #[test]
    fn unstable_is_infinite() {
        assert_eq!(h2_norm_squared(&lag(-1.0)).unwrap(), H2Value::Infinite);
    }

    #[test]
    fn abscissa_examples() {
        assert_eq!(spectral_abscissa(&DMatrix::from_element(1, 1, -1.0)).unwrap(), -1.0);
        let osc = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(spectral_abscissa(&osc).unwrap().abs() < 1e-14);
        let r = DenseRealization::new(osc, DMatrix::from_element(2, 1, 1.0), DMatrix::from_element(1, 2, 1.0)).unwrap();
        assert_eq!(h2_norm_squared(&r).unwrap(), H2Value::Infinite);
    }

    #[test]
    fn lemma_examples() {
        let c = lemma_norm_xi_check(&[0.0, 0.0], &[3.0, 4.0]);
        assert_eq!(c.lhs, 0.0);
        assert_eq!(c.rhs, 50.0);
        assert!(c.holds);
        let c = lemma_norm_xi_check(&[1.0, 0.0], &[1.0, 0.0]);
        assert_eq!(c.lhs, 2.0);
        assert_eq!(c.rhs, 4.0);
    }
}
