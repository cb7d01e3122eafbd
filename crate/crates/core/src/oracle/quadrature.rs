use crate::error::{Error, Result};
use crate::linalg::quad::{integrate, QuadOptions};
use crate::estimator::integrand;
use crate::systems::{FrequencySystem, ParametrizedSystem};

/// Lower edge of the logarithmic panel; `[0, LOG_SPLIT]` is integrated linearly.
const LOG_SPLIT: f64 = 1e-6;
/// Upper edge of the logarithmic panel when the support is unbounded.
const INFINITE_CUTOFF: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureNorm {
    /// `‖G‖²` over the support.
    pub norm_squared: f64,
    /// Estimated quadrature error of `norm_squared`.
    pub error_estimate: f64,
    /// Estimated mass beyond the upper support edge, assuming `|G|² ~ 1/ω²`.
    /// Added to `norm_squared` only for an unbounded support.
    pub truncation_residual: f64,
    pub evaluations: usize,
}

fn frobenius_squared(sys: &dyn FrequencySystem, omega: f64) -> Result<f64> {
    Ok(sys.evaluate(omega)?.iter().map(|z| z.norm_sqr()).sum())
}

/// `‖G‖² = (1/2π) ∫ ‖G(iω)‖²_F dω` over `±[0, upper]` (`upper` may be `∞`).
///
/// Conjugate symmetry is used to integrate `ω ≥ 0` only. Above `1e-6` rad/s
/// the integral runs in `log ω`, so features at every scale get equal panel
/// resolution.
pub fn h2_norm_quadrature(sys: &dyn FrequencySystem, upper: f64, rel_tol: f64) -> Result<QuadratureNorm> {
    if !(upper > 0.0) {
        return Err(Error::invalid(format!("quadrature support upper edge {upper}")));
    }
    let opts = QuadOptions {
        abs_tol: 1e-15,
        rel_tol,
        max_intervals: 50_000,
    };
    let top = if upper.is_finite() { upper } else { INFINITE_CUTOFF };

    let split = LOG_SPLIT.min(top);
    let low = integrate(|w| Ok(vec![frobenius_squared(sys, w)?]), 0.0, split, &opts)?;
    let mut value = low.value[0];
    let mut error = low.error;
    let mut evaluations = low.evaluations;
    if top > split {
        let high = integrate(
            |t| {
                let w = t.exp();
                Ok(vec![frobenius_squared(sys, w)? * w])
            },
            split.ln(),
            top.ln(),
            &opts,
        )?;
        value += high.value[0];
        error += high.error;
        evaluations += high.evaluations;
    }
    let residual = frobenius_squared(sys, top)? * top;
    evaluations += 1;
    if !upper.is_finite() {
        value += residual;
    }
    let to_norm = 1.0 / std::f64::consts::PI;
    Ok(QuadratureNorm {
        norm_squared: value * to_norm,
        error_estimate: error * to_norm,
        truncation_residual: residual * to_norm,
        evaluations,
    })
}

/// `∇c(μ)_j = 2 ∫₀^upper Re f_j(μ; iω) dω` by the same panel layout as
/// [`h2_norm_quadrature`]. An unbounded support adds the `1/ω²` tail beyond
/// `1e12`. Returns the gradient and the quadrature error estimate.
pub fn gradient_quadrature(
    ps: &dyn ParametrizedSystem,
    mu: &[f64],
    upper: f64,
    rel_tol: f64,
) -> Result<(Vec<f64>, f64)> {
    gradient_quadrature_between(ps, mu, 0.0, upper, rel_tol)
}

/// As [`gradient_quadrature`] over `lower ≤ |ω| ≤ upper`: the gradient of the
/// truncated cost that an estimator sampling on that band is unbiased for.
pub fn gradient_quadrature_between(
    ps: &dyn ParametrizedSystem,
    mu: &[f64],
    lower: f64,
    upper: f64,
    rel_tol: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(lower >= 0.0 && upper > lower) {
        return Err(Error::invalid(format!("quadrature band [{lower}, {upper}]")));
    }
    ps.domain().check(mu)?;
    let opts = QuadOptions {
        abs_tol: 1e-15,
        rel_tol,
        max_intervals: 50_000,
    };
    let top = if upper.is_finite() { upper } else { INFINITE_CUTOFF };
    let re = |w: f64| -> Result<Vec<f64>> { Ok(integrand(ps, mu, w)?.iter().map(|z| z.re).collect()) };

    let split = LOG_SPLIT.clamp(lower, top);
    let mut value = vec![0.0; ps.n_params()];
    let mut error = 0.0;
    if split > lower {
        let low = integrate(re, lower, split, &opts)?;
        value = low.value;
        error = low.error;
    }
    if top > split {
        let high = integrate(
            |t| {
                let w = t.exp();
                Ok(re(w)?.into_iter().map(|v| v * w).collect())
            },
            split.ln(),
            top.ln(),
            &opts,
        )?;
        for (v, h) in value.iter_mut().zip(&high.value) {
            *v += h;
        }
        error += high.error;
    }
    if !upper.is_finite() {
        for (v, r) in value.iter_mut().zip(re(top)?) {
            *v += r * top;
        }
    }
    Ok((value.into_iter().map(|v| 2.0 * v).collect(), 2.0 * error))
}
