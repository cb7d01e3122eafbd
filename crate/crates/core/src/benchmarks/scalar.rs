//! One-state families with closed-form costs.

use nalgebra::DMatrix;

use crate::systems::AffineStateSpaceFamily;

fn m(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// `G(μ; s) = μ / (s + 1)`: `c(μ) = μ²/4`, `∇c(μ) = μ/2`.
pub fn scaled_lag() -> AffineStateSpaceFamily {
    AffineStateSpaceFamily::new(m(-1.0), m(1.0), m(0.0))
        .and_then(|f| f.term(m(0.0), m(0.0), m(1.0)))
        .expect("static dimensions")
}

/// `G(μ; s) = 2μ / (s + μ)`: `c(μ) = μ` for `μ > 0`, unstable otherwise.
pub fn moving_pole() -> AffineStateSpaceFamily {
    AffineStateSpaceFamily::new(m(0.0), m(0.0), m(1.0))
        .and_then(|f| f.term(m(-1.0), m(2.0), m(0.0)))
        .expect("static dimensions")
}

/// `G(μ; s) = (μ₁ + μ₂) / (s + 1)`.
pub fn summed_lag() -> AffineStateSpaceFamily {
    AffineStateSpaceFamily::new(m(-1.0), m(1.0), m(0.0))
        .and_then(|f| f.term(m(0.0), m(0.0), m(1.0)))
        .and_then(|f| f.term(m(0.0), m(0.0), m(1.0)))
        .expect("static dimensions")
}

/// `G(μ; s) = c / (s + 1)` for every `μ ∈ ℝ`: gradient identically zero.
pub fn constant_lag(gain: f64) -> AffineStateSpaceFamily {
    AffineStateSpaceFamily::new(m(-1.0), m(1.0), m(gain))
        .and_then(|f| f.term(m(0.0), m(0.0), m(0.0)))
        .expect("static dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{cost, exact_gradient, H2Value};

    #[test]
    fn closed_forms() {
        let f = scaled_lag();
        assert!((cost(&f, &[2.0]).unwrap().value() - 1.0).abs() < 1e-14);
        assert!((exact_gradient(&f, &[2.0]).unwrap()[0] - 1.0).abs() < 1e-14);
        let p = moving_pole();
        assert!((cost(&p, &[3.0]).unwrap().value() - 3.0).abs() < 1e-12);
        assert_eq!(cost(&p, &[-1.0]).unwrap(), H2Value::Infinite);
    }
}
