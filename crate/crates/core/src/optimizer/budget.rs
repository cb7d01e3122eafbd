//! Stability budget and probed problem constants.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{estimate_gradient_with, EstimatorOptions};
use crate::rng::trial_seed;
use crate::sampling::SamplingDistribution;
use crate::systems::ParametrizedSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityBudget {
    /// `R* = K²σ² + 2L(K² + σ²)`.
    pub r_star: f64,
    /// `δε / R*`: the largest admissible `Σ α_k²`.
    pub sum_bound: f64,
    /// `1 / L`.
    pub alpha_cap: f64,
}

/// Budget on `Σ α_k²` that keeps every iterate in the sublevel set
/// `c ≤ c(μ_0) + √ε + ε` with probability at least `1 − δ`.
pub fn stability_budget(k: f64, l: f64, sigma: f64, delta: f64, epsilon: f64) -> Result<StabilityBudget> {
    let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
    if !finite_nonneg(k) || !finite_nonneg(sigma) {
        return Err(Error::invalid(format!("constants K = {k}, σ = {sigma} must be finite and nonnegative")));
    }
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::invalid(format!("smoothness constant L = {l} must be positive")));
    }
    if !(delta > 0.0 && delta.is_finite() && epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("δ = {delta}, ε = {epsilon} must be positive")));
    }
    let (k2, s2) = (k * k, sigma * sigma);
    let r_star = k2 * s2 + 2.0 * l * (k2 + s2);
    Ok(StabilityBudget {
        r_star,
        sum_bound: if r_star > 0.0 { delta * epsilon / r_star } else { f64::INFINITY },
        alpha_cap: 1.0 / l,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    /// Parameter vectors at which gradients and estimator noise are sampled.
    pub points: Vec<Vec<f64>>,
    pub samples: usize,
    pub repetitions: usize,
    pub seed: u64,
}

/// Heuristic lower bounds on `K`, `L` and `σ` from a finite probe set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalConstants {
    pub k_hat: f64,
    pub l_hat: f64,
    pub sigma_hat: f64,
}

/// `K̂ = max ‖∇c‖`, `L̂ = max ‖∇c(μ) − ∇c(μ')‖ / ‖μ − μ'‖` over probe pairs and
/// `σ̂² = max E‖∇̂c − ∇c‖²` (empirical, `repetitions` estimates per point).
/// `gradient` supplies the reference `∇c`, typically the dense oracle.
pub fn estimate_local_constants(
    ps: &dyn ParametrizedSystem,
    gradient: &(dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync),
    dist: &SamplingDistribution,
    probe: &ProbeConfig,
) -> Result<LocalConstants> {
    if probe.points.len() < 2 {
        return Err(Error::invalid("probe set needs at least two points"));
    }
    if probe.repetitions < 2 {
        return Err(Error::invalid("probe needs at least two repetitions per point"));
    }
    let grads = probe.points.iter().map(|p| gradient(p)).collect::<Result<Vec<_>>>()?;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let k_hat = grads.iter().map(|g| norm(g)).fold(0.0, f64::max);
    let mut l_hat = 0.0_f64;
    for i in 0..grads.len() {
        for j in i + 1..grads.len() {
            let dmu: Vec<f64> = probe.points[i].iter().zip(&probe.points[j]).map(|(a, b)| a - b).collect();
            let dg: Vec<f64> = grads[i].iter().zip(&grads[j]).map(|(a, b)| a - b).collect();
            let d = norm(&dmu);
            if d > 0.0 {
                l_hat = l_hat.max(norm(&dg) / d);
            }
        }
    }
    let opts = EstimatorOptions {
        record_cap: 0,
        parallel: false,
    };
    let mut sigma2 = 0.0_f64;
    for (i, (point, grad)) in probe.points.iter().zip(&grads).enumerate() {
        let point_seed = trial_seed(probe.seed, i as u64);
        let errs = (0..probe.repetitions as u64)
            .into_par_iter()
            .map(|r| {
                let e = estimate_gradient_with(ps, point, dist, probe.samples, trial_seed(point_seed, r), 0, &opts)?;
                Ok(e.estimate.iter().zip(grad).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            })
            .collect::<Result<Vec<f64>>>()?;
        sigma2 = sigma2.max(errs.iter().sum::<f64>() / errs.len() as f64);
    }
    Ok(LocalConstants {
        k_hat,
        l_hat,
        sigma_hat: sigma2.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_constants() {
        let b = stability_budget(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(b.r_star, 5.0);
        assert_eq!(b.sum_bound, 0.2);
        assert_eq!(b.alpha_cap, 1.0);
    }

    #[test]
    fn deterministic_gradient_and_linearity() {
        let b = stability_budget(2.0, 3.0, 0.0, 0.5, 1.0).unwrap();
        assert_eq!(b.r_star, 2.0 * 3.0 * 4.0);
        let b2 = stability_budget(2.0, 3.0, 0.0, 1.0, 1.0).unwrap();
        assert!((b2.sum_bound - 2.0 * b.sum_bound).abs() < 1e-16);
        assert!(stability_budget(1.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(stability_budget(1.0, 1.0, 1.0, -1.0, 1.0).is_err());
    }
}
