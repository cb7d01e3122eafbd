//! Statistical property suites.
//!
//! Each suite is seeded and sized by its arguments; [`run_suite`] uses the
//! full sizes. Reports carry the statistics they were judged on so callers
//! can print them.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::benchmarks::random::{random_affine_family, random_stable_realization};
use crate::benchmarks::scalar::scaled_lag;
use crate::error::{Error, Result};
use crate::estimator::estimator_bias_probe;
use crate::optimizer::{
    estimate_local_constants, sgd_run, stability_budget, Checkpoints, GradientMode, ProbeConfig, RunOptions,
    StepSizePolicy, Termination,
};
use crate::oracle::{
    cost, exact_gradient, h2_norm_quadrature, h2_norm_squared, lemma_norm_xi_check, DenseRealization, H2Value,
};
use crate::rng::{stream_rng, trial_seed};
use crate::sampling::SamplingDistribution;
use crate::systems::AffineStateSpaceFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Unbiasedness,
    Variance,
    Stability,
    Lemma,
    OracleAgreement,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Unbiasedness,
        Suite::Variance,
        Suite::Stability,
        Suite::Lemma,
        Suite::OracleAgreement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Unbiasedness => "unbiasedness",
            Suite::Variance => "variance",
            Suite::Stability => "stability",
            Suite::Lemma => "lemma",
            Suite::OracleAgreement => "oracle-agreement",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
                Error::invalid(format!("unknown suite `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    /// Named statistics, in display order.
    pub statistics: Vec<(String, f64)>,
}

impl SuiteReport {
    fn new(suite: Suite, passed: bool, statistics: &[(&str, f64)]) -> Self {
        Self {
            suite,
            passed,
            statistics: statistics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn statistic(&self, name: &str) -> Option<f64> {
        self.statistics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.suite, if self.passed { "PASS" } else { "FAIL" })?;
        for (k, v) in &self.statistics {
            write!(f, " {k}={v:.6e}")?;
        }
        Ok(())
    }
}

/// The 8-state, three-parameter test family, the point where it is probed
/// and a sampling distribution covering its bandwidth.
pub fn reference_problem(seed: u64) -> Result<(AffineStateSpaceFamily, Vec<f64>, SamplingDistribution)> {
    let family = random_affine_family(8, 3, seed)?;
    let mu = vec![0.5, -0.3, 0.8];
    let dist = SamplingDistribution::log_uniform(1e-4, 1e5)?;
    Ok((family, mu, dist))
}

/// Mean of `repetitions` estimates with `samples` frequencies each against
/// the Gramian gradient; passes when every component is within 4 standard
/// errors.
pub fn unbiasedness(repetitions: usize, samples: usize, seed: u64) -> Result<SuiteReport> {
    let (family, mu, dist) = reference_problem(seed)?;
    let exact = exact_gradient(&family, &mu)?;
    let probe = estimator_bias_probe(&family, &mu, &dist, samples, repetitions, &exact, trial_seed(seed, 1))?;
    let z = probe.max_z();
    Ok(SuiteReport::new(
        Suite::Unbiasedness,
        z <= 4.0,
        &[("max_z", z), ("repetitions", repetitions as f64), ("samples", samples as f64)],
    ))
}

/// Ratio of the total estimator variance at `M = 1` to that at `M = 10`;
/// passes inside `[8, 12.5]`.
pub fn variance_scaling(repetitions: usize, seed: u64) -> Result<SuiteReport> {
    let (family, mu, dist) = reference_problem(seed)?;
    let exact = exact_gradient(&family, &mu)?;
    let one = estimator_bias_probe(&family, &mu, &dist, 1, repetitions, &exact, trial_seed(seed, 2))?;
    let ten = estimator_bias_probe(&family, &mu, &dist, 10, repetitions, &exact, trial_seed(seed, 3))?;
    let ratio = one.total_variance() / ten.total_variance();
    Ok(SuiteReport::new(
        Suite::Variance,
        (8.0..=12.5).contains(&ratio),
        &[
            ("ratio", ratio),
            ("variance_m1", one.total_variance()),
            ("variance_m10", ten.total_variance()),
        ],
    ))
}

/// Stability preservation on `μ/(s+1)` from `μ₀ = 2`.
///
/// Constants are probed on the sublevel set `c ≤ c(μ₀) + √ε + ε`, a
/// `a/(k+1)` policy is fitted to the budget with `δ = 0.1`, `ε = 1`, and
/// `runs` runs of `iterations` steps are checkpointed with the Gramian cost
/// at every iterate. Passes when the fraction of runs that stay below the
/// bound is at least `1 − δ − 3·√(δ(1 − δ)/runs)`.
pub fn stability_preservation(runs: usize, iterations: usize, seed: u64) -> Result<SuiteReport> {
    let (delta, epsilon) = (0.1_f64, 1.0_f64);
    let family = scaled_lag();
    let mu0 = [2.0];
    let c0 = cost(&family, &mu0)?.value();
    let bound = c0 + epsilon.sqrt() + epsilon;
    let samples = 10;
    let dist = SamplingDistribution::log_uniform(1e-3, 1e3)?;

    // c(μ) = μ²/4, so the sublevel set is |μ| ≤ 2√bound
    let radius = 2.0 * bound.sqrt();
    let points = (0..9).map(|i| vec![-radius + 2.0 * radius * i as f64 / 8.0]).collect();
    let gradient = |mu: &[f64]| exact_gradient(&family, mu);
    let constants = estimate_local_constants(
        &family,
        &gradient,
        &dist,
        &ProbeConfig {
            points,
            samples,
            repetitions: 400,
            seed: trial_seed(seed, 4),
        },
    )?;
    let budget = stability_budget(constants.k_hat, constants.l_hat, constants.sigma_hat, delta, epsilon)?;
    let policy = StepSizePolicy::power_law(1.0, 1.0)?.fit_to_budget(&budget, None)?;

    let checkpoint_cost = |mu: &[f64]| cost(&family, mu);
    let opts = RunOptions {
        gradient: GradientMode::Stochastic,
        checkpoints: Some(Checkpoints {
            every: 1,
            cost: &checkpoint_cost,
            divergence_bound: None,
        }),
        project: true,
        estimator: crate::estimator::EstimatorOptions {
            record_cap: 0,
            parallel: false,
        },
    };
    let run_seed = trial_seed(seed, 5);
    let kept = (0..runs as u64)
        .into_par_iter()
        .map(|t| {
            let rec = sgd_run(&family, &mu0, &policy, &dist, samples, iterations, trial_seed(run_seed, t), &opts)?;
            let completed = rec.termination == Termination::Completed;
            Ok(completed && rec.checkpoints.iter().all(|c| c.cost.value() <= bound))
        })
        .collect::<Result<Vec<bool>>>()?;
    let fraction = kept.iter().filter(|k| **k).count() as f64 / runs as f64;
    let threshold = 1.0 - delta - 3.0 * (delta * (1.0 - delta) / runs as f64).sqrt();
    Ok(SuiteReport::new(
        Suite::Stability,
        fraction >= threshold,
        &[
            ("fraction", fraction),
            ("threshold", threshold),
            ("k_hat", constants.k_hat),
            ("l_hat", constants.l_hat),
            ("sigma_hat", constants.sigma_hat),
            ("r_star", budget.r_star),
            ("sum_alpha_sq", policy.sum_of_squares(None)),
        ],
    ))
}

/// `count` random checks of the inequality, dimensions cycling through 1 to 8
/// and magnitudes spread over six decades.
pub fn lemma(count: usize, seed: u64) -> SuiteReport {
    let mut rng = stream_rng(seed, 6);
    let mut failures = 0usize;
    let mut worst = 0.0_f64;
    for i in 0..count {
        let dim = 1 + i % 8;
        let sx = 10f64.powf(rng.random_range(-3.0..3.0));
        let sy = 10f64.powf(rng.random_range(-3.0..3.0));
        let x: Vec<f64> = (0..dim).map(|_| sx * rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| sy * rng.random_range(-1.0..1.0)).collect();
        let c = lemma_norm_xi_check(&x, &y);
        if !c.holds {
            failures += 1;
        }
        if c.rhs > 0.0 {
            worst = worst.max(c.lhs / c.rhs);
        }
    }
    SuiteReport::new(
        Suite::Lemma,
        failures == 0,
        &[("checks", count as f64), ("failures", failures as f64), ("worst_ratio", worst)],
    )
}

/// Gramian and quadrature norms of `count` random stable systems with up to
/// 20 states; passes when all agree to `1e-4` relative and `‖1/(s+1)‖²`
/// equals `0.5` to `1e-10`.
pub fn oracle_agreement(count: usize, seed: u64) -> Result<SuiteReport> {
    let worst = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let s = trial_seed(seed, i);
            let n = 1 + (s % 20) as usize;
            let outputs = 1 + ((s >> 8) % 3) as usize;
            let inputs = 1 + ((s >> 16) % 3) as usize;
            let r = random_stable_realization(n, outputs, inputs, s)?;
            let gram = h2_norm_squared(&r)?.value();
            let quad = h2_norm_quadrature(&r, f64::INFINITY, 1e-9)?.norm_squared;
            Ok((gram - quad).abs() / gram)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let lag = DenseRealization::new(
        nalgebra::DMatrix::from_element(1, 1, -1.0),
        nalgebra::DMatrix::from_element(1, 1, 1.0),
        nalgebra::DMatrix::from_element(1, 1, 1.0),
    )?;
    let first_order = match h2_norm_squared(&lag)? {
        H2Value::Finite(v) => v,
        H2Value::Infinite => f64::INFINITY,
    };
    let first_order_error = (first_order - 0.5).abs();
    Ok(SuiteReport::new(
        Suite::OracleAgreement,
        worst <= 1e-4 && first_order_error <= 1e-10,
        &[
            ("systems", count as f64),
            ("max_rel_diff", worst),
            ("first_order_error", first_order_error),
        ],
    ))
}

/// Runs `suite` at full size.
pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    match suite {
        Suite::Unbiasedness => unbiasedness(10_000, 10, seed),
        Suite::Variance => variance_scaling(10_000, seed),
        Suite::Stability => stability_preservation(1_000, 200, seed),
        Suite::Lemma => Ok(lemma(100_000, seed)),
        Suite::OracleAgreement => oracle_agreement(50, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn small_lemma_suite() {
        let r = lemma(1000, 3);
        assert!(r.passed);
        assert!(r.statistic("worst_ratio").unwrap() <= 1.0);
    }
}
