use proptest::prelude::*;
use sh2opt::benchmarks::random::random_affine_family;
use sh2opt::benchmarks::scalar;
use sh2opt::estimator::{estimate_gradient_with, integrand, summarize_estimates, EstimatorOptions};
use sh2opt::oracle::exact_gradient;
use sh2opt::systems::ParameterBox;
use sh2opt::{estimate_gradient, Error, ParametrizedSystem, Result, SamplingDistribution, TransferMatrix, C64};

fn dist() -> SamplingDistribution {
    SamplingDistribution::log_uniform(1e-3, 1e4).unwrap()
}

#[test]
fn single_sample_is_integrand_over_density() {
    let f = scalar::scaled_lag();
    let e = estimate_gradient(&f, &[1.5], &dist(), 1, 3).unwrap();
    let s = &e.samples[0];
    let re = integrand(&f, &[1.5], s.omega).unwrap()[0].re;
    assert_eq!(e.estimate[0], re / dist().density(s.omega));
    assert_eq!(e.recompute().unwrap(), e.estimate);
    // scaled lag: f = μ / (2π (1 + ω²))
    let expected = 1.5 / (2.0 * std::f64::consts::PI * (1.0 + s.omega * s.omega));
    assert!((re - expected).abs() < 1e-15);
}

#[test]
fn parallel_and_serial_agree_bitwise() {
    let fam = random_affine_family(6, 3, 2).unwrap();
    let mu = [0.1, 0.2, -0.3];
    let par = EstimatorOptions {
        record_cap: 5,
        parallel: true,
    };
    let ser = EstimatorOptions {
        record_cap: 5,
        parallel: false,
    };
    let a = estimate_gradient_with(&fam, &mu, &dist(), 64, 9, 4, &par).unwrap();
    let b = estimate_gradient_with(&fam, &mu, &dist(), 64, 9, 4, &ser).unwrap();
    assert_eq!(a.estimate, b.estimate);
    assert_eq!(a.samples.len(), 5);
    assert!(!a.is_complete());
    assert!(a.recompute().is_none());
    let c = estimate_gradient_with(&fam, &mu, &dist(), 64, 9, 5, &ser).unwrap();
    assert_ne!(a.estimate, c.estimate);
}

#[test]
fn zero_gradient_family_gives_zero_estimate() {
    let f = scalar::constant_lag(2.0);
    let e = estimate_gradient(&f, &[0.7], &dist(), 50, 1).unwrap();
    assert_eq!(e.estimate, vec![0.0]);
}

#[test]
fn identical_parameters_give_identical_components() {
    let f = scalar::summed_lag();
    let e = estimate_gradient(&f, &[0.2, 0.5], &dist(), 20, 8).unwrap();
    assert_eq!(e.estimate[0], e.estimate[1]);
}

#[test]
fn zero_samples_rejected_and_domain_checked() {
    let f = scalar::scaled_lag();
    assert!(estimate_gradient(&f, &[1.0], &dist(), 0, 1).is_err());
    assert!(estimate_gradient(&f, &[1.0, 2.0], &dist(), 3, 1).is_err());
}

struct FailsAbove(ParameterBox, f64);

impl ParametrizedSystem for FailsAbove {
    fn n_params(&self) -> usize {
        1
    }
    fn dims(&self) -> (usize, usize) {
        (1, 1)
    }
    fn domain(&self) -> &ParameterBox {
        &self.0
    }
    fn evaluate_unchecked(&self, _mu: &[f64], omega: f64) -> Result<(TransferMatrix, Vec<TransferMatrix>)> {
        if omega.abs() > self.1 {
            return Err(Error::SingularShift { omega });
        }
        let one = TransferMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        Ok((one.clone(), vec![one]))
    }
}

#[test]
fn any_failed_sample_fails_the_estimate() {
    let sys = FailsAbove(ParameterBox::unbounded(1), 1.0);
    let d = SamplingDistribution::uniform(0.5, 2.0).unwrap();
    let r = estimate_gradient(&sys, &[0.0], &d, 100, 1);
    assert!(matches!(r, Err(Error::SingularShift { .. })));
}

#[test]
fn csv_lists_every_recorded_sample() {
    let f = scalar::scaled_lag();
    let e = estimate_gradient(&f, &[1.0], &dist(), 7, 2).unwrap();
    let mut buf = Vec::new();
    e.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + 7);
}

#[test]
fn summary_statistics() {
    let est = vec![vec![1.0, 0.0], vec![3.0, 0.0]];
    let p = summarize_estimates(&est, &[2.0, 0.0]).unwrap();
    assert_eq!(p.mean, vec![2.0, 0.0]);
    assert_eq!(p.bias, vec![0.0, 0.0]);
    assert_eq!(p.variance, vec![2.0, 0.0]);
    assert_eq!(p.max_z(), 0.0);
    assert!(summarize_estimates(&est[..1], &[2.0, 0.0]).is_err());
}

#[test]
fn mean_of_many_estimates_matches_oracle() {
    let fam = random_affine_family(5, 2, 7).unwrap();
    let mu = [0.3, -0.6];
    let exact = exact_gradient(&fam, &mu).unwrap();
    let d = SamplingDistribution::log_uniform(1e-4, 1e5).unwrap();
    let probe = sh2opt::estimator::estimator_bias_probe(&fam, &mu, &d, 20, 3000, &exact, 17).unwrap();
    assert!(probe.max_z() < 4.0, "{probe:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn estimate_is_linear_in_scaled_lag_parameter(mu in -5.0f64..5.0, seed in any::<u64>()) {
        // f is linear in μ for μ/(s+1), so the same draws give a linear estimate
        let f = scalar::scaled_lag();
        let a = estimate_gradient(&f, &[mu], &dist(), 8, seed).unwrap();
        let b = estimate_gradient(&f, &[1.0], &dist(), 8, seed).unwrap();
        prop_assert!((a.estimate[0] - mu * b.estimate[0]).abs() <= 1e-12 * b.estimate[0].abs().max(1.0) * mu.abs().max(1.0));
    }
}
