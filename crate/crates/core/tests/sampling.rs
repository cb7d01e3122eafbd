use proptest::prelude::*;
use sh2opt::linalg::quad::{integrate_scalar, QuadOptions};
use sh2opt::rng::stream_rng;
use sh2opt::sampling::check_variance_condition;
use sh2opt::SamplingDistribution;

/// Kolmogorov–Smirnov distance between samples and a CDF.
fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// 0.1% critical value of the one-sample KS statistic.
fn ks_critical(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

fn check_ks(dist: &SamplingDistribution, seed: u64) {
    let n = 20_000;
    let draws = dist.draw(&mut stream_rng(seed, 0), n);
    let d = ks_distance(draws.clone(), |w| dist.cdf(w));
    assert!(d < ks_critical(n), "two-sided KS {d}");
    let mags: Vec<f64> = draws.iter().map(|w| w.abs()).collect();
    let d = ks_distance(mags, |w| dist.magnitude_cdf(w));
    assert!(d < ks_critical(n), "magnitude KS {d}");
}

#[test]
fn ks_log_uniform() {
    check_ks(&SamplingDistribution::log_uniform(1e-2, 1e4).unwrap(), 1);
}

#[test]
fn ks_uniform() {
    check_ks(&SamplingDistribution::uniform(0.5, 20.0).unwrap(), 2);
}

#[test]
fn ks_cauchy() {
    check_ks(&SamplingDistribution::cauchy(3.0).unwrap(), 3);
}

#[test]
fn ks_tabulated() {
    let d = SamplingDistribution::inverse_cdf_sampler(&[(0.0, 0.0), (0.3, 1.0), (0.9, 10.0), (1.0, 100.0)]).unwrap();
    check_ks(&d, 4);
    let w: Vec<f64> = (0..50).map(|i| 10f64.powf(-2.0 + 6.0 * i as f64 / 49.0)).collect();
    let mag: Vec<f64> = w.iter().map(|x| 1.0 / (1.0 + x * x)).collect();
    check_ks(&SamplingDistribution::proportional_to_magnitude(&w, &mag).unwrap(), 5);
}

#[test]
fn signs_are_balanced() {
    let d = SamplingDistribution::log_uniform(1e-3, 1e3).unwrap();
    let n = 40_000;
    let neg = d.draw(&mut stream_rng(9, 0), n).iter().filter(|w| **w < 0.0).count() as f64;
    let z = (neg - n as f64 / 2.0) / (n as f64 / 4.0).sqrt();
    assert!(z.abs() < 4.0, "z = {z}");
}

#[test]
fn density_integrates_to_one() {
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-11,
        max_intervals: 10_000,
    };
    for d in [
        SamplingDistribution::log_uniform(1e-2, 1e4).unwrap(),
        SamplingDistribution::uniform(1.0, 3.0).unwrap(),
    ] {
        let s = d.support();
        // two-sided density over ω > 0, in log ω
        let (v, _) = integrate_scalar(|t| d.density(t.exp()) * t.exp(), s.lo.ln(), s.hi.ln(), &opts).unwrap();
        assert!((2.0 * v - 1.0).abs() < 1e-9, "{v}");
    }
    let c = SamplingDistribution::cauchy(2.0).unwrap();
    let (v, _) = integrate_scalar(|t| c.density(t.exp()) * t.exp(), -30.0, 30.0, &opts).unwrap();
    assert!((2.0 * v - 1.0).abs() < 1e-9, "{v}");
}

#[test]
fn log_uniform_density_value() {
    let d = SamplingDistribution::log_uniform(1e-2, 1e4).unwrap();
    let w = 3.0;
    let expected = 0.5 / (w * (1e4f64 / 1e-2).ln());
    assert!((d.density(w) - expected).abs() < 1e-15);
    assert_eq!(d.density(-w), d.density(w));
    assert_eq!(d.density(2e4), 0.0);
}

#[test]
fn invalid_parameters() {
    assert!(SamplingDistribution::log_uniform(0.0, 1.0).is_err());
    assert!(SamplingDistribution::log_uniform(2.0, 1.0).is_err());
    assert!(SamplingDistribution::uniform(1.0, 1.0).is_err());
    assert!(SamplingDistribution::cauchy(-1.0).is_err());
    assert!(SamplingDistribution::inverse_cdf_sampler(&[(0.0, 0.0), (1.0, 1.0)]).is_err());
    assert!(SamplingDistribution::inverse_cdf_sampler(&[(0.0, 0.0), (0.5, 2.0), (0.4, 3.0), (1.0, 4.0)]).is_err());
}

#[test]
fn variance_condition_on_unbounded_support() {
    let grid: Vec<f64> = (0..60).map(|i| 10f64.powf(-2.0 + 8.0 * i as f64 / 59.0)).collect();
    let c = SamplingDistribution::cauchy(1.0).unwrap();
    // |f| ~ 1/ω² decays faster than the Cauchy tail: fine
    assert!(check_variance_condition(&c, |w| 1.0 / (1.0 + w * w), &grid).satisfied);
    // |f| ~ 1/ω decays slower than p: the ratio grows
    assert!(!check_variance_condition(&c, |w| 1.0 / (1.0 + w), &grid).satisfied);
    let b = SamplingDistribution::log_uniform(1e-2, 1e4).unwrap();
    assert!(check_variance_condition(&b, |w| 1.0 / (1.0 + w), &grid).satisfied);
}

#[test]
fn draws_are_reproducible() {
    let d = SamplingDistribution::log_uniform(1e-2, 1e4).unwrap();
    let a = d.draw(&mut stream_rng(5, 7), 100);
    let b = d.draw(&mut stream_rng(5, 7), 100);
    let c = d.draw(&mut stream_rng(5, 8), 100);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

proptest! {
    #[test]
    fn samples_stay_in_support(lo in 1e-4f64..1.0, span in 1.0f64..1e6, seed in any::<u64>()) {
        let d = SamplingDistribution::log_uniform(lo, lo * span).unwrap();
        for w in d.draw(&mut stream_rng(seed, 0), 64) {
            prop_assert!(d.support().contains(w));
            prop_assert!(d.density(w) > 0.0);
        }
    }

    #[test]
    fn cdf_is_monotone(a in -1e4f64..1e4, b in -1e4f64..1e4) {
        let d = SamplingDistribution::log_uniform(1e-2, 1e3).unwrap();
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(d.cdf(x) <= d.cdf(y));
        prop_assert!((0.0..=1.0).contains(&d.cdf(x)));
        prop_assert!((d.cdf(x) + d.cdf(-x) - 1.0).abs() < 1e-12);
    }
}
