//! Gradient integrand and its Monte Carlo estimate.
//!
//! For a real system `f(μ; −iω) = conj f(μ; iω)`, so the gradient integral is
//! the expectation of `Re f(μ; iω) / p(ω)` under any symmetric density `p`
//! whose support covers the energy band of `G` and its derivatives.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, trial_seed};
use crate::sampling::SamplingDistribution;
use crate::systems::ParametrizedSystem;
use crate::C64;

/// `[f(μ; iω)]_j = (1/2π) tr(G(μ; iω) · ∂G/∂μ_j(μ; iω)^H)`.
pub fn integrand(ps: &dyn ParametrizedSystem, mu: &[f64], omega: f64) -> Result<Vec<C64>> {
    let (g, grads) = ps.evaluate_with_gradient(mu, omega)?;
    Ok(grads
        .iter()
        .map(|dg| {
            let tr: C64 = g.iter().zip(dg.iter()).map(|(a, b)| a * b.conj()).sum();
            tr / (2.0 * PI)
        })
        .collect())
}

/// One Monte Carlo sample: `Re f(μ; iω)` and the density it is divided by.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub omega: f64,
    pub density: f64,
    pub re_f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientEstimate {
    /// `(1/M) Σ_m Re f(μ; iω_m) / p(ω_m)`.
    pub estimate: Vec<f64>,
    /// The first `min(M, record_cap)` samples, in draw order.
    pub samples: Vec<SampleRecord>,
    pub sample_count: usize,
    pub seed: u64,
    pub stream: u64,
}

impl GradientEstimate {
    pub fn is_complete(&self) -> bool {
        self.samples.len() == self.sample_count
    }

    /// Recomputes the estimate from the stored samples; `None` when the
    /// record was truncated by the cap.
    pub fn recompute(&self) -> Option<Vec<f64>> {
        if !self.is_complete() {
            return None;
        }
        let n = self.estimate.len();
        let mut sum = vec![0.0; n];
        for s in &self.samples {
            accumulate(&mut sum, s);
        }
        Some(finish(sum, self.sample_count))
    }

    pub fn norm(&self) -> f64 {
        self.estimate.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Estimation noise `∇̂c − ∇c` against a reference gradient.
    pub fn noise(&self, reference: &[f64]) -> Vec<f64> {
        self.estimate.iter().zip(reference).map(|(a, b)| a - b).collect()
    }

    /// CSV with columns `omega, density, re_f_0, …`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "omega,density")?;
        for j in 0..self.estimate.len() {
            write!(out, ",re_f_{j}")?;
        }
        writeln!(out)?;
        for s in &self.samples {
            write!(out, "{:e},{:e}", s.omega, s.density)?;
            for v in &s.re_f {
                write!(out, ",{v:e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn accumulate(sum: &mut [f64], s: &SampleRecord) {
    for (acc, v) in sum.iter_mut().zip(&s.re_f) {
        *acc += v / s.density;
    }
}

fn finish(sum: Vec<f64>, m: usize) -> Vec<f64> {
    let m = m as f64;
    sum.into_iter().map(|v| v / m).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    /// Samples kept per estimate; later samples only enter the running sum.
    pub record_cap: usize,
    /// Evaluate samples on the rayon pool. The reduction order is fixed
    /// either way, so the result does not depend on this flag.
    pub parallel: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            record_cap: 10_000,
            parallel: true,
        }
    }
}

/// Estimate with default options on stream 0 of `seed`.
pub fn estimate_gradient(
    ps: &dyn ParametrizedSystem,
    mu: &[f64],
    dist: &SamplingDistribution,
    m: usize,
    seed: u64,
) -> Result<GradientEstimate> {
    estimate_gradient_with(ps, mu, dist, m, seed, 0, &EstimatorOptions::default())
}

/// Draws all `m` frequencies from stream `stream` of `seed` on the calling
/// thread, evaluates them (possibly in parallel) and sums in draw order.
/// Any failed evaluation fails the whole estimate.
pub fn estimate_gradient_with(
    ps: &dyn ParametrizedSystem,
    mu: &[f64],
    dist: &SamplingDistribution,
    m: usize,
    seed: u64,
    stream: u64,
    opts: &EstimatorOptions,
) -> Result<GradientEstimate> {
    if m == 0 {
        return Err(Error::invalid("sample count M must be at least 1"));
    }
    ps.domain().check(mu)?;
    let mut rng = stream_rng(seed, stream);
    let omegas = dist.draw(&mut rng, m);

    let eval = |&omega: &f64| -> Result<SampleRecord> {
        let f = integrand(ps, mu, omega)?;
        Ok(SampleRecord {
            omega,
            density: dist.density(omega),
            re_f: f.iter().map(|z| z.re).collect(),
        })
    };
    let records: Vec<Result<SampleRecord>> = if opts.parallel && m > 1 {
        omegas.par_iter().map(eval).collect()
    } else {
        omegas.iter().map(eval).collect()
    };

    let mut sum = vec![0.0; ps.n_params()];
    let mut samples = Vec::with_capacity(m.min(opts.record_cap));
    for r in records {
        let s = r?;
        accumulate(&mut sum, &s);
        if samples.len() < opts.record_cap {
            samples.push(s);
        }
    }
    Ok(GradientEstimate {
        estimate: finish(sum, m),
        samples,
        sample_count: m,
        seed,
        stream,
    })
}

/// Empirical mean, bias against a reference gradient and per-component
/// standard errors over repeated independent estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasProbe {
    pub mean: Vec<f64>,
    pub bias: Vec<f64>,
    pub standard_error: Vec<f64>,
    /// Per-component sample variance of a single estimate.
    pub variance: Vec<f64>,
    pub repetitions: usize,
}

impl BiasProbe {
    /// Largest `|bias_j| / SE_j`; zero-variance components count only if
    /// their bias is nonzero (then the ratio is infinite).
    pub fn max_z(&self) -> f64 {
        self.bias
            .iter()
            .zip(&self.standard_error)
            .map(|(b, se)| if *se > 0.0 { b.abs() / se } else if *b == 0.0 { 0.0 } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }

    pub fn total_variance(&self) -> f64 {
        self.variance.iter().sum()
    }
}

/// Summary statistics of `estimates` against `reference`.
pub fn summarize_estimates(estimates: &[Vec<f64>], reference: &[f64]) -> Result<BiasProbe> {
    let r = estimates.len();
    if r < 2 {
        return Err(Error::invalid("need at least two repetitions"));
    }
    let n = reference.len();
    if estimates.iter().any(|e| e.len() != n) {
        return Err(Error::dim("estimate length differs from the reference gradient"));
    }
    let rf = r as f64;
    let mean: Vec<f64> = (0..n).map(|j| estimates.iter().map(|e| e[j]).sum::<f64>() / rf).collect();
    let variance: Vec<f64> = (0..n)
        .map(|j| estimates.iter().map(|e| (e[j] - mean[j]).powi(2)).sum::<f64>() / (rf - 1.0))
        .collect();
    Ok(BiasProbe {
        bias: mean.iter().zip(reference).map(|(a, b)| a - b).collect(),
        standard_error: variance.iter().map(|v| (v / rf).sqrt()).collect(),
        mean,
        variance,
        repetitions: r,
    })
}

/// Runs `repetitions` independent estimates (repetition `i` uses seed
/// `trial_seed(seed, i)`) and compares their mean with `reference`.
pub fn estimator_bias_probe(
    ps: &dyn ParametrizedSystem,
    mu: &[f64],
    dist: &SamplingDistribution,
    m: usize,
    repetitions: usize,
    reference: &[f64],
    seed: u64,
) -> Result<BiasProbe> {
    let opts = EstimatorOptions {
        record_cap: 0,
        parallel: false,
    };
    let estimates = (0..repetitions as u64)
        .into_par_iter()
        .map(|i| estimate_gradient_with(ps, mu, dist, m, trial_seed(seed, i), 0, &opts).map(|g| g.estimate))
        .collect::<Result<Vec<_>>>()?;
    summarize_estimates(&estimates, reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{ParameterBox, ParametrizedSystem};
    use crate::TransferMatrix;

    struct Scaled(ParameterBox);

    impl ParametrizedSystem for Scaled {
        fn n_params(&self) -> usize {
            1
        }
        fn dims(&self) -> (usize, usize) {
            (1, 1)
        }
        fn domain(&self) -> &ParameterBox {
            &self.0
        }
        fn evaluate_unchecked(&self, mu: &[f64], omega: f64) -> Result<(TransferMatrix, Vec<TransferMatrix>)> {
            let h = C64::new(1.0, 0.0) / C64::new(1.0, omega);
            Ok((
                TransferMatrix::from_element(1, 1, h * mu[0]),
                vec![TransferMatrix::from_element(1, 1, h)],
            ))
        }
    }

    #[test]
    fn integrand_scalar_value() {
        let ps = Scaled(ParameterBox::unbounded(1));
        let f = integrand(&ps, &[2.0], 0.0).unwrap();
        assert!((f[0].re - 1.0 / PI).abs() < 1e-15);
        let g = integrand(&ps, &[2.0], 3.0).unwrap();
        assert!((g[0].re - 2.0 / (2.0 * PI * 10.0)).abs() < 1e-15);
    }

    #[test]
    fn estimate_is_reproducible_and_recomputable() {
        let ps = Scaled(ParameterBox::unbounded(1));
        let d = SamplingDistribution::log_uniform(1e-3, 1e3).unwrap();
        let a = estimate_gradient(&ps, &[2.0], &d, 7, 11).unwrap();
        let b = estimate_gradient_with(
            &ps,
            &[2.0],
            &d,
            7,
            11,
            0,
            &EstimatorOptions {
                parallel: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.recompute().unwrap(), a.estimate);
        assert!(a.samples.iter().all(|s| s.density > 0.0));
    }

    #[test]
    fn record_cap_truncates() {
        let ps = Scaled(ParameterBox::unbounded(1));
        let d = SamplingDistribution::log_uniform(1e-3, 1e3).unwrap();
        let opts = EstimatorOptions {
            record_cap: 2,
            parallel: true,
        };
        let e = estimate_gradient_with(&ps, &[1.0], &d, 5, 3, 0, &opts).unwrap();
        assert_eq!(e.samples.len(), 2);
        assert!(e.recompute().is_none());
    }

    #[test]
    fn zero_samples_rejected() {
        let ps = Scaled(ParameterBox::unbounded(1));
        let d = SamplingDistribution::log_uniform(1e-3, 1e3).unwrap();
        assert!(estimate_gradient(&ps, &[1.0], &d, 0, 1).is_err());
    }
}
