//! Symmetric frequency sampling distributions.
//!
//! Every distribution is two-sided: a draw is a uniformly random sign times a
//! magnitude from a one-sided density on `[lo, hi]`, so `p(ω) = p(−ω)` holds
//! by construction and [`SamplingDistribution::density`] reports half the
//! one-sided magnitude density.

use std::f64::consts::{LN_10, PI};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Magnitude support `[lo, hi]`; the full support is `[−hi, −lo] ∪ [lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
}

impl Support {
    pub fn is_bounded(&self) -> bool {
        self.hi.is_finite()
    }

    pub fn contains(&self, omega: f64) -> bool {
        let w = omega.abs();
        w >= self.lo && w <= self.hi
    }
}

/// Piecewise-linear inverse CDF of the magnitude: knots `(u_i, ω_i)` with
/// both coordinates strictly increasing, `u_0 = 0` and `u_last = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseCdfTable {
    u: Vec<f64>,
    omega: Vec<f64>,
}

impl InverseCdfTable {
    pub fn new(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 3 {
            return Err(Error::invalid(format!(
                "inverse CDF table needs at least 3 knots, got {}",
                knots.len()
            )));
        }
        let (u, omega): (Vec<f64>, Vec<f64>) = knots.iter().copied().unzip();
        if u[0] != 0.0 || (u[u.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("inverse CDF table must span probabilities 0 to 1"));
        }
        if omega[0] < 0.0 || omega.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("inverse CDF table needs finite, nonnegative frequencies"));
        }
        let strictly_increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if !strictly_increasing(&u) || !strictly_increasing(&omega) {
            return Err(Error::invalid("inverse CDF table is not strictly monotone"));
        }
        let mut u = u;
        *u.last_mut().expect("non-empty") = 1.0;
        Ok(Self { u, omega })
    }

    fn segment_by_u(&self, u: f64) -> usize {
        self.u.partition_point(|&x| x <= u).clamp(1, self.u.len() - 1) - 1
    }

    fn segment_by_omega(&self, w: f64) -> usize {
        self.omega.partition_point(|&x| x <= w).clamp(1, self.omega.len() - 1) - 1
    }

    fn quantile(&self, u: f64) -> f64 {
        let i = self.segment_by_u(u);
        let t = (u - self.u[i]) / (self.u[i + 1] - self.u[i]);
        self.omega[i] + t * (self.omega[i + 1] - self.omega[i])
    }

    fn magnitude_density(&self, w: f64) -> f64 {
        let i = self.segment_by_omega(w);
        (self.u[i + 1] - self.u[i]) / (self.omega[i + 1] - self.omega[i])
    }

    fn magnitude_cdf(&self, w: f64) -> f64 {
        let i = self.segment_by_omega(w);
        self.u[i] + self.magnitude_density(w) * (w - self.omega[i])
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.u.iter().copied().zip(self.omega.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    /// `log10 |ω|` uniform on `[log10 lo, log10 hi]`.
    LogUniform { lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
    /// `p(ω) = γ / (π (γ² + ω²))` on all of ℝ.
    Cauchy { scale: f64 },
    Tabulated(InverseCdfTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    kind: Kind,
}

impl SamplingDistribution {
    pub fn log_uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::invalid(format!("log-uniform support [{lo}, {hi}]")));
        }
        Ok(Self {
            kind: Kind::LogUniform { lo, hi },
        })
    }

    /// Point-mass supports (`lo == hi`) are rejected.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::invalid(format!("uniform support [{lo}, {hi}]")));
        }
        Ok(Self {
            kind: Kind::Uniform { lo, hi },
        })
    }

    pub fn cauchy(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("Cauchy scale {scale}")));
        }
        Ok(Self {
            kind: Kind::Cauchy { scale },
        })
    }

    /// Distribution defined by a tabulated magnitude inverse CDF `(u, ω)`.
    pub fn inverse_cdf_sampler(knots: &[(f64, f64)]) -> Result<Self> {
        Ok(Self {
            kind: Kind::Tabulated(InverseCdfTable::new(knots)?),
        })
    }

    /// Density proportional to a tabulated magnitude `weight(ω)` on a grid of
    /// `ω ≥ 0`. The CDF is the trapezoidal running integral, normalized by its
    /// total (the factor `τ`).
    pub fn proportional_to_magnitude(omega: &[f64], weight: &[f64]) -> Result<Self> {
        if omega.len() != weight.len() {
            return Err(Error::dim("frequency and weight columns differ in length"));
        }
        if weight.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("magnitude weights must be positive and finite"));
        }
        let mut cumulative = Vec::with_capacity(omega.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 1..omega.len() {
            acc += 0.5 * (weight[i] + weight[i - 1]) * (omega[i] - omega[i - 1]);
            cumulative.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::invalid("magnitude table has no mass"));
        }
        let tau = 1.0 / acc;
        let knots: Vec<(f64, f64)> = cumulative.iter().map(|c| c * tau).zip(omega.iter().copied()).collect();
        Self::inverse_cdf_sampler(&knots)
    }

    /// Reads a two-column CSV (`ω, weight`, optional header) and builds
    /// [`Self::proportional_to_magnitude`].
    pub fn from_magnitude_csv(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut omega = Vec::new();
        let mut weight = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
                return Err(Error::invalid(format!("line {}: expected two columns", i + 1)));
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(w), Ok(m)) => {
                    omega.push(w);
                    weight.push(m);
                }
                _ if i == 0 => continue,
                _ => return Err(Error::invalid(format!("line {}: cannot parse `{line}`", i + 1))),
            }
        }
        Self::proportional_to_magnitude(&omega, &weight)
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn support(&self) -> Support {
        match &self.kind {
            Kind::LogUniform { lo, hi } | Kind::Uniform { lo, hi } => Support { lo: *lo, hi: *hi },
            Kind::Cauchy { .. } => Support {
                lo: 0.0,
                hi: f64::INFINITY,
            },
            Kind::Tabulated(t) => Support {
                lo: t.omega[0],
                hi: t.omega[t.omega.len() - 1],
            },
        }
    }

    fn magnitude_density(&self, w: f64) -> f64 {
        if !self.support().contains(w) {
            return 0.0;
        }
        match &self.kind {
            Kind::LogUniform { lo, hi } => 1.0 / (w * LN_10 * (hi.log10() - lo.log10())),
            Kind::Uniform { lo, hi } => 1.0 / (hi - lo),
            Kind::Cauchy { scale } => 2.0 * scale / (PI * (scale * scale + w * w)),
            Kind::Tabulated(t) => t.magnitude_density(w),
        }
    }

    /// Probability that the magnitude is at most `w ≥ 0`.
    pub fn magnitude_cdf(&self, w: f64) -> f64 {
        let s = self.support();
        if w < s.lo {
            return 0.0;
        }
        if w >= s.hi {
            return 1.0;
        }
        match &self.kind {
            Kind::LogUniform { lo, hi } => (w.log10() - lo.log10()) / (hi.log10() - lo.log10()),
            Kind::Uniform { lo, hi } => (w - lo) / (hi - lo),
            Kind::Cauchy { scale } => 2.0 / PI * (w / scale).atan(),
            Kind::Tabulated(t) => t.magnitude_cdf(w),
        }
    }

    /// Two-sided CDF `P(X ≤ ω)`.
    pub fn cdf(&self, omega: f64) -> f64 {
        let half = 0.5 * self.magnitude_cdf(omega.abs());
        if omega >= 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    }

    /// Exact two-sided density; zero outside the support.
    pub fn density(&self, omega: f64) -> f64 {
        0.5 * self.magnitude_density(omega.abs())
    }

    fn magnitude_quantile(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::LogUniform { lo, hi } => {
                let (a, b) = (lo.log10(), hi.log10());
                10f64.powf(a + u * (b - a)).clamp(*lo, *hi)
            }
            Kind::Uniform { lo, hi } => lo + u * (hi - lo),
            Kind::Cauchy { scale } => scale * (0.5 * PI * u).tan(),
            Kind::Tabulated(t) => t.quantile(u),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let negative: bool = rng.random();
        let w = self.magnitude_quantile(rng.random::<f64>());
        if negative {
            -w
        } else {
            w
        }
    }

    /// `count` i.i.d. draws, consuming `rng` in order.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.sample(rng)).collect()
    }
}

/// Outcome of the grid check of `‖Re f(ω)‖ / √p(ω) = O(1 / (|ω| + 1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceCheck {
    pub satisfied: bool,
    /// Largest `‖Re f‖ (|ω| + 1) / √p` on the grid.
    pub worst_ratio: f64,
    /// Log-log growth rate of the ratio over the upper quarter of the grid.
    pub tail_slope: f64,
    pub note: String,
}

/// Growth rates above this on the grid tail count as unbounded.
const TAIL_SLOPE_LIMIT: f64 = 0.1;

/// Grid heuristic for the bounded-variance condition on `p`.
///
/// A bounded support satisfies the condition trivially. Otherwise the ratio
/// `‖Re f‖ (|ω| + 1) / √p` is evaluated on the grid points inside the support
/// and declared bounded when its log-log slope over the largest quarter of
/// `|ω|` does not exceed `0.1`.
pub fn check_variance_condition(
    dist: &SamplingDistribution,
    f_magnitude: impl Fn(f64) -> f64,
    grid: &[f64],
) -> VarianceCheck {
    let mut points: Vec<(f64, f64)> = grid
        .iter()
        .filter(|&&w| dist.density(w) > 0.0)
        .map(|&w| {
            let ratio = f_magnitude(w).abs() * (w.abs() + 1.0) / dist.density(w).sqrt();
            (w.abs(), ratio)
        })
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let worst_ratio = points.iter().fold(0.0_f64, |m, p| m.max(p.1));

    if dist.support().is_bounded() {
        return VarianceCheck {
            satisfied: true,
            worst_ratio,
            tail_slope: 0.0,
            note: "support is bounded: condition holds trivially".into(),
        };
    }
    if worst_ratio == 0.0 {
        return VarianceCheck {
            satisfied: true,
            worst_ratio,
            tail_slope: 0.0,
            note: "integrand vanishes on the grid".into(),
        };
    }
    let tail: Vec<(f64, f64)> = points[points.len() * 3 / 4..]
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(w, r)| ((w + 1.0).ln(), r.ln()))
        .collect();
    let tail_slope = if tail.len() >= 2 {
        let n = tail.len() as f64;
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx > 0.0 {
            sxy / sxx
        } else {
            0.0
        }
    } else {
        0.0
    };
    let satisfied = tail_slope <= TAIL_SLOPE_LIMIT;
    VarianceCheck {
        satisfied,
        worst_ratio,
        tail_slope,
        note: format!("tail log-log slope {tail_slope:.3} (limit {TAIL_SLOPE_LIMIT})"),
    }
}
