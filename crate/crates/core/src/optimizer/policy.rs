//! Step-size policies and their ℓ2 sums.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::budget::StabilityBudget;

/// Rule used inside one segment of a piecewise schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SegmentRule {
    Constant { alpha: f64 },
    /// `coeff / (k + offset)^p`.
    Power {
        coeff: f64,
        p: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl SegmentRule {
    fn at(&self, k: u64) -> f64 {
        match *self {
            SegmentRule::Constant { alpha } => alpha,
            SegmentRule::Power { coeff, p, offset } => coeff / (k as f64 + offset).powf(p),
        }
    }

    fn scaled(&self, f: f64) -> Self {
        match *self {
            SegmentRule::Constant { alpha } => SegmentRule::Constant { alpha: alpha * f },
            SegmentRule::Power { coeff, p, offset } => SegmentRule::Power {
                coeff: coeff * f,
                p,
                offset,
            },
        }
    }
}

/// Segment covering iterations up to `until` (inclusive); `None` is open-ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub until: Option<u64>,
    #[serde(flatten)]
    pub rule: SegmentRule,
}

/// `α_k` as a function of the zero-based update index `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Constant { alpha: f64 },
    /// `alpha0 / (k + 1)^p`.
    PowerLaw { alpha0: f64, p: f64 },
    /// Segments in order; past the last bounded segment `α_k = 0`.
    Piecewise { segments: Vec<Segment> },
    /// `alpha0 · factor^⌊k / every⌋`.
    StepDecay { alpha0: f64, factor: f64, every: u64 },
    /// Listed values; zero past the end of the list.
    Explicit { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSizePolicy {
    pub schedule: Schedule,
    /// `α_max`; every step is clamped to it.
    pub cap: f64,
}

/// Iterations summed term by term before switching to tail formulas.
const DIRECT_TERMS: u64 = 100_000;

impl StepSizePolicy {
    pub fn new(schedule: Schedule) -> Result<Self> {
        let p = Self {
            schedule,
            cap: f64::INFINITY,
        };
        p.validate_shape()?;
        Ok(p)
    }

    pub fn constant(alpha: f64) -> Result<Self> {
        Self::new(Schedule::Constant { alpha })
    }

    pub fn power_law(alpha0: f64, p: f64) -> Result<Self> {
        Self::new(Schedule::PowerLaw { alpha0, p })
    }

    pub fn piecewise(segments: Vec<Segment>) -> Result<Self> {
        Self::new(Schedule::Piecewise { segments })
    }

    pub fn step_decay(alpha0: f64, factor: f64, every: u64) -> Result<Self> {
        Self::new(Schedule::StepDecay { alpha0, factor, every })
    }

    /// `alpha0`, halved every `every` iterations.
    pub fn halving(alpha0: f64, every: u64) -> Result<Self> {
        Self::step_decay(alpha0, 0.5, every)
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        Self::new(Schedule::Explicit { values })
    }

    /// `1e-4` through `k = 20`, halved at 21 and 41, then `(61/k)·1.25e-5`.
    pub fn observer_schedule() -> Self {
        let base = 1e-4;
        Self::piecewise(vec![
            Segment {
                until: Some(20),
                rule: SegmentRule::Constant { alpha: base },
            },
            Segment {
                until: Some(40),
                rule: SegmentRule::Constant { alpha: base / 2.0 },
            },
            Segment {
                until: Some(60),
                rule: SegmentRule::Constant { alpha: base / 4.0 },
            },
            Segment {
                until: None,
                rule: SegmentRule::Power {
                    coeff: 61.0 * base / 8.0,
                    p: 1.0,
                    offset: 0.0,
                },
            },
        ])
        .expect("static schedule is valid")
    }

    pub fn with_cap(mut self, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(Error::invalid(format!("step cap {cap} must be positive")));
        }
        self.cap = cap;
        Ok(self)
    }

    fn validate_shape(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        match &self.schedule {
            Schedule::Constant { alpha } if !nonneg(*alpha) => bad(format!("step size {alpha}")),
            Schedule::PowerLaw { alpha0, p } if !nonneg(*alpha0) || !(p.is_finite() && *p >= 0.0) => {
                bad(format!("power law {alpha0}/(k+1)^{p}"))
            }
            Schedule::StepDecay { alpha0, factor, every }
                if !nonneg(*alpha0) || !nonneg(*factor) || *every == 0 =>
            {
                bad(format!("step decay {alpha0}·{factor}^(k/{every})"))
            }
            Schedule::Explicit { values } if values.iter().any(|v| !nonneg(*v)) => {
                bad("explicit step sizes must be finite and nonnegative".into())
            }
            Schedule::Piecewise { segments } => {
                if segments.is_empty() {
                    return bad("piecewise schedule has no segments".into());
                }
                let mut start = 0u64;
                for (i, s) in segments.iter().enumerate() {
                    match s.rule {
                        SegmentRule::Constant { alpha } if !nonneg(alpha) => {
                            return bad(format!("segment {i}: step size {alpha}"))
                        }
                        SegmentRule::Power { coeff, p, offset } => {
                            if !nonneg(coeff) || !(p.is_finite() && p >= 0.0) || !offset.is_finite() {
                                return bad(format!("segment {i}: power rule"));
                            }
                            if p > 0.0 && start as f64 + offset <= 0.0 {
                                return bad(format!("segment {i}: power rule is singular at k = {start}"));
                            }
                        }
                        _ => {}
                    }
                    match s.until {
                        Some(u) if u < start => return bad(format!("segment {i} ends before it starts")),
                        Some(u) => start = u + 1,
                        None if i + 1 != segments.len() => {
                            return bad(format!("open-ended segment {i} is not last"))
                        }
                        None => {}
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn raw(&self, k: u64) -> f64 {
        match &self.schedule {
            Schedule::Constant { alpha } => *alpha,
            Schedule::PowerLaw { alpha0, p } => alpha0 / (k as f64 + 1.0).powf(*p),
            Schedule::Piecewise { segments } => segments
                .iter()
                .find(|s| s.until.is_none_or(|u| k <= u))
                .map_or(0.0, |s| s.rule.at(k)),
            Schedule::StepDecay { alpha0, factor, every } => {
                let j = (k / every).min(i32::MAX as u64) as i32;
                alpha0 * factor.powi(j)
            }
            Schedule::Explicit { values } => values.get(k as usize).copied().unwrap_or(0.0),
        }
    }

    /// `α_k` (clamped to the cap).
    pub fn step(&self, k: u64) -> f64 {
        self.raw(k).min(self.cap)
    }

    /// The same policy with every step multiplied by `factor`; the cap is kept.
    pub fn scaled(&self, factor: f64) -> Self {
        let schedule = match &self.schedule {
            Schedule::Constant { alpha } => Schedule::Constant { alpha: alpha * factor },
            Schedule::PowerLaw { alpha0, p } => Schedule::PowerLaw {
                alpha0: alpha0 * factor,
                p: *p,
            },
            Schedule::Piecewise { segments } => Schedule::Piecewise {
                segments: segments
                    .iter()
                    .map(|s| Segment {
                        until: s.until,
                        rule: s.rule.scaled(factor),
                    })
                    .collect(),
            },
            Schedule::StepDecay { alpha0, factor: f, every } => Schedule::StepDecay {
                alpha0: alpha0 * factor,
                factor: *f,
                every: *every,
            },
            Schedule::Explicit { values } => Schedule::Explicit {
                values: values.iter().map(|v| v * factor).collect(),
            },
        };
        Self { schedule, cap: self.cap }
    }

    /// `Σ α_k²` over `k < horizon`, or over all `k` when `horizon` is `None`.
    /// Infinite horizons sum the first 10⁵ terms directly and close the tail
    /// analytically (Hurwitz zeta for power rules, geometric series for step
    /// decay); the tail ignores the cap, which is exact once the schedule has
    /// dropped below it.
    pub fn sum_of_squares(&self, horizon: Option<u64>) -> f64 {
        let direct_end = horizon.map_or(DIRECT_TERMS, |h| h);
        let direct: f64 = (0..direct_end).map(|k| self.step(k).powi(2)).sum();
        if horizon.is_some() {
            return direct;
        }
        if self.raw(DIRECT_TERMS) > self.cap {
            // still capped at the switch point: the tail is a capped constant
            return if self.cap > 0.0 { f64::INFINITY } else { direct };
        }
        direct + self.tail_sum_of_squares(DIRECT_TERMS)
    }

    fn tail_sum_of_squares(&self, from: u64) -> f64 {
        match &self.schedule {
            Schedule::Constant { alpha } => {
                if *alpha > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            Schedule::PowerLaw { alpha0, p } => power_range(*alpha0, *p, 1.0, from, None),
            Schedule::Piecewise { segments } => {
                let mut start = 0u64;
                let mut total = 0.0;
                for s in segments {
                    let lo = start.max(from);
                    let past = s.until.is_some_and(|u| u < lo);
                    if !past {
                        total += match s.rule {
                            SegmentRule::Constant { alpha } => match s.until {
                                Some(u) => alpha * alpha * (u + 1 - lo) as f64,
                                None if alpha > 0.0 => f64::INFINITY,
                                None => 0.0,
                            },
                            SegmentRule::Power { coeff, p, offset } => power_range(coeff, p, offset, lo, s.until),
                        };
                    }
                    if let Some(u) = s.until {
                        start = u + 1;
                    }
                }
                total
            }
            Schedule::StepDecay { alpha0, factor, every } => {
                if *alpha0 == 0.0 {
                    return 0.0;
                }
                if *factor >= 1.0 {
                    return f64::INFINITY;
                }
                let j0 = from / every;
                let partial = (every * (j0 + 1) - from) as f64;
                let f2 = factor * factor;
                let a2 = alpha0 * alpha0;
                let head = a2 * f2.powi(j0 as i32) * partial;
                head + a2 * *every as f64 * f2.powi(j0 as i32 + 1) / (1.0 - f2)
            }
            Schedule::Explicit { values } => values.iter().skip(from as usize).map(|v| v * v).sum(),
        }
    }

    /// Largest `α_k`; schedules are nonincreasing past the direct window.
    pub fn max_step(&self) -> f64 {
        let mut m = (0..DIRECT_TERMS).map(|k| self.step(k)).fold(0.0, f64::max);
        if let Schedule::Explicit { values } = &self.schedule {
            m = values.iter().fold(m, |a, &v| a.max(v.min(self.cap)));
        }
        m
    }

    /// `p` with `α_k = Θ(1/k^p)`, when the tail is a power law or constant.
    pub fn asymptotic_exponent(&self) -> Option<f64> {
        match &self.schedule {
            Schedule::Constant { alpha } if *alpha > 0.0 => Some(0.0),
            Schedule::PowerLaw { alpha0, p } if *alpha0 > 0.0 => Some(*p),
            Schedule::Piecewise { segments } => match segments.last() {
                Some(Segment { until: None, rule }) => match *rule {
                    SegmentRule::Constant { alpha } if alpha > 0.0 => Some(0.0),
                    SegmentRule::Power { coeff, p, .. } if coeff > 0.0 => Some(p),
                    _ => None,
                },
                _ => None,
            },
            _ => None,
        }
    }

    /// Rescales so that `Σ α_k² ≤ budget.sum_bound` over the horizon and
    /// applies the `1/L` cap. Policies already inside the budget are only
    /// capped.
    pub fn fit_to_budget(&self, budget: &StabilityBudget, horizon: Option<u64>) -> Result<Self> {
        let mut p = self.clone();
        p.cap = p.cap.min(budget.alpha_cap);
        let s = p.sum_of_squares(horizon);
        if !s.is_finite() {
            return Err(Error::invalid("policy is not square summable over the horizon"));
        }
        if s <= budget.sum_bound {
            return Ok(p);
        }
        // capped steps shrink less than the raw schedule, so the capped sum is
        // not quadratic in the factor; bisect on it (it is monotone)
        let target = budget.sum_bound * (1.0 - 1e-12);
        let mut lo = 0.0;
        let mut hi = (budget.sum_bound / s).sqrt();
        if p.scaled(hi).sum_of_squares(horizon) <= target {
            return Ok(p.scaled(hi));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p.scaled(mid).sum_of_squares(horizon) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        Ok(p.scaled(lo))
    }
}

/// `Σ_{k=a}^{b} (coeff / (k + offset)^p)²`, `b = None` meaning ∞.
fn power_range(coeff: f64, p: f64, offset: f64, a: u64, b: Option<u64>) -> f64 {
    if coeff == 0.0 {
        return 0.0;
    }
    let s = 2.0 * p;
    let c2 = coeff * coeff;
    let q = a as f64 + offset;
    match b {
        None if s <= 1.0 => f64::INFINITY,
        None => c2 * hurwitz_zeta(s, q),
        Some(b) if b < a => 0.0,
        Some(b) if s == 1.0 || b - a < 1_000_000 => (a..=b).map(|k| c2 / (k as f64 + offset).powf(s)).sum(),
        Some(b) => c2 * (hurwitz_zeta(s, q) - hurwitz_zeta(s, b as f64 + 1.0 + offset)),
    }
}

/// `ζ(s, q) = Σ_{k≥0} (q + k)^{-s}` for `s ≠ 1`, `q > 0`, by Euler–Maclaurin
/// summation after shifting `q` past 16.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    const B2: [f64; 7] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
    ];
    let shift = (16.0 - q).max(0.0).ceil() as u64;
    let mut sum: f64 = (0..shift).map(|k| (q + k as f64).powf(-s)).sum();
    let x = q + shift as f64;
    sum += x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // term_j = B_2j / (2j)! · s (s+1) … (s+2j−2) · x^{−s−2j+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut xpow = x.powf(-s - 1.0);
    for (j, b) in B2.iter().enumerate() {
        sum += b / fact * rising * xpow;
        let m = 2.0 * j as f64;
        rising *= (s + m + 1.0) * (s + m + 2.0);
        fact *= (m + 3.0) * (m + 4.0);
        xpow /= x * x;
    }
    sum
}

/// Verdicts of [`validate_policy`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyReport {
    pub sum_of_squares: f64,
    pub square_summable: bool,
    /// `None` without a budget.
    pub within_budget: Option<bool>,
    pub within_cap: Option<bool>,
    pub max_step: f64,
    pub asymptotic_exponent: Option<f64>,
    /// `α_k = Θ(1/k^p)` with `p ∈ (1/2, 1]`.
    pub theta_power: bool,
}

pub fn validate_policy(policy: &StepSizePolicy, budget: Option<&StabilityBudget>, horizon: Option<u64>) -> PolicyReport {
    let sum = policy.sum_of_squares(horizon);
    let max_step = policy.max_step();
    let exponent = policy.asymptotic_exponent();
    PolicyReport {
        sum_of_squares: sum,
        square_summable: sum.is_finite(),
        within_budget: budget.map(|b| sum <= b.sum_bound),
        within_cap: budget.map(|b| max_step <= b.alpha_cap),
        max_step,
        asymptotic_exponent: exponent,
        theta_power: exponent.is_some_and(|p| p > 0.5 && p <= 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zeta_values() {
        assert!((hurwitz_zeta(2.0, 1.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((hurwitz_zeta(4.0, 1.0) - PI.powi(4) / 90.0).abs() < 1e-14);
        let direct: f64 = (0..200_000).map(|k| (2.5 + k as f64).powf(-3.0)).sum();
        assert!((hurwitz_zeta(3.0, 2.5) - direct).abs() < 1e-10);
    }

    #[test]
    fn observer_schedule_values() {
        let p = StepSizePolicy::observer_schedule();
        assert_eq!(p.step(0), 1e-4);
        assert_eq!(p.step(20), 1e-4);
        assert_eq!(p.step(21), 5e-5);
        assert_eq!(p.step(60), 2.5e-5);
        assert!((p.step(61) - 1.25e-5).abs() < 1e-20);
        assert!((p.step(100) - 0.61 * 1.25e-5).abs() < 1e-20);
    }

    #[test]
    fn halving_schedule() {
        let p = StepSizePolicy::halving(1e-2, 200).unwrap();
        assert_eq!(p.step(199), 1e-2);
        assert_eq!(p.step(200), 5e-3);
        assert_eq!(p.step(1999), 1e-2 / 512.0);
        let s = p.sum_of_squares(None);
        assert!((s - 1e-4 * 200.0 / (1.0 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn basel_sum() {
        let p = StepSizePolicy::power_law(0.3, 1.0).unwrap();
        assert!((p.sum_of_squares(None) - 0.09 * PI * PI / 6.0).abs() < 1e-13);
        assert_eq!(StepSizePolicy::power_law(0.3, 0.5).unwrap().sum_of_squares(None), f64::INFINITY);
    }

    #[test]
    fn cap_and_shape_validation() {
        let p = StepSizePolicy::constant(2.0).unwrap().with_cap(1.0).unwrap();
        assert_eq!(p.step(5), 1.0);
        assert!(StepSizePolicy::constant(-1.0).is_err());
        assert!(StepSizePolicy::piecewise(vec![Segment {
            until: None,
            rule: SegmentRule::Power {
                coeff: 1.0,
                p: 1.0,
                offset: 0.0
            }
        }])
        .is_err());
    }
}
