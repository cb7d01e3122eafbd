//! The SGD loop and its record.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{estimate_gradient_with, EstimatorOptions, SampleRecord};
use crate::oracle::H2Value;
use crate::sampling::SamplingDistribution;
use crate::systems::ParametrizedSystem;

use super::policy::StepSizePolicy;

pub type CostFn<'a> = &'a (dyn Fn(&[f64]) -> Result<H2Value> + Sync);
pub type GradientFn<'a> = &'a (dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync);

/// Where the descent direction comes from.
#[derive(Clone, Copy)]
pub enum GradientMode<'a> {
    /// Monte Carlo estimate (the method itself).
    Stochastic,
    /// A supplied exact gradient, e.g. the dense oracle.
    Exact(GradientFn<'a>),
}

/// Cost evaluations `c(μ_k)` at `k = 0, every, 2·every, …` and at the final
/// iterate.
#[derive(Clone, Copy)]
pub struct Checkpoints<'a> {
    pub every: usize,
    pub cost: CostFn<'a>,
    /// Stop when a checkpointed cost exceeds this bound or is infinite.
    pub divergence_bound: Option<f64>,
}

#[derive(Clone, Copy)]
pub struct RunOptions<'a> {
    pub gradient: GradientMode<'a>,
    pub checkpoints: Option<Checkpoints<'a>>,
    /// Clamp iterates onto the parameter box after each step.
    pub project: bool,
    pub estimator: EstimatorOptions,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        Self {
            gradient: GradientMode::Stochastic,
            checkpoints: None,
            project: true,
            estimator: EstimatorOptions {
                record_cap: 0,
                parallel: true,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub k: usize,
    pub alpha: f64,
    /// Descent direction used at `μ_k`.
    pub estimate: Vec<f64>,
    pub estimate_norm: f64,
    /// Random stream of the estimate (`k`).
    pub stream: u64,
    /// The box projection moved `μ_k − α_k ĝ_k`.
    pub projected: bool,
    pub seconds: f64,
    pub samples: Vec<SampleRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckpointRecord {
    pub k: usize,
    pub cost: H2Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Diverged { k: usize, cost: H2Value },
    EvaluationFailed { k: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    /// `μ_0, …, μ_N` (fewer after an early stop).
    pub iterates: Vec<Vec<f64>>,
    pub steps: Vec<StepRecord>,
    pub checkpoints: Vec<CheckpointRecord>,
    pub seed: u64,
    pub samples_per_estimate: usize,
    pub termination: Termination,
    pub projection_active: bool,
}

impl RunRecord {
    pub fn final_iterate(&self) -> &[f64] {
        self.iterates.last().expect("a record always holds μ_0")
    }

    pub fn checkpoint_at(&self, k: usize) -> Option<H2Value> {
        self.checkpoints.iter().find(|c| c.k == k).map(|c| c.cost)
    }

    /// Largest deviation of `μ_{k+1}` from `μ_k − α_k ĝ_k` over unprojected steps.
    pub fn replay_deviation(&self) -> f64 {
        self.steps
            .iter()
            .filter(|s| !s.projected)
            .filter_map(|s| {
                let next = self.iterates.get(s.k + 1)?;
                let cur = &self.iterates[s.k];
                Some(
                    cur.iter()
                        .zip(&s.estimate)
                        .zip(next)
                        .map(|((m, g), n)| (m - s.alpha * g - n).abs())
                        .fold(0.0, f64::max),
                )
            })
            .fold(0.0, f64::max)
    }

    /// Trajectory CSV: `k, alpha, mu_0.., estimate_norm, cost`; step columns
    /// are empty on the last iterate, `cost` is empty off checkpoints.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.iterates[0].len();
        write!(out, "k,alpha")?;
        for j in 0..n {
            write!(out, ",mu_{j}")?;
        }
        writeln!(out, ",estimate_norm,cost")?;
        for (k, mu) in self.iterates.iter().enumerate() {
            let step = self.steps.get(k);
            match step {
                Some(s) => write!(out, "{k},{:e}", s.alpha)?,
                None => write!(out, "{k},")?,
            }
            for v in mu {
                write!(out, ",{v:e}")?;
            }
            match step {
                Some(s) => write!(out, ",{:e}", s.estimate_norm)?,
                None => write!(out, ",")?,
            }
            match self.checkpoint_at(k) {
                Some(c) => writeln!(out, ",{c}")?,
                None => writeln!(out, ",")?,
            }
        }
        Ok(())
    }
}

/// Runs `n` updates `μ_{k+1} = μ_k − α_k ∇̂c(μ_k)` from `mu0`; update `k`
/// draws its frequencies from stream `k` of `seed`.
///
/// An evaluation failure ends the run early with the reason recorded; the
/// partial record is still returned.
#[allow(clippy::too_many_arguments)]
pub fn sgd_run(
    ps: &dyn ParametrizedSystem,
    mu0: &[f64],
    policy: &StepSizePolicy,
    dist: &SamplingDistribution,
    m: usize,
    n: usize,
    seed: u64,
    opts: &RunOptions<'_>,
) -> Result<RunRecord> {
    ps.domain().check(mu0)?;
    if m == 0 {
        return Err(Error::invalid("sample count M must be at least 1"));
    }
    if let Some(c) = &opts.checkpoints {
        if c.every == 0 {
            return Err(Error::invalid("checkpoint cadence must be at least 1"));
        }
    }
    let project = opts.project && ps.domain().is_proper();
    let mut rec = RunRecord {
        iterates: vec![mu0.to_vec()],
        steps: Vec::with_capacity(n),
        checkpoints: Vec::new(),
        seed,
        samples_per_estimate: m,
        termination: Termination::Completed,
        projection_active: false,
    };

    for k in 0..=n {
        let mu = rec.iterates[k].clone();
        if let Some(c) = &opts.checkpoints {
            if k % c.every == 0 || k == n {
                match (c.cost)(&mu) {
                    Ok(cost) => {
                        rec.checkpoints.push(CheckpointRecord { k, cost });
                        let over = match cost {
                            H2Value::Infinite => true,
                            H2Value::Finite(v) => c.divergence_bound.is_some_and(|b| v > b),
                        };
                        if over && c.divergence_bound.is_some() {
                            rec.termination = Termination::Diverged { k, cost };
                            return Ok(rec);
                        }
                    }
                    Err(e) => {
                        rec.termination = Termination::EvaluationFailed {
                            k,
                            message: e.to_string(),
                        };
                        return Ok(rec);
                    }
                }
            }
        }
        if k == n {
            break;
        }

        let start = Instant::now();
        let direction = match opts.gradient {
            GradientMode::Stochastic => {
                estimate_gradient_with(ps, &mu, dist, m, seed, k as u64, &opts.estimator).map(|e| (e.estimate, e.samples))
            }
            GradientMode::Exact(g) => g(&mu).map(|v| (v, Vec::new())),
        };
        let (estimate, samples) = match direction {
            Ok(d) => d,
            Err(e) => {
                rec.termination = Termination::EvaluationFailed {
                    k,
                    message: e.to_string(),
                };
                return Ok(rec);
            }
        };
        let alpha = policy.step(k as u64);
        let stepped: Vec<f64> = mu.iter().zip(&estimate).map(|(x, g)| x - alpha * g).collect();
        let (next, projected) = if project {
            ps.domain().project(&stepped)
        } else {
            (stepped, false)
        };
        rec.projection_active |= projected;
        rec.steps.push(StepRecord {
            k,
            alpha,
            estimate_norm: estimate.iter().map(|v| v * v).sum::<f64>().sqrt(),
            estimate,
            stream: k as u64,
            projected,
            seconds: start.elapsed().as_secs_f64(),
            samples,
        });
        rec.iterates.push(next);
    }
    Ok(rec)
}
