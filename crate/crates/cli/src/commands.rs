use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::Serialize;

use sh2opt::estimator::{estimator_bias_probe, EstimatorOptions};
use sh2opt::optimizer::{sgd_run, Checkpoints, GradientMode, RunOptions, Termination};
use sh2opt::rng::trial_seed;
use sh2opt::systems::FrozenSystem;
use sh2opt::verify::{self, Suite, SuiteReport};
use sh2opt::{FrequencySystem, H2Value, RunRecord};

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
struct TrialMeta {
    trial: usize,
    seed: u64,
    file: Option<String>,
    termination: Option<Termination>,
    final_mu: Option<Vec<f64>>,
    projection_active: Option<bool>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    version: &'a str,
    seed: u64,
    config_hash: String,
    config: &'a str,
    summary: &'a str,
    cost_method: &'a str,
    mu0: Vec<f64>,
    trials: Vec<TrialMeta>,
}

/// Outcome of `optimize`: number of trials that completed.
pub struct OptimizeOutcome {
    pub completed: usize,
    pub trials: usize,
}

pub fn optimize(cfg: &RunConfig) -> anyhow::Result<OptimizeOutcome> {
    let problem = cfg.problem.build()?;
    let mu0 = cfg.mu0.clone().unwrap_or_else(|| problem.default_mu0.clone());
    let dist = cfg.distribution()?;
    let policy = cfg.policy()?;
    let out = &cfg.output;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;

    let cost = &*problem.cost;
    let opts = RunOptions {
        gradient: GradientMode::Stochastic,
        checkpoints: (cfg.checkpoint_every > 0).then_some(Checkpoints {
            every: cfg.checkpoint_every,
            cost,
            divergence_bound: None,
        }),
        project: cfg.project,
        estimator: EstimatorOptions {
            record_cap: 0,
            parallel: false,
        },
    };
    let system = problem.system.as_ref();
    let results: Vec<(u64, sh2opt::Result<RunRecord>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(cfg.seed, t as u64);
            (seed, sgd_run(system, &mu0, &policy, &dist, cfg.samples, cfg.iterations, seed, &opts))
        })
        .collect();

    let mut trials = Vec::with_capacity(results.len());
    // k -> costs of the trials checkpointed at k
    let mut by_k: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut completed = 0;
    for (t, (seed, res)) in results.into_iter().enumerate() {
        match res {
            Ok(rec) => {
                let file = format!("trial_{t:03}.csv");
                let mut w = std::io::BufWriter::new(fs::File::create(out.join(&file))?);
                rec.write_csv(&mut w)?;
                w.flush()?;
                for c in &rec.checkpoints {
                    by_k.entry(c.k).or_default().push(c.cost.value());
                }
                if rec.termination == Termination::Completed {
                    completed += 1;
                }
                trials.push(TrialMeta {
                    trial: t,
                    seed,
                    file: Some(file),
                    final_mu: Some(rec.final_iterate().to_vec()),
                    projection_active: Some(rec.projection_active),
                    termination: Some(rec.termination),
                    error: None,
                });
            }
            Err(e) => trials.push(TrialMeta {
                trial: t,
                seed,
                file: None,
                termination: None,
                final_mu: None,
                projection_active: None,
                error: Some(e.to_string()),
            }),
        }
    }

    let mut summary = csv::Writer::from_path(out.join("summary.csv"))?;
    summary.write_record(["k", "trials", "mean_cost", "min_cost", "max_cost"])?;
    for (k, costs) in &by_k {
        let n = costs.len() as f64;
        let mean = costs.iter().sum::<f64>() / n;
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        summary.write_record([
            k.to_string(),
            costs.len().to_string(),
            fmt_float(mean),
            fmt_float(min),
            fmt_float(max),
        ])?;
    }
    summary.flush()?;

    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config_hash: cfg.hash()?,
        config: "config.toml",
        summary: "summary.csv",
        cost_method: problem.cost_method,
        mu0,
        trials,
    };
    fs::write(out.join("metadata.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(OptimizeOutcome {
        completed,
        trials: cfg.trials,
    })
}

fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.17e}")
    } else {
        "inf".into()
    }
}

/// Magnitude table `|G_ij(iω)|` at `mu`, one row per frequency.
///
/// A row is flagged `large` when its largest magnitude exceeds 100 times the
/// median over the sweep, and carries the error message when evaluation
/// fails at that frequency.
pub fn bode<W: Write>(cfg: &RunConfig, mu: Option<Vec<f64>>, omegas: &[f64], out: W) -> anyhow::Result<usize> {
    let problem = cfg.problem.build()?;
    let mu = mu.or_else(|| cfg.mu0.clone()).unwrap_or_else(|| problem.default_mu0.clone());
    let sys = FrozenSystem::new(problem.system.as_ref(), &mu)?;
    let (p, m) = sys.dims();
    let rows: Vec<Result<Vec<f64>, String>> = omegas
        .iter()
        .map(|&w| {
            sys.evaluate(w)
                .map(|g| (0..p).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| g[(i, j)].norm()).collect())
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut peaks: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|v| v.iter().copied().fold(0.0, f64::max))
        .filter(|v| v.is_finite())
        .collect();
    peaks.sort_by(f64::total_cmp);
    let median = peaks.get(peaks.len() / 2).copied().unwrap_or(0.0);

    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["omega".to_string()];
    for i in 0..p {
        for j in 0..m {
            header.push(format!("mag_{i}_{j}"));
        }
    }
    header.push("flag".into());
    w.write_record(&header)?;
    let mut flagged = 0;
    for (&omega, row) in omegas.iter().zip(&rows) {
        let mut rec = vec![fmt_float(omega)];
        match row {
            Ok(v) => {
                rec.extend(v.iter().map(|x| fmt_float(*x)));
                let peak = v.iter().copied().fold(0.0, f64::max);
                let large = !peak.is_finite() || (median > 0.0 && peak > 100.0 * median);
                if large {
                    flagged += 1;
                }
                rec.push(if large { "large".into() } else { String::new() });
            }
            Err(e) => {
                flagged += 1;
                rec.extend(std::iter::repeat_n(String::new(), p * m));
                rec.push(format!("error: {e}"));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(flagged)
}

pub fn run_verify(suite: Option<Suite>, seed: u64) -> anyhow::Result<Vec<SuiteReport>> {
    let suites: Vec<Suite> = match suite {
        Some(s) => vec![s],
        None => Suite::ALL.to_vec(),
    };
    suites
        .into_iter()
        .map(|s| verify::run_suite(s, seed).with_context(|| format!("suite {s}")))
        .collect()
}

#[derive(Debug, Serialize)]
pub struct NormReport {
    pub mu: Vec<f64>,
    pub stable: bool,
    pub cost: Option<f64>,
    pub norm: Option<f64>,
    pub method: String,
}

pub fn h2norm(cfg: &RunConfig, mu: Option<Vec<f64>>) -> anyhow::Result<NormReport> {
    let problem = cfg.problem.build()?;
    let mu = mu.or_else(|| cfg.mu0.clone()).unwrap_or_else(|| problem.default_mu0.clone());
    let c = (problem.cost)(&mu)?;
    let (stable, cost) = match c {
        H2Value::Finite(v) => (true, Some(v)),
        H2Value::Infinite => (false, None),
    };
    Ok(NormReport {
        mu,
        stable,
        cost,
        norm: cost.map(|v| (2.0 * v).sqrt()),
        method: problem.cost_method.into(),
    })
}

#[derive(Debug, Serialize)]
pub struct GradCheck {
    pub mu: Vec<f64>,
    pub samples: usize,
    pub repetitions: usize,
    /// Sampling band `[lo, hi]` the oracle gradient is integrated over.
    pub band: [f64; 2],
    pub oracle: Vec<f64>,
    pub mean: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub max_z: f64,
    /// Every component within 4 standard errors of the oracle.
    pub consistent: bool,
}

pub fn grad_check(
    cfg: &RunConfig,
    mu: Option<Vec<f64>>,
    samples: Option<usize>,
    repetitions: usize,
    seed: u64,
) -> anyhow::Result<GradCheck> {
    if repetitions < 2 {
        bail!("grad-check needs at least two repetitions");
    }
    let problem = cfg.problem.build()?;
    let mu = mu.or_else(|| cfg.mu0.clone()).unwrap_or_else(|| problem.default_mu0.clone());
    let dist = cfg.distribution()?;
    let m = samples.unwrap_or(cfg.samples);
    let band = dist.support();
    let oracle = (problem.gradient)(&mu, band)?;
    let probe = estimator_bias_probe(problem.system.as_ref(), &mu, &dist, m, repetitions, &oracle, seed)?;
    let max_z = probe.max_z();
    Ok(GradCheck {
        mu,
        samples: m,
        repetitions,
        band: [band.lo, band.hi],
        oracle,
        mean: probe.mean,
        standard_error: probe.standard_error,
        max_z,
        consistent: max_z <= 4.0,
    })
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> anyhow::Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || points == 0 {
        bail!("frequency grid needs 0 < lo <= hi and at least one point");
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..points)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect())
}

pub fn ensure_dir(p: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}
