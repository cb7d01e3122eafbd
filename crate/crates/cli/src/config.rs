//! Run configuration files.
//!
//! A config is TOML with top-level run settings and three tables:
//!
//! ```toml
//! seed = 7
//! trials = 20
//! samples = 10            # M, frequencies per gradient estimate
//! iterations = 100        # N, number of updates
//! checkpoint_every = 10   # 0 disables oracle checkpoints
//! output = "runs/observer"
//! # mu0 = [ ... ]         # optional, else the problem's default start
//!
//! [problem]
//! kind = "observer"       # wave | wave-fd | observer | scaled-lag | moving-pole
//!                         # | summed-lag | constant-lag | random
//! r = 2
//!
//! [distribution]
//! kind = "log-uniform"    # log-uniform | uniform | cauchy | tabulated | inverse-cdf
//! lo = 1e-2
//! hi = 1e6
//!
//! [policy]
//! kind = "observer"       # constant | power-law | halving | step-decay | observer | explicit
//! ```
//!
//! Unknown keys are errors.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sh2opt::benchmarks::observer::{DiffusionPlantSpec, Initialization, ObserverOptions, PlantSource};
use sh2opt::benchmarks::random::random_affine_family;
use sh2opt::benchmarks::wave::{wave_fd_closed_loop, wave_fd_discretize_with};
use sh2opt::benchmarks::{build_observer_problem, initialize_observer, scalar, WaveEquationProblem};
use sh2opt::oracle::{cost, exact_gradient, gradient_quadrature_between, RealizableFamily};
use sh2opt::systems::AffineStateSpaceFamily;
use sh2opt::sampling::Support;
use sh2opt::{H2Value, ParametrizedSystem, SamplingDistribution, StepSizePolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "one")]
    pub trials: usize,
    pub samples: usize,
    pub iterations: usize,
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0: Option<Vec<f64>>,
    /// Clamp iterates onto the problem's parameter box.
    #[serde(default = "yes")]
    pub project: bool,
    pub problem: ProblemSpec,
    pub distribution: DistributionSpec,
    pub policy: PolicySpec,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_output() -> PathBuf {
    PathBuf::from("sh2opt-run")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Analytic damped wave equation with PD feedback; the oracle is its
    /// finite-difference model with `fd_states` states.
    Wave {
        #[serde(default = "wave_damping")]
        damping: f64,
        #[serde(default = "filter_time")]
        filter_time: f64,
        #[serde(default = "fd_states")]
        fd_states: usize,
    },
    /// The finite-difference wave model itself as the optimized system.
    WaveFd {
        #[serde(default = "wave_damping")]
        damping: f64,
        #[serde(default = "filter_time")]
        filter_time: f64,
        #[serde(default = "fd_states")]
        states: usize,
    },
    Observer {
        #[serde(default = "observer_order")]
        r: usize,
        #[serde(default)]
        plant: PlantSpec,
        #[serde(default = "quad_tol")]
        quadrature_rel_tol: f64,
        #[serde(default)]
        assume_stable: bool,
    },
    ScaledLag,
    MovingPole,
    SummedLag,
    ConstantLag {
        gain: f64,
    },
    Random {
        #[serde(default = "random_states")]
        states: usize,
        #[serde(default = "random_params")]
        params: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn wave_damping() -> f64 {
    sh2opt::benchmarks::wave::WAVE_DAMPING
}
fn filter_time() -> f64 {
    sh2opt::benchmarks::wave::FILTER_TIME
}
fn fd_states() -> usize {
    400
}
fn observer_order() -> usize {
    2
}
fn quad_tol() -> f64 {
    1e-8
}
fn random_states() -> usize {
    8
}
fn random_params() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantSpec {
    Synthetic {
        #[serde(default = "plant_n")]
        n: usize,
        #[serde(default = "plant_kappa")]
        diffusivity: f64,
        #[serde(default = "plant_input")]
        input_at: f64,
        #[serde(default = "plant_measured")]
        measured_at: f64,
        #[serde(default = "plant_observed")]
        observed_at: f64,
    },
    /// Matrix Market files; relative paths resolve against the config file.
    MatrixMarket {
        e: PathBuf,
        a: PathBuf,
        b: PathBuf,
        c_y: PathBuf,
        c_z: PathBuf,
    },
}

impl Default for PlantSpec {
    fn default() -> Self {
        let d = DiffusionPlantSpec::default();
        PlantSpec::Synthetic {
            n: d.n,
            diffusivity: d.diffusivity,
            input_at: d.input_at,
            measured_at: d.measured_at,
            observed_at: d.observed_at,
        }
    }
}

fn plant_n() -> usize {
    DiffusionPlantSpec::default().n
}
fn plant_kappa() -> f64 {
    DiffusionPlantSpec::default().diffusivity
}
fn plant_input() -> f64 {
    DiffusionPlantSpec::default().input_at
}
fn plant_measured() -> f64 {
    DiffusionPlantSpec::default().measured_at
}
fn plant_observed() -> f64 {
    DiffusionPlantSpec::default().observed_at
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSpec {
    LogUniform { lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
    Cauchy { scale: f64 },
    /// Density proportional to a tabulated magnitude (`omega,magnitude` CSV).
    Tabulated { path: PathBuf },
    /// Inverse CDF knots `[u, omega]` of the magnitude `|ω|`.
    InverseCdf { knots: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    Constant {
        alpha: f64,
        cap: Option<f64>,
    },
    /// `alpha0 / (k + 1)^p`
    PowerLaw {
        alpha0: f64,
        p: f64,
        cap: Option<f64>,
    },
    Halving {
        alpha0: f64,
        every: u64,
        cap: Option<f64>,
    },
    StepDecay {
        alpha0: f64,
        factor: f64,
        every: u64,
        cap: Option<f64>,
    },
    /// Piecewise schedule of the observer experiment.
    Observer,
    Explicit {
        values: Vec<f64>,
        cap: Option<f64>,
    },
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let ProblemSpec::Observer {
            plant: PlantSpec::MatrixMarket { e, a, b, c_y, c_z },
            ..
        } = &mut self.problem
        {
            for p in [e, a, b, c_y, c_z] {
                fix(p);
            }
        }
        if let DistributionSpec::Tabulated { path } = &mut self.distribution {
            fix(path);
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.samples == 0 {
            bail!("samples must be at least 1");
        }
        self.distribution()?;
        self.policy()?;
        Ok(())
    }

    /// Canonical TOML text of the effective config.
    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of [`RunConfig::to_toml`] with `output` cleared, hex encoded.
    pub fn hash(&self) -> anyhow::Result<String> {
        let mut c = self.clone();
        c.output = PathBuf::new();
        Ok(hex::encode(Sha256::digest(c.to_toml()?.as_bytes())))
    }

    pub fn distribution(&self) -> anyhow::Result<SamplingDistribution> {
        Ok(match &self.distribution {
            DistributionSpec::LogUniform { lo, hi } => SamplingDistribution::log_uniform(*lo, *hi)?,
            DistributionSpec::Uniform { lo, hi } => SamplingDistribution::uniform(*lo, *hi)?,
            DistributionSpec::Cauchy { scale } => SamplingDistribution::cauchy(*scale)?,
            DistributionSpec::Tabulated { path } => SamplingDistribution::from_magnitude_csv(path)?,
            DistributionSpec::InverseCdf { knots } => {
                let k: Vec<(f64, f64)> = knots.iter().map(|[u, w]| (*u, *w)).collect();
                SamplingDistribution::inverse_cdf_sampler(&k)?
            }
        })
    }

    pub fn policy(&self) -> anyhow::Result<StepSizePolicy> {
        let capped = |p: StepSizePolicy, cap: &Option<f64>| -> anyhow::Result<StepSizePolicy> {
            Ok(match cap {
                Some(c) => p.with_cap(*c)?,
                None => p,
            })
        };
        Ok(match &self.policy {
            PolicySpec::Constant { alpha, cap } => capped(StepSizePolicy::constant(*alpha)?, cap)?,
            PolicySpec::PowerLaw { alpha0, p, cap } => capped(StepSizePolicy::power_law(*alpha0, *p)?, cap)?,
            PolicySpec::Halving { alpha0, every, cap } => capped(StepSizePolicy::halving(*alpha0, *every)?, cap)?,
            PolicySpec::StepDecay {
                alpha0,
                factor,
                every,
                cap,
            } => capped(StepSizePolicy::step_decay(*alpha0, *factor, *every)?, cap)?,
            PolicySpec::Observer => StepSizePolicy::observer_schedule(),
            PolicySpec::Explicit { values, cap } => capped(StepSizePolicy::explicit(values.clone())?, cap)?,
        })
    }
}

pub type CostOracle = Box<dyn Fn(&[f64]) -> sh2opt::Result<H2Value> + Send + Sync>;
/// `∇c(μ)` restricted to the band `lo ≤ |ω| ≤ hi`.
pub type GradientOracle = Box<dyn Fn(&[f64], Support) -> sh2opt::Result<Vec<f64>> + Send + Sync>;

/// A problem ready to run: the system, its default start and its oracles.
pub struct Problem {
    pub system: Arc<dyn ParametrizedSystem>,
    pub default_mu0: Vec<f64>,
    /// `c(μ)` by the most accurate method available at this size.
    pub cost: CostOracle,
    pub gradient: GradientOracle,
    /// Short description of the cost oracle.
    pub cost_method: &'static str,
}

fn affine(family: AffineStateSpaceFamily, mu0: Vec<f64>) -> Problem {
    let family = Arc::new(family);
    let (f1, f2) = (family.clone(), family.clone());
    Problem {
        system: family,
        default_mu0: mu0,
        cost: Box::new(move |mu| cost(f1.as_ref() as &dyn RealizableFamily, mu)),
        gradient: Box::new(move |mu, band| {
            if band.lo == 0.0 && band.hi == f64::INFINITY {
                exact_gradient(f2.as_ref() as &dyn RealizableFamily, mu)
            } else {
                Ok(gradient_quadrature_between(f2.as_ref(), mu, band.lo, band.hi, 1e-10)?.0)
            }
        }),
        cost_method: "gramian",
    }
}

impl ProblemSpec {
    pub fn build(&self) -> anyhow::Result<Problem> {
        Ok(match self {
            ProblemSpec::Wave {
                damping,
                filter_time,
                fd_states,
            } => {
                let system = Arc::new(WaveEquationProblem::new(*damping, *filter_time));
                let fd = Arc::new(wave_fd_closed_loop(&wave_fd_discretize_with(*fd_states, *damping)?, *filter_time)?);
                let s = system.clone();
                Problem {
                    system,
                    default_mu0: vec![0.0, 0.0],
                    cost: Box::new(move |mu| cost(fd.as_ref() as &dyn RealizableFamily, mu)),
                    gradient: Box::new(move |mu, band| Ok(gradient_quadrature_between(s.as_ref(), mu, band.lo, band.hi, 1e-8)?.0)),
                    cost_method: "finite-difference gramian",
                }
            }
            ProblemSpec::WaveFd {
                damping,
                filter_time,
                states,
            } => affine(
                wave_fd_closed_loop(&wave_fd_discretize_with(*states, *damping)?, *filter_time)?,
                vec![0.0, 0.0],
            ),
            ProblemSpec::Observer {
                r,
                plant,
                quadrature_rel_tol,
                assume_stable,
            } => {
                let source = match plant {
                    PlantSpec::Synthetic {
                        n,
                        diffusivity,
                        input_at,
                        measured_at,
                        observed_at,
                    } => PlantSource::Synthetic(DiffusionPlantSpec {
                        n: *n,
                        diffusivity: *diffusivity,
                        input_at: *input_at,
                        measured_at: *measured_at,
                        observed_at: *observed_at,
                    }),
                    PlantSpec::MatrixMarket { e, a, b, c_y, c_z } => PlantSource::MatrixMarket {
                        e: e.clone(),
                        a: a.clone(),
                        b: b.clone(),
                        c_y: c_y.clone(),
                        c_z: c_z.clone(),
                    },
                };
                let opts = ObserverOptions {
                    assume_stable: *assume_stable,
                    quadrature_rel_tol: *quadrature_rel_tol,
                };
                let problem = Arc::new(build_observer_problem(source, *r, &opts)?);
                let mu0 = initialize_observer(&problem, &Initialization::ReducedKalman)?;
                let (p1, p2) = (problem.clone(), problem.clone());
                let tol = *quadrature_rel_tol;
                Problem {
                    system: problem,
                    default_mu0: mu0,
                    cost: Box::new(move |mu| p1.cost(mu)),
                    gradient: Box::new(move |mu, band| Ok(gradient_quadrature_between(p2.as_ref(), mu, band.lo, band.hi, tol)?.0)),
                    cost_method: "quadrature",
                }
            }
            ProblemSpec::ScaledLag => affine(scalar::scaled_lag(), vec![2.0]),
            ProblemSpec::MovingPole => affine(scalar::moving_pole(), vec![1.0]),
            ProblemSpec::SummedLag => affine(scalar::summed_lag(), vec![1.0, 1.0]),
            ProblemSpec::ConstantLag { gain } => affine(scalar::constant_lag(*gain), vec![0.0]),
            ProblemSpec::Random { states, params, seed } => {
                affine(random_affine_family(*states, *params, *seed)?, vec![0.0; *params])
            }
        })
    }
}
