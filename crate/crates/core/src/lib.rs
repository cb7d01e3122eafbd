//! Stochastic H2 optimization of parametrized linear time-invariant systems.
//!
//! The crate minimizes `c(μ) = ½‖G(μ)‖²_H2` by stochastic gradient descent,
//! where every gradient is a Monte Carlo estimate built from frequency-domain
//! samples of `G(μ)` and its parameter derivatives. Nothing in the descent
//! loop needs a state-space realization, so the same code drives large sparse
//! descriptor models and analytic (infinite-dimensional) transfer functions.
//!
//! Module map:
//!
//! - [`systems`]: frequency-evaluable systems, parametrized families and the
//!   two interconnection topologies used by the benchmarks.
//! - [`sampling`]: symmetric frequency sampling distributions.
//! - [`estimator`]: the gradient integrand and the Monte Carlo estimate.
//! - [`optimizer`]: step-size policies, the stability budget and the SGD loop.
//! - [`oracle`]: exact small-scale ground truth (Gramians, quadrature,
//!   spectral abscissa).
//! - [`benchmarks`]: the observer-design and PD-tuning experiments.
//! - [`verify`]: statistical property suites shared by the CLI and tests.

pub mod benchmarks;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod matrix_market;
pub mod optimizer;
pub mod oracle;
pub mod rng;
pub mod sampling;
pub mod systems;
pub mod verify;

pub use error::{Error, Result};
pub use estimator::{estimate_gradient, integrand, GradientEstimate};
pub use optimizer::{sgd_run, RunRecord, StepSizePolicy};
pub use oracle::{H2Value, DenseRealization};
pub use sampling::SamplingDistribution;
pub use systems::{FrequencySystem, ParameterBox, ParametrizedSystem};

/// Complex scalar used for all frequency-domain values.
pub type C64 = num_complex::Complex64;

/// Transfer matrix value `G(iω)` (outputs × inputs).
pub type TransferMatrix = nalgebra::DMatrix<C64>;
