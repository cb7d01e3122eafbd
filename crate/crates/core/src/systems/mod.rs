//! Frequency-evaluable LTI systems and parametrized families of them.
//!
//! Everything the optimizer touches is evaluated pointwise at `s = iω`;
//! interconnections compose complex values and never build a joint
//! realization, which is what allows analytic (infinite-dimensional) plants.

mod affine;
mod analytic;
mod interconnect;
mod state_space;

pub use affine::AffineStateSpaceFamily;
pub use analytic::AnalyticSystem;
pub use interconnect::{
    disturbance_feedback_value, feedback_interconnect, observer_error_value, Interconnection,
    Topology,
};
pub use state_space::{DescriptorStateSpace, StateMatrix, Storage};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::TransferMatrix;

/// Anything that returns a transfer matrix value at `s = iω`.
///
/// Implementations are immutable after construction and may be evaluated
/// concurrently; scratch memory is allocated per call.
pub trait FrequencySystem: Send + Sync {
    /// `(outputs, inputs)`.
    fn dims(&self) -> (usize, usize);

    fn evaluate(&self, omega: f64) -> Result<TransferMatrix>;
}

impl<S: FrequencySystem + ?Sized> FrequencySystem for Arc<S> {
    fn dims(&self) -> (usize, usize) {
        (**self).dims()
    }

    fn evaluate(&self, omega: f64) -> Result<TransferMatrix> {
        (**self).evaluate(omega)
    }
}

impl<S: FrequencySystem + ?Sized> FrequencySystem for &S {
    fn dims(&self) -> (usize, usize) {
        (**self).dims()
    }

    fn evaluate(&self, omega: f64) -> Result<TransferMatrix> {
        (**self).evaluate(omega)
    }
}

/// Axis-aligned parameter box; bounds may be infinite. Membership is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterBox {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim("parameter box bounds differ in length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(Error::invalid("parameter box has an empty or NaN side"));
        }
        Ok(Self { lower, upper })
    }

    /// `μ ≤ 0` componentwise.
    pub fn nonpositive(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// True when at least one bound is finite.
    pub fn is_proper(&self) -> bool {
        self.lower.iter().chain(&self.upper).any(|b| b.is_finite())
    }

    pub fn contains(&self, mu: &[f64]) -> bool {
        self.check(mu).is_ok()
    }

    pub fn check(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != self.dim() {
            return Err(Error::dim(format!(
                "parameter vector has length {}, expected {}",
                mu.len(),
                self.dim()
            )));
        }
        for (index, ((&value, &lower), &upper)) in mu.iter().zip(&self.lower).zip(&self.upper).enumerate() {
            if !(value >= lower && value <= upper) {
                return Err(Error::OutsideDomain {
                    index,
                    value,
                    lower,
                    upper,
                });
            }
        }
        Ok(())
    }

    /// Clamps onto the box; the flag reports whether any component moved.
    pub fn project(&self, mu: &[f64]) -> (Vec<f64>, bool) {
        let mut moved = false;
        let out = mu
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| {
                let c = v.clamp(l, u);
                moved |= c != v;
                c
            })
            .collect();
        (out, moved)
    }
}

/// A family `μ ↦ G(μ)` together with its parameter-gradient systems.
pub trait ParametrizedSystem: Send + Sync {
    fn n_params(&self) -> usize;

    /// `(outputs, inputs)` shared by `G(μ)` and every `∂G/∂μ_j`.
    fn dims(&self) -> (usize, usize);

    fn domain(&self) -> &ParameterBox;

    /// `G(μ; iω)` and `[∂G/∂μ_j(μ; iω)]_j` without the domain check.
    fn evaluate_unchecked(&self, mu: &[f64], omega: f64) -> Result<(TransferMatrix, Vec<TransferMatrix>)>;

    /// Value and parameter gradients at `iω`; `μ` must lie in the domain.
    fn evaluate_with_gradient(&self, mu: &[f64], omega: f64) -> Result<(TransferMatrix, Vec<TransferMatrix>)> {
        self.domain().check(mu)?;
        self.evaluate_unchecked(mu, omega)
    }

    fn evaluate(&self, mu: &[f64], omega: f64) -> Result<TransferMatrix> {
        Ok(self.evaluate_with_gradient(mu, omega)?.0)
    }
}

impl<P: ParametrizedSystem + ?Sized> ParametrizedSystem for Arc<P> {
    fn n_params(&self) -> usize {
        (**self).n_params()
    }
    fn dims(&self) -> (usize, usize) {
        (**self).dims()
    }
    fn domain(&self) -> &ParameterBox {
        (**self).domain()
    }
    fn evaluate_unchecked(&self, mu: &[f64], omega: f64) -> Result<(TransferMatrix, Vec<TransferMatrix>)> {
        (**self).evaluate_unchecked(mu, omega)
    }
}

/// `G(μ)` at a fixed parameter, as a plain frequency system.
pub struct FrozenSystem<'a> {
    family: &'a dyn ParametrizedSystem,
    mu: Vec<f64>,
}

impl<'a> FrozenSystem<'a> {
    pub fn new(family: &'a dyn ParametrizedSystem, mu: &[f64]) -> Result<Self> {
        family.domain().check(mu)?;
        Ok(Self {
            family,
            mu: mu.to_vec(),
        })
    }
}

impl FrequencySystem for FrozenSystem<'_> {
    fn dims(&self) -> (usize, usize) {
        self.family.dims()
    }

    fn evaluate(&self, omega: f64) -> Result<TransferMatrix> {
        self.family.evaluate(&self.mu, omega)
    }
}

/// `∂G/∂μ_j` at a fixed parameter.
pub struct GradientSystem<'a> {
    family: &'a dyn ParametrizedSystem,
    mu: Vec<f64>,
    index: usize,
}

impl<'a> GradientSystem<'a> {
    pub fn new(family: &'a dyn ParametrizedSystem, mu: &[f64], index: usize) -> Result<Self> {
        family.domain().check(mu)?;
        if index >= family.n_params() {
            return Err(Error::dim(format!(
                "gradient index {index} for a family with {} parameters",
                family.n_params()
            )));
        }
        Ok(Self {
            family,
            mu: mu.to_vec(),
            index,
        })
    }
}

impl FrequencySystem for GradientSystem<'_> {
    fn dims(&self) -> (usize, usize) {
        self.family.dims()
    }

    fn evaluate(&self, omega: f64) -> Result<TransferMatrix> {
        let (_, mut grads) = self.family.evaluate_with_gradient(&self.mu, omega)?;
        Ok(grads.swap_remove(self.index))
    }
}

/// Largest entrywise deviation between the central difference
/// `(G(μ+h e_j) − G(μ−h e_j)) / 2h` and the reported `∂G/∂μ_j(μ; iω)`,
/// maximized over `j`.
pub fn parameter_gradient_fd_check(
    ps: &dyn ParametrizedSystem,
    mu: &[f64],
    omega: f64,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let (_, grads) = ps.evaluate_with_gradient(mu, omega)?;
    let mut worst = 0.0_f64;
    for (j, grad) in grads.iter().enumerate() {
        let mut plus = mu.to_vec();
        let mut minus = mu.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let gp = ps.evaluate(&plus, omega)?;
        let gm = ps.evaluate(&minus, omega)?;
        let fd = (gp - gm) / crate::C64::new(2.0 * h, 0.0);
        let dev = (fd - grad).iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        worst = worst.max(dev);
    }
    Ok(worst)
}
