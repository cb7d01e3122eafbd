use std::fmt;
use std::sync::Arc;

use super::FrequencySystem;
use crate::error::{Error, Result};
use crate::TransferMatrix;

type Rule = dyn Fn(f64) -> TransferMatrix + Send + Sync;

/// A system known only through a closed-form frequency response.
#[derive(Clone)]
pub struct AnalyticSystem {
    dims: (usize, usize),
    rule: Arc<Rule>,
}

impl AnalyticSystem {
    pub fn new(dims: (usize, usize), rule: impl Fn(f64) -> TransferMatrix + Send + Sync + 'static) -> Self {
        Self {
            dims,
            rule: Arc::new(rule),
        }
    }

    /// Frequency-independent gain.
    pub fn constant(value: TransferMatrix) -> Self {
        let dims = value.shape();
        Self::new(dims, move |_| value.clone())
    }

    pub fn zero(dims: (usize, usize)) -> Self {
        Self::constant(TransferMatrix::zeros(dims.0, dims.1))
    }
}

impl fmt::Debug for AnalyticSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticSystem").field("dims", &self.dims).finish_non_exhaustive()
    }
}

impl FrequencySystem for AnalyticSystem {
    fn dims(&self) -> (usize, usize) {
        self.dims
    }

    fn evaluate(&self, omega: f64) -> Result<TransferMatrix> {
        let v = (self.rule)(omega);
        if v.shape() != self.dims {
            return Err(Error::dim(format!(
                "analytic rule returned {:?}, declared {:?}",
                v.shape(),
                self.dims
            )));
        }
        Ok(v)
    }
}
