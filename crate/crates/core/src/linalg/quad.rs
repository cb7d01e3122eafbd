//! Globally adaptive Gauss–Kronrod (7/15) quadrature for vector integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: Vec<f64>,
    /// Estimated absolute error (Euclidean norm over components).
    pub error: f64,
    pub evaluations: usize,
    pub intervals: usize,
}

#[derive(Debug, Clone)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-8,
            max_intervals: 20_000,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F>(f: &mut F, a: f64, b: f64, dim: &mut Option<usize>) -> Result<Panel>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron: Vec<f64> = Vec::new();
    let mut gauss: Vec<f64> = Vec::new();
    let mut add = |v: Vec<f64>, wk: f64, wg: f64, kron: &mut Vec<f64>, gauss: &mut Vec<f64>| -> Result<()> {
        let d = *dim.get_or_insert(v.len());
        if v.len() != d {
            return Err(Error::dim("integrand changed its output length"));
        }
        if kron.is_empty() {
            kron.resize(d, 0.0);
            gauss.resize(d, 0.0);
        }
        for ((k, g), x) in kron.iter_mut().zip(gauss.iter_mut()).zip(&v) {
            if !x.is_finite() {
                return Err(Error::NotConverged("quadrature: non-finite integrand".into()));
            }
            *k += wk * x;
            *g += wg * x;
        }
        Ok(())
    };
    add(f(center)?, WGK[7], WG[3], &mut kron, &mut gauss)?;
    for i in 0..7 {
        let dx = half * XGK[i];
        let wg = if i % 2 == 1 { WG[i / 2] } else { 0.0 };
        add(f(center - dx)?, WGK[i], wg, &mut kron, &mut gauss)?;
        add(f(center + dx)?, WGK[i], wg, &mut kron, &mut gauss)?;
    }
    let value: Vec<f64> = kron.iter().map(|k| k * half).collect();
    let error = kron
        .iter()
        .zip(&gauss)
        .map(|(k, g)| ((k - g) * half).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(Panel { a, b, value, error })
}

/// Integrates `f` over `[a, b]` (finite) to the requested tolerance.
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::invalid(format!("quadrature interval [{a}, {b}]")));
    }
    let mut dim = None;
    let mut heap = BinaryHeap::new();
    let first = gk15(&mut f, a, b, &mut dim)?;
    let mut total = first.value.clone();
    let mut err_total = first.error;
    heap.push(first);
    let mut evaluations = 15;

    loop {
        let norm = total.iter().map(|v| v * v).sum::<f64>().sqrt();
        if err_total <= opts.abs_tol.max(opts.rel_tol * norm) {
            break;
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::NotConverged(format!(
                "adaptive quadrature ({} panels, error estimate {err_total:e} for value norm {norm:e})",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::NotConverged("adaptive quadrature: panel too small".into()));
        }
        let left = gk15(&mut f, worst.a, mid, &mut dim)?;
        let right = gk15(&mut f, mid, worst.b, &mut dim)?;
        evaluations += 30;
        for (i, t) in total.iter_mut().enumerate() {
            *t += left.value[i] + right.value[i] - worst.value[i];
        }
        heap.push(left);
        heap.push(right);
        // recompute from panels to avoid drift in the running error sum
        err_total = heap.iter().map(|p| p.error).sum();
    }
    // final value summed from panels in interval order
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = vec![0.0; total.len()];
    for p in &panels {
        for (v, x) in value.iter_mut().zip(&p.value) {
            *v += x;
        }
    }
    Ok(QuadResult {
        value,
        error: err_total,
        evaluations,
        intervals: panels.len(),
    })
}

/// Scalar convenience wrapper.
pub fn integrate_scalar<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let r = integrate(|x| Ok(vec![f(x)]), a, b, opts)?;
    Ok((r.value[0], r.error))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let (v, _) = integrate_scalar(|x| x.powi(5) - 2.0 * x, -1.0, 2.0, &QuadOptions::default()).unwrap();
        assert!((v - (64.0 / 6.0 - 1.0 / 6.0 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn peaked_integrand_converges() {
        // ∫ 1/(1+x²) over [-1e3, 1e3]
        let (v, _) = integrate_scalar(|x| 1.0 / (1.0 + x * x), -1e3, 1e3, &QuadOptions::default()).unwrap();
        assert!((v - 2.0 * 1e3_f64.atan()).abs() < 1e-8);
    }

    #[test]
    fn vector_integrand() {
        let r = integrate(|x| Ok(vec![x, x * x]), 0.0, 1.0, &QuadOptions::default()).unwrap();
        assert!((r.value[0] - 0.5).abs() < 1e-14);
        assert!((r.value[1] - 1.0 / 3.0).abs() < 1e-14);
    }
}
