//! PD tuning for a damped string clamped at `x = 0` and forced at `x = 1`.
//!
//! The plant `Φ(ω) = Ξ(1) / g` follows from the phasor solution
//! `Ξ(x) = c₁ (e^{φx} − e^{−φx})` of `Ξ'' = (icω − ω²) Ξ` with the force
//! boundary condition `Ξ'(1) = g`, giving `Φ = tanh(φ) / φ` with
//! `φ = √(icω − ω²)`. `Φ` is even in `φ`, so the branch of the root is
//! immaterial; the principal one is used.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::oracle::{h2_norm_squared, DenseRealization, RealizableFamily};
use crate::systems::{disturbance_feedback_value, AffineStateSpaceFamily, ParameterBox, ParametrizedSystem};
use crate::{TransferMatrix, C64};

pub const WAVE_DAMPING: f64 = 0.25;
pub const FILTER_TIME: f64 = 1e-2;

/// Below this `|φ|` the Taylor series of `tanh(φ)/φ` is used.
const SERIES_RADIUS: f64 = 1e-4;

/// `tanh(φ)/φ` with `φ = √(i·damping·ω − ω²)`.
pub fn phi_eval_with(omega: f64, damping: f64) -> C64 {
    let phi = C64::new(-omega * omega, damping * omega).sqrt();
    tanh_over(phi)
}

/// [`phi_eval_with`] at the benchmark damping `0.25`.
pub fn phi_eval(omega: f64) -> C64 {
    phi_eval_with(omega, WAVE_DAMPING)
}

pub(crate) fn tanh_over(phi: C64) -> C64 {
    if phi.norm() < SERIES_RADIUS {
        let p2 = phi * phi;
        return C64::new(1.0, 0.0) - p2 / 3.0 + p2 * p2 * (2.0 / 15.0);
    }
    phi.tanh() / phi
}

/// `K(μ; iω) = μ₁ + μ₂ T_F iω / (T_F iω + 1)` and its two partials.
pub fn pd_controller(mu: &[f64], omega: f64, filter_time: f64) -> (C64, [C64; 2]) {
    let s = C64::new(0.0, omega * filter_time);
    let d = s / (s + 1.0);
    (mu[0] + mu[1] * d, [C64::new(1.0, 0.0), d])
}

/// Closed loop `d ↦ (y, u)` around the analytic plant; `μ ≤ 0`.
#[derive(Debug, Clone)]
pub struct WaveEquationProblem {
    pub damping: f64,
    pub filter_time: f64,
    domain: ParameterBox,
}

impl Default for WaveEquationProblem {
    fn default() -> Self {
        Self::new(WAVE_DAMPING, FILTER_TIME)
    }
}

impl WaveEquationProblem {
    pub fn new(damping: f64, filter_time: f64) -> Self {
        Self {
            damping,
            filter_time,
            domain: ParameterBox::nonpositive(2),
        }
    }
}

impl ParametrizedSystem for WaveEquationProblem {
    fn n_params(&self) -> usize {
        2
    }

    fn dims(&self) -> (usize, usize) {
        (2, 1)
    }

    fn domain(&self) -> &ParameterBox {
        &self.domain
    }

    fn evaluate_unchecked(&self, mu: &[f64], omega: f64) -> Result<(TransferMatrix, Vec<TransferMatrix>)> {
        let phi = phi_eval_with(omega, self.damping);
        let (k, dk) = pd_controller(mu, omega, self.filter_time);
        let g = disturbance_feedback_value(
            &TransferMatrix::from_element(1, 1, phi),
            &TransferMatrix::from_element(1, 1, k),
            omega,
        )?;
        // ∂/∂K of [Φ/D; KΦ/D] with D = 1 − ΦK is [Φ²/D²; Φ/D²]
        let d = C64::new(1.0, 0.0) - phi * k;
        let d2 = d * d;
        let grads = dk
            .iter()
            .map(|&dkj| TransferMatrix::from_column_slice(2, 1, &[phi * phi / d2 * dkj, phi / d2 * dkj]))
            .collect();
        Ok((g, grads))
    }
}

/// Finite-difference model with `n` states (`n/2` displacements, then `n/2`
/// velocities) on a uniform grid `h = 2/n`, with the last node carrying half
/// a cell of mass. Input: force at `x = 1`; output: displacement at `x = 1`.
/// The static gain is exactly 1.
pub fn wave_fd_discretize_with(n: usize, damping: f64) -> Result<DenseRealization> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::invalid(format!("grid size {n} must be even and at least 4")));
    }
    let nodes = n / 2;
    let h = 1.0 / nodes as f64;
    let inv_h2 = 1.0 / (h * h);
    let mut a = DMatrix::zeros(n, n);
    for j in 0..nodes {
        a[(j, nodes + j)] = 1.0;
        a[(nodes + j, nodes + j)] = -damping;
        if j + 1 < nodes {
            a[(nodes + j, j)] = -2.0 * inv_h2;
            if j > 0 {
                a[(nodes + j, j - 1)] = inv_h2;
            }
            a[(nodes + j, j + 1)] = inv_h2;
        } else {
            a[(nodes + j, j)] = -2.0 * inv_h2;
            if j > 0 {
                a[(nodes + j, j - 1)] = 2.0 * inv_h2;
            }
        }
    }
    let mut b = DMatrix::zeros(n, 1);
    b[(n - 1, 0)] = 2.0 / h;
    let mut c = DMatrix::zeros(1, n);
    c[(0, nodes - 1)] = 1.0;
    DenseRealization::new(a, b, c)
}

/// [`wave_fd_discretize_with`] at the benchmark damping.
pub fn wave_fd_discretize(n: usize) -> Result<DenseRealization> {
    wave_fd_discretize_with(n, WAVE_DAMPING)
}

/// Closed loop of the FD plant with the PD controller realized by one filter
/// state `q̇ = (y − q)/T_F`, `u = (μ₁ + μ₂) y − μ₂ q`. States `[x; q]`,
/// input `d`, outputs `(y, u)`; affine in `μ`, `μ ≤ 0`.
pub fn wave_fd_closed_loop(plant: &DenseRealization, filter_time: f64) -> Result<AffineStateSpaceFamily> {
    let n = plant.order();
    if plant.b().ncols() != 1 || plant.c().nrows() != 1 {
        return Err(Error::dim("PD loop needs a SISO plant"));
    }
    let (a, b, c) = (plant.a(), plant.b(), plant.c());
    let bc = b * c;
    let mut a0 = DMatrix::zeros(n + 1, n + 1);
    a0.view_mut((0, 0), (n, n)).copy_from(a);
    a0.view_mut((n, 0), (1, n)).copy_from(&(c / filter_time));
    a0[(n, n)] = -1.0 / filter_time;
    let mut b0 = DMatrix::zeros(n + 1, 1);
    b0.view_mut((0, 0), (n, 1)).copy_from(b);
    let mut c0 = DMatrix::zeros(2, n + 1);
    c0.view_mut((0, 0), (1, n)).copy_from(c);

    let mut a1 = DMatrix::zeros(n + 1, n + 1);
    a1.view_mut((0, 0), (n, n)).copy_from(&bc);
    let mut a2 = a1.clone();
    a2.view_mut((0, n), (n, 1)).copy_from(&(-b));
    let mut c1 = DMatrix::zeros(2, n + 1);
    c1.view_mut((1, 0), (1, n)).copy_from(c);
    let mut c2 = c1.clone();
    c2[(1, n)] = -1.0;
    let zb = DMatrix::zeros(n + 1, 1);
    AffineStateSpaceFamily::new(a0, b0, c0)?
        .term(a1, zb.clone(), c1)?
        .term(a2, zb, c2)?
        .with_domain(ParameterBox::nonpositive(2))
}

/// `‖G̃(μ)‖ / ‖G̃(μ_ref)‖` on a realizable family; infinite when `G̃(μ)` is unstable.
pub fn normalized_norm(family: &dyn RealizableFamily, mu: &[f64], reference: &[f64]) -> Result<f64> {
    let num = h2_norm_squared(&family.realization(mu)?)?;
    let den = h2_norm_squared(&family.realization(reference)?)?;
    if !den.is_finite() || den.value() == 0.0 {
        return Err(Error::invalid("reference norm is zero or infinite"));
    }
    Ok((num.value() / den.value()).sqrt())
}

/// Time response of a closed-loop family.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub time: Vec<f64>,
    /// `outputs[k][i]`: output `i` at `time[k]`.
    pub outputs: Vec<Vec<f64>>,
}

/// `sin(2πt) + sin(0.2πt)`.
pub fn benchmark_disturbance(t: f64) -> f64 {
    (2.0 * std::f64::consts::PI * t).sin() + (0.2 * std::f64::consts::PI * t).sin()
}

/// Trapezoidal (Crank–Nicolson) integration of `ẋ = A x + B d(t)` from
/// `x(0) = 0` over `[0, t_end]` with fixed step `dt`, single input.
pub fn simulate(
    family: &AffineStateSpaceFamily,
    mu: &[f64],
    input: impl Fn(f64) -> f64,
    t_end: f64,
    dt: f64,
) -> Result<Simulation> {
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::invalid("simulation needs dt > 0 and t_end ≥ 0"));
    }
    family.domain().check(mu)?;
    let (a, b, c) = family.matrices(mu);
    if b.ncols() != 1 {
        return Err(Error::dim("simulation supports a single input"));
    }
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let lhs = (&eye - &a * (dt / 2.0)).lu();
    let rhs = &eye + &a * (dt / 2.0);
    let bv = b.column(0).into_owned();
    let steps = (t_end / dt).round() as usize;
    let mut x = DVector::<f64>::zeros(n);
    let mut time = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut d_prev = input(0.0);
    time.push(0.0);
    outputs.push((&c * &x).iter().copied().collect());
    for k in 1..=steps {
        let t = k as f64 * dt;
        let d = input(t);
        let r = &rhs * &x + &bv * (0.5 * dt * (d + d_prev));
        x = lhs.solve(&r).ok_or(Error::invalid("singular trapezoidal step matrix"))?;
        d_prev = d;
        time.push(t);
        outputs.push((&c * &x).iter().copied().collect());
    }
    Ok(Simulation { time, outputs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FrequencySystem;

    #[test]
    fn phi_limits() {
        assert_eq!(phi_eval(0.0), C64::new(1.0, 0.0));
        assert!(phi_eval(1e4).norm() < 1e-3);
        assert_eq!(tanh_over(C64::new(0.0, 0.0)), C64::new(1.0, 0.0));
    }

    #[test]
    fn fd_static_gain_is_one() {
        let r = wave_fd_discretize(40).unwrap();
        let g = r.evaluate(0.0).unwrap();
        assert!((g[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(wave_fd_discretize(3).is_err());
        assert!(wave_fd_discretize(2).is_err());
    }

    #[test]
    fn closed_loop_at_zero_is_open_loop() {
        let p = WaveEquationProblem::default();
        let (g, _) = p.evaluate_with_gradient(&[0.0, 0.0], 1.3).unwrap();
        assert_eq!(g[(0, 0)], phi_eval(1.3));
        assert_eq!(g[(1, 0)], C64::new(0.0, 0.0));
    }
}
