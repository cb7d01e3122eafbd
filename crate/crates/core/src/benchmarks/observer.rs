//! Fixed-order observer design for a sparse plant.
//!
//! Plant `E ẋ = A x + B (u + w)`, `z = C_z x`, `y = C_y x`, measured
//! `ỹ = y + v`. Observer `q̇ = A_q q + B_q [u; ỹ]`, `ẑ = C_q q`, with
//! `μ = vec[A_q  B_q  C_qᵀ]` (column-major). The error map
//! `(w, u, v) ↦ z − ẑ` is evaluated per frequency from one sparse plant solve
//! and order-`r` observer algebra.

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{solve_lyapunov, to_complex, CsMatrix};
use crate::oracle::{h2_norm_quadrature, spectral_abscissa, DenseRealization, H2Value, DEFAULT_MAX_ORDER};
use crate::systems::{
    observer_error_value, AffineStateSpaceFamily, DescriptorStateSpace, FrozenSystem, ParameterBox,
    ParametrizedSystem,
};
use crate::{TransferMatrix, C64};

/// 1-D diffusion `ẋ = κ x''` on `(0, 1)` with zero Dirichlet ends, `n`
/// interior nodes, a point source and two point sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionPlantSpec {
    pub n: usize,
    pub diffusivity: f64,
    pub input_at: f64,
    pub measured_at: f64,
    pub observed_at: f64,
}

impl Default for DiffusionPlantSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            diffusivity: 0.01,
            input_at: 0.1,
            measured_at: 0.6,
            observed_at: 0.7,
        }
    }
}

/// Plant matrices of an observer problem, before normalization.
#[derive(Debug, Clone)]
pub struct ObserverPlant {
    /// `E`, `A`, `B`; its `C` is `C_y`.
    pub system: DescriptorStateSpace,
    pub c_y: DMatrix<f64>,
    pub c_z: DMatrix<f64>,
}

pub fn diffusion_plant(spec: &DiffusionPlantSpec) -> Result<ObserverPlant> {
    let n = spec.n;
    if n < 3 {
        return Err(Error::invalid(format!("diffusion plant needs at least 3 nodes, got {n}")));
    }
    if !(spec.diffusivity > 0.0) {
        return Err(Error::invalid("diffusivity must be positive"));
    }
    let h = 1.0 / (n + 1) as f64;
    let node = |x: f64| -> Result<usize> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::invalid(format!("point {x} is outside (0, 1)")));
        }
        Ok(((x / h).round() as usize).clamp(1, n) - 1)
    };
    let k = spec.diffusivity / (h * h);
    let mut trip = Vec::with_capacity(3 * n);
    for i in 0..n {
        trip.push((i, i, -2.0 * k));
        if i > 0 {
            trip.push((i, i - 1, k));
        }
        if i + 1 < n {
            trip.push((i, i + 1, k));
        }
    }
    let a = CsMatrix::from_triplets(n, n, trip)?;
    let mut b = DMatrix::zeros(n, 1);
    b[(node(spec.input_at)?, 0)] = 1.0 / h;
    let mut c_y = DMatrix::zeros(1, n);
    c_y[(0, node(spec.measured_at)?)] = 1.0;
    let mut c_z = DMatrix::zeros(1, n);
    c_z[(0, node(spec.observed_at)?)] = 1.0;
    Ok(ObserverPlant {
        system: DescriptorStateSpace::sparse(CsMatrix::identity(n), a, b, c_y.clone())?,
        c_y,
        c_z,
    })
}

/// Where the plant comes from.
#[derive(Debug, Clone)]
pub enum PlantSource {
    Synthetic(DiffusionPlantSpec),
    /// Matrix Market files for `E`, `A`, `B`, `C_y`, `C_z`.
    MatrixMarket {
        e: PathBuf,
        a: PathBuf,
        b: PathBuf,
        c_y: PathBuf,
        c_z: PathBuf,
    },
    Given(ObserverPlant),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverOptions {
    /// Skip the plant stability check when it cannot be done cheaply
    /// (nonsymmetric pencils above the dense limit).
    pub assume_stable: bool,
    /// Relative tolerance of the quadrature used for costs and normalization.
    pub quadrature_rel_tol: f64,
}

impl Default for ObserverOptions {
    fn default() -> Self {
        Self {
            assume_stable: false,
            quadrature_rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObserverProblem {
    plant: DescriptorStateSpace,
    c_y: DMatrix<f64>,
    c_z: DMatrix<f64>,
    r: usize,
    n_u: usize,
    domain: ParameterBox,
    z_scale: f64,
    rel_tol: f64,
}

/// Loads or synthesizes the plant, checks stability and scales `C_z` so the
/// error without an observer has unit H2 norm.
pub fn build_observer_problem(source: PlantSource, r: usize, opts: &ObserverOptions) -> Result<ObserverProblem> {
    let plant = match source {
        PlantSource::Synthetic(spec) => diffusion_plant(&spec)?,
        PlantSource::MatrixMarket { e, a, b, c_y, c_z } => {
            let read = crate::matrix_market::read_file;
            let c_y = read(c_y)?.to_dense();
            let c_z = read(c_z)?.to_dense();
            ObserverPlant {
                system: DescriptorStateSpace::sparse(read(e)?, read(a)?, read(b)?.to_dense(), c_y.clone())?,
                c_y,
                c_z,
            }
        }
        PlantSource::Given(p) => p,
    };
    ObserverProblem::new(plant, r, opts)
}

impl ObserverProblem {
    pub fn new(plant: ObserverPlant, r: usize, opts: &ObserverOptions) -> Result<Self> {
        if r == 0 {
            return Err(Error::invalid("observer order r must be at least 1"));
        }
        let sys = plant.system;
        let n = sys.order();
        let n_u = sys.b().ncols();
        if plant.c_y.ncols() != n || plant.c_z.ncols() != n {
            return Err(Error::dim(format!(
                "C_y is {:?} and C_z is {:?}, plant order {n}",
                plant.c_y.shape(),
                plant.c_z.shape()
            )));
        }
        if n_u == 0 || plant.c_y.nrows() == 0 || plant.c_z.nrows() == 0 {
            return Err(Error::dim("observer problem needs at least one u, y and z channel"));
        }
        check_plant_stability(&sys, opts.assume_stable)?;
        let mut problem = Self {
            plant: sys,
            c_y: plant.c_y,
            c_z: plant.c_z,
            r,
            n_u,
            domain: ParameterBox::unbounded(0),
            z_scale: 1.0,
            rel_tol: opts.quadrature_rel_tol,
        };
        problem.domain = ParameterBox::unbounded(problem.n_params());
        let open = problem.no_observer_norm_squared()?;
        if !(open > 0.0) {
            return Err(Error::invalid("z is not excited: ‖G(0)‖ = 0"));
        }
        problem.z_scale = 1.0 / open.sqrt();
        problem.c_z *= problem.z_scale;
        Ok(problem)
    }

    pub fn order(&self) -> usize {
        self.r
    }

    pub fn plant_order(&self) -> usize {
        self.plant.order()
    }

    pub fn plant(&self) -> &DescriptorStateSpace {
        &self.plant
    }

    pub fn c_y(&self) -> &DMatrix<f64> {
        &self.c_y
    }

    /// Normalized `C_z`.
    pub fn c_z(&self) -> &DMatrix<f64> {
        &self.c_z
    }

    /// Factor applied to the supplied `C_z`.
    pub fn z_scale(&self) -> f64 {
        self.z_scale
    }

    fn n_y(&self) -> usize {
        self.c_y.nrows()
    }

    fn n_z(&self) -> usize {
        self.c_z.nrows()
    }

    /// `‖[P_z  P_z  0]‖² = 2 ‖P_z‖²` by quadrature.
    pub fn no_observer_norm_squared(&self) -> Result<f64> {
        let pz = self.plant.with_output(self.c_z.clone())?;
        Ok(2.0 * h2_norm_quadrature(&pz, f64::INFINITY, self.rel_tol)?.norm_squared)
    }

    /// Splits `μ` into `(A_q, B_q, C_q)`.
    pub fn unpack(&self, mu: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let (r, m, nz) = (self.r, self.n_u + self.n_y(), self.n_z());
        if mu.len() != self.n_params() {
            return Err(Error::dim(format!("μ has length {}, expected {}", mu.len(), self.n_params())));
        }
        let w = DMatrix::from_column_slice(r, r + m + nz, mu);
        Ok((
            w.columns(0, r).into_owned(),
            w.columns(r, m).into_owned(),
            w.columns(r + m, nz).transpose(),
        ))
    }

    pub fn pack(&self, a_q: &DMatrix<f64>, b_q: &DMatrix<f64>, c_q: &DMatrix<f64>) -> Result<Vec<f64>> {
        let (r, m, nz) = (self.r, self.n_u + self.n_y(), self.n_z());
        if a_q.shape() != (r, r) || b_q.shape() != (r, m) || c_q.shape() != (nz, r) {
            return Err(Error::dim("observer matrices do not match the problem dimensions"));
        }
        let mut w = DMatrix::zeros(r, r + m + nz);
        w.columns_mut(0, r).copy_from(a_q);
        w.columns_mut(r, m).copy_from(b_q);
        w.columns_mut(r + m, nz).copy_from(&c_q.transpose());
        Ok(w.as_slice().to_vec())
    }

    /// Spectral abscissa of `A_q`; the error system is stable iff it is negative
    /// (the closed loop is block triangular with the stable plant).
    pub fn observer_abscissa(&self, mu: &[f64]) -> Result<f64> {
        spectral_abscissa(&self.unpack(mu)?.0)
    }

    /// `c(μ) = ½‖G(μ)‖²` by quadrature, infinite for an unstable observer.
    pub fn cost(&self, mu: &[f64]) -> Result<H2Value> {
        self.cost_with_tol(mu, self.rel_tol)
    }

    pub fn cost_with_tol(&self, mu: &[f64], rel_tol: f64) -> Result<H2Value> {
        let (a_q, _, _) = self.unpack(mu)?;
        let scale = a_q.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if spectral_abscissa(&a_q)? >= -crate::oracle::STABILITY_RTOL * scale {
            return Ok(H2Value::Infinite);
        }
        let frozen = FrozenSystem::new(self, mu)?;
        let q = h2_norm_quadrature(&frozen, f64::INFINITY, rel_tol)?;
        Ok(H2Value::Finite(0.5 * q.norm_squared))
    }

    /// Dense affine realization of the error map with states `[x; q]`, for
    /// oracle checks at small plant order.
    pub fn dense_family(&self) -> Result<AffineStateSpaceFamily> {
        let n = self.plant.order();
        if n + self.r > DEFAULT_MAX_ORDER {
            return Err(Error::SizeLimit {
                n: n + self.r,
                cap: DEFAULT_MAX_ORDER,
            });
        }
        let dense = DenseRealization::from_descriptor(&self.plant, DEFAULT_MAX_ORDER)?;
        let (r, nu, ny, nz) = (self.r, self.n_u, self.n_y(), self.n_z());
        let nx = n + r;
        let n_in = 2 * nu + ny;
        let mut a0 = DMatrix::zeros(nx, nx);
        a0.view_mut((0, 0), (n, n)).copy_from(dense.a());
        let mut b0 = DMatrix::zeros(nx, n_in);
        b0.view_mut((0, 0), (n, nu)).copy_from(dense.b());
        b0.view_mut((0, nu), (n, nu)).copy_from(dense.b());
        let mut c0 = DMatrix::zeros(nz, nx);
        c0.view_mut((0, 0), (nz, n)).copy_from(&self.c_z);
        let mut fam = AffineStateSpaceFamily::new(a0, b0, c0)?;
        let zero = || {
            (
                DMatrix::<f64>::zeros(nx, nx),
                DMatrix::<f64>::zeros(nx, n_in),
                DMatrix::<f64>::zeros(nz, nx),
            )
        };
        for col in 0..r + nu + ny + nz {
            for row in 0..r {
                let (mut a, mut b, mut c) = zero();
                if col < r {
                    a[(n + row, n + col)] = 1.0;
                } else if col < r + nu {
                    b[(n + row, nu + (col - r))] = 1.0;
                } else if col < r + nu + ny {
                    let j = col - r - nu;
                    a.view_mut((n + row, 0), (1, n)).copy_from(&self.c_y.row(j));
                    b[(n + row, 2 * nu + j)] = 1.0;
                } else {
                    c[(col - r - nu - ny, n + row)] = -1.0;
                }
                fam = fam.term(a, b, c)?;
            }
        }
        Ok(fam)
    }
}

impl ParametrizedSystem for ObserverProblem {
    fn n_params(&self) -> usize {
        self.r * (self.r + self.n_u + self.n_y() + self.n_z())
    }

    fn dims(&self) -> (usize, usize) {
        (self.n_z(), 2 * self.n_u + self.n_y())
    }

    fn domain(&self) -> &ParameterBox {
        &self.domain
    }

    fn evaluate_unchecked(&self, mu: &[f64], omega: f64) -> Result<(TransferMatrix, Vec<TransferMatrix>)> {
        let (r, nu, ny, nz) = (self.r, self.n_u, self.n_y(), self.n_z());
        let (a_q, b_q, c_q) = self.unpack(mu)?;
        let x = self.plant.shifted_solve(omega)?;
        let py = to_complex(&self.c_y) * &x;
        let pz = to_complex(&self.c_z) * &x;

        let shifted = DMatrix::<C64>::identity(r, r) * C64::new(0.0, omega) - to_complex(&a_q);
        let scale = shifted.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let lu = shifted.lu();
        let min_pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |m, z| m.min(z.norm()));
        if !(min_pivot > 1e-13 * scale) {
            return Err(Error::SingularShift { omega });
        }
        let t = lu
            .try_inverse()
            .ok_or(Error::SingularShift { omega })?;
        let bq = to_complex(&b_q);
        let cq = to_complex(&c_q);
        let f = &cq * &t; // nz × r
        let ku = &f * bq.columns(0, nu);
        let ky = &f * bq.columns(nu, ny);
        let g = observer_error_value(&pz, &py, &ku, &ky);

        // observer input map U: [u; ỹ] = U (w, u, v)
        let n_in = 2 * nu + ny;
        let mut u = TransferMatrix::zeros(nu + ny, n_in);
        for i in 0..nu {
            u[(i, nu + i)] = C64::new(1.0, 0.0);
        }
        u.view_mut((nu, 0), (ny, nu)).copy_from(&py);
        u.view_mut((nu, nu), (ny, nu)).copy_from(&py);
        for j in 0..ny {
            u[(nu + j, 2 * nu + j)] = C64::new(1.0, 0.0);
        }
        let rmat = &t * &bq * &u; // r × n_in

        let mut grads = Vec::with_capacity(self.n_params());
        for col in 0..r + nu + ny + nz {
            for row in 0..r {
                let dg = if col < r {
                    // ∂T/∂A_q(row, col) = T e_row e_colᵀ T
                    -(f.column(row) * rmat.row(col))
                } else if col < r + nu + ny {
                    -(f.column(row) * u.row(col - r))
                } else {
                    let mut m = TransferMatrix::zeros(nz, n_in);
                    m.row_mut(col - r - nu - ny).copy_from(&(-rmat.row(row)));
                    m
                };
                grads.push(dg);
            }
        }
        Ok((g, grads))
    }
}

fn check_plant_stability(sys: &DescriptorStateSpace, assume_stable: bool) -> Result<()> {
    match sys.symmetric_stability() {
        Some(true) => return Ok(()),
        Some(false) => return Err(Error::Unstable { abscissa: f64::NAN }),
        None => {}
    }
    if sys.order() <= DEFAULT_MAX_ORDER {
        let dense = DenseRealization::from_descriptor(sys, DEFAULT_MAX_ORDER)?;
        let abscissa = spectral_abscissa(dense.a())?;
        if abscissa >= 0.0 {
            return Err(Error::Unstable { abscissa });
        }
        return Ok(());
    }
    if assume_stable {
        Ok(())
    } else {
        Err(Error::invalid(
            "plant stability cannot be checked at this size; set assume_stable to proceed",
        ))
    }
}

/// How `μ_0` is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Initialization {
    /// Kalman filter designed on an order-`r` modal surrogate of the plant.
    ReducedKalman,
    Explicit(Vec<f64>),
}

/// Order-`r` Galerkin surrogate `(A_r, B_r, C_yr, C_zr)` on the slowest
/// invariant subspace, found by block inverse iteration on `A⁻¹E`.
pub fn modal_surrogate(
    problem: &ObserverProblem,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let sys = problem.plant();
    let n = sys.order();
    let r = problem.order();
    if r > n {
        return Err(Error::invalid(format!("observer order {r} exceeds plant order {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut v = orthonormalize(&DMatrix::from_fn(n, r, |_, _| rng.random::<f64>() - 0.5));
    for _ in 0..1000 {
        let ev = sys.e().mul_dense(&v);
        let y = sys.shifted_solve_rhs(0.0, &to_complex(&ev))?.map(|z| z.re);
        let next = orthonormalize(&y);
        let residual = (&next - &v * (v.transpose() * &next)).norm();
        v = next;
        if residual < 1e-12 {
            break;
        }
    }
    let er = v.transpose() * sys.e().mul_dense(&v);
    let er_lu = er.lu();
    let ar = er_lu
        .solve(&(v.transpose() * sys.a().mul_dense(&v)))
        .ok_or_else(|| Error::invalid("projected E is singular"))?;
    let br = er_lu
        .solve(&(v.transpose() * sys.b()))
        .ok_or_else(|| Error::invalid("projected E is singular"))?;
    Ok((ar, br, problem.c_y() * &v, problem.c_z() * &v))
}

fn orthonormalize(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().qr().q()
}

/// Filter Riccati solution `A P + P Aᵀ − P Cᵀ C P + B Bᵀ = 0` by
/// Newton–Kleinman from `L = 0` (requires a stable `A`); returns the gain
/// `L = P Cᵀ`.
pub fn kalman_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if spectral_abscissa(a)? >= 0.0 {
        return Err(Error::invalid("Kalman design needs a stable surrogate"));
    }
    let q = b * b.transpose();
    let mut l = DMatrix::zeros(a.nrows(), c.nrows());
    let mut p_prev: Option<DMatrix<f64>> = None;
    for _ in 0..100 {
        let ak = a - &l * c;
        let p = solve_lyapunov(&ak, &(&q + &l * l.transpose()))?;
        l = &p * c.transpose();
        if let Some(prev) = &p_prev {
            if (&p - prev).norm() <= 1e-13 * p.norm().max(f64::MIN_POSITIVE) {
                return Ok(l);
            }
        }
        p_prev = Some(p);
    }
    Err(Error::NotConverged("Newton–Kleinman iteration".into()))
}

/// `μ_0` for [`ObserverProblem`]; the result is checked to give a stable
/// error system.
pub fn initialize_observer(problem: &ObserverProblem, method: &Initialization) -> Result<Vec<f64>> {
    let mu = match method {
        Initialization::Explicit(mu) => {
            problem.domain().check(mu)?;
            return Ok(mu.clone());
        }
        Initialization::ReducedKalman => {
            let (ar, br, cyr, czr) = modal_surrogate(problem)?;
            let l = kalman_gain(&ar, &br, &cyr)?;
            let a_q = &ar - &l * &cyr;
            let mut b_q = DMatrix::zeros(problem.order(), br.ncols() + l.ncols());
            b_q.columns_mut(0, br.ncols()).copy_from(&br);
            b_q.columns_mut(br.ncols(), l.ncols()).copy_from(&l);
            problem.pack(&a_q, &b_q, &czr)?
        }
    };
    if problem.observer_abscissa(&mu)? >= 0.0 {
        return Err(Error::invalid(
            "reduced-order design did not give a stable observer; supply μ0 explicitly",
        ));
    }
    Ok(mu)
}
