//! Dense Bartels–Stewart solver on the complex Schur forms.

use nalgebra::{DMatrix, Schur};

use super::to_complex;
use crate::error::{Error, Result};
use crate::C64;

fn complex_schur(m: &DMatrix<f64>) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let n = m.nrows();
    let scale = super::max_abs(m).max(1.0);
    Schur::try_new(to_complex(m), f64::EPSILON * scale, 200 * n.max(10))
        .map(Schur::unpack)
        .ok_or_else(|| Error::NotConverged("complex Schur decomposition".into()))
}

/// Solves `A X + X B = C` for real `A` (m×m), `B` (n×n), `C` (m×n).
///
/// Fails when `A` and `−B` share an eigenvalue.
pub fn solve_sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = (a.nrows(), b.nrows());
    if !a.is_square() || !b.is_square() || c.shape() != (m, n) {
        return Err(Error::dim(format!(
            "sylvester: A {:?}, B {:?}, C {:?}",
            a.shape(),
            b.shape(),
            c.shape()
        )));
    }
    if m == 0 || n == 0 {
        return Ok(DMatrix::zeros(m, n));
    }
    let (u, t) = complex_schur(a)?;
    let (v, s) = complex_schur(b)?;
    let mut y = u.adjoint() * to_complex(c) * &v;

    let scale = (super::max_abs(a) + super::max_abs(b)).max(f64::MIN_POSITIVE);
    for j in 0..n {
        for k in 0..j {
            let skj = s[(k, j)];
            if skj != C64::new(0.0, 0.0) {
                for i in 0..m {
                    let yik = y[(i, k)];
                    y[(i, j)] -= yik * skj;
                }
            }
        }
        let shift = s[(j, j)];
        for i in (0..m).rev() {
            let mut acc = y[(i, j)];
            for l in (i + 1)..m {
                acc -= t[(i, l)] * y[(l, j)];
            }
            let d = t[(i, i)] + shift;
            if d.norm() <= 1e3 * f64::EPSILON * scale {
                return Err(Error::invalid(
                    "sylvester equation is singular: A and -B share an eigenvalue",
                ));
            }
            y[(i, j)] = acc / d;
        }
    }
    let x = u * y * v.adjoint();
    Ok(x.map(|z| z.re))
}

/// Solves `A X + X Aᵀ + Q = 0` and symmetrizes the result.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = solve_sylvester(a, &a.transpose(), &(-q))?;
    Ok((&x + x.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_lyapunov() {
        // -2x + 1 = 0
        let x = solve_lyapunov(&DMatrix::from_element(1, 1, -1.0), &DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn residual_of_random_sylvester_is_small() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(7, 7, |i, j| rng.random::<f64>() - 0.5 - if i == j { 3.0 } else { 0.0 });
        let b = DMatrix::from_fn(4, 4, |i, j| rng.random::<f64>() - 0.5 - if i == j { 2.0 } else { 0.0 });
        let c = DMatrix::from_fn(7, 4, |_, _| rng.random::<f64>());
        let x = solve_sylvester(&a, &b, &c).unwrap();
        let r = &a * &x + &x * &b - &c;
        assert!(r.norm() < 1e-12, "{}", r.norm());
    }

    #[test]
    fn oscillating_modes_are_handled() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.1, 5.0, -5.0, -0.1]);
        let q = DMatrix::identity(2, 2);
        let x = solve_lyapunov(&a, &q).unwrap();
        let r = &a * &x + &x * a.transpose() + &q;
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn shared_eigenvalue_rejected() {
        let a = DMatrix::from_element(1, 1, 1.0);
        let b = DMatrix::from_element(1, 1, -1.0);
        assert!(solve_sylvester(&a, &b, &DMatrix::from_element(1, 1, 1.0)).is_err());
    }
}
