//! Seeded random stable systems for statistical checks.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::Result;
use crate::oracle::{spectral_abscissa, DenseRealization};
use crate::rng::stream_rng;
use crate::systems::AffineStateSpaceFamily;

fn uniform_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.random_range(-1.0..1.0))
}

/// Random square matrix shifted so its spectral abscissa equals `-margin`.
fn shifted_stable<R: Rng>(rng: &mut R, n: usize, margin: f64) -> Result<DMatrix<f64>> {
    let g = uniform_matrix(rng, n, n, (3.0 / n as f64).sqrt());
    let shift = spectral_abscissa(&g)? + margin;
    Ok(g - DMatrix::identity(n, n) * shift)
}

/// Stable realization with `n` states, time scale spread over two decades.
pub fn random_stable_realization(n: usize, outputs: usize, inputs: usize, seed: u64) -> Result<DenseRealization> {
    let mut rng = stream_rng(seed, 0);
    let margin = rng.random_range(0.1..1.0);
    let scale = 10f64.powf(rng.random_range(-1.0..1.0));
    let a = shifted_stable(&mut rng, n, margin)? * scale;
    let b = uniform_matrix(&mut rng, n, inputs, 1.0);
    let c = uniform_matrix(&mut rng, outputs, n, 1.0);
    DenseRealization::new(a, b, c)
}

/// Affine family with `n` states, two inputs and two outputs, and `n_mu`
/// parameters entering `A`, `B` and `C`. The nominal `A₀` has abscissa
/// `-0.5` and the parameter terms are small, so the family is stable on the
/// unit box.
pub fn random_affine_family(n: usize, n_mu: usize, seed: u64) -> Result<AffineStateSpaceFamily> {
    let mut rng = stream_rng(seed, 1);
    let a0 = shifted_stable(&mut rng, n, 0.5)?;
    let b0 = uniform_matrix(&mut rng, n, 2, 1.0);
    let c0 = uniform_matrix(&mut rng, 2, n, 1.0);
    let mut fam = AffineStateSpaceFamily::new(a0, b0, c0)?;
    for _ in 0..n_mu {
        let a = uniform_matrix(&mut rng, n, n, 0.1 / n as f64);
        let b = uniform_matrix(&mut rng, n, 2, 0.3);
        let c = uniform_matrix(&mut rng, 2, n, 0.3);
        fam = fam.term(a, b, c)?;
    }
    Ok(fam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{is_stable, RealizableFamily};

    #[test]
    fn generated_systems_are_stable() {
        for seed in 0..20 {
            let r = random_stable_realization(1 + (seed as usize % 20), 2, 3, seed).unwrap();
            assert!(is_stable(&r).unwrap());
        }
        let fam = random_affine_family(8, 3, 4).unwrap();
        assert!(is_stable(&fam.realization(&[1.0, -1.0, 1.0]).unwrap()).unwrap());
    }
}
