use nalgebra::DMatrix;
use proptest::prelude::*;
use sh2opt::benchmarks::random::random_affine_family;
use sh2opt::linalg::CsMatrix;
use sh2opt::systems::{
    feedback_interconnect, observer_error_value, parameter_gradient_fd_check, AnalyticSystem, DescriptorStateSpace,
    StateMatrix, Topology,
};
use sh2opt::{matrix_market, Error, FrequencySystem, ParameterBox, TransferMatrix, C64};

fn tridiagonal(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => -2.0 - 0.01 * i as f64,
        1 => 1.0 + 0.1 * (i > j) as u8 as f64,
        _ => 0.0,
    })
}

#[test]
fn sparse_and_dense_storage_agree() {
    let n = 60;
    let a = tridiagonal(n);
    let b = DMatrix::from_fn(n, 2, |i, j| ((i + j) % 3) as f64);
    let c = DMatrix::from_fn(1, n, |_, j| (j as f64).sin());
    let e = DMatrix::identity(n, n) * 1.5;
    let dense = DescriptorStateSpace::dense(e.clone(), a.clone(), b.clone(), c.clone()).unwrap();
    let sparse = DescriptorStateSpace::sparse(CsMatrix::from_dense(&e), CsMatrix::from_dense(&a), b, c).unwrap();
    for w in [0.0, 0.01, 1.0, 100.0] {
        let x = dense.evaluate(w).unwrap();
        let y = sparse.evaluate(w).unwrap();
        assert!((&x - &y).norm() <= 1e-12 * x.norm(), "ω = {w}");
    }
}

#[test]
fn matrix_market_round_trip() {
    let a = CsMatrix::from_dense(&tridiagonal(12));
    let text = matrix_market::to_string(&a);
    let back = matrix_market::read(text.as_bytes()).unwrap();
    assert_eq!(back.to_dense(), a.to_dense());
    assert!(matrix_market::read("not a header\n".as_bytes()).is_err());
}

#[test]
fn imaginary_axis_pole_is_a_singular_shift() {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let sys = DescriptorStateSpace::dense(
        DMatrix::identity(2, 2),
        a,
        DMatrix::from_element(2, 1, 1.0),
        DMatrix::from_element(1, 2, 1.0),
    )
    .unwrap();
    assert!(matches!(sys.evaluate(1.0), Err(Error::SingularShift { .. })));
    assert!(sys.evaluate(0.5).is_ok());
}

#[test]
fn state_matrix_products_agree() {
    let a = tridiagonal(7);
    let x = DMatrix::from_fn(7, 3, |i, j| (i * 3 + j) as f64);
    let s = StateMatrix::Sparse(CsMatrix::from_dense(&a));
    let d = StateMatrix::Dense(a.clone());
    assert_eq!(s.mul_dense(&x), &a * &x);
    assert_eq!(d.mul_dense(&x), &a * &x);
    assert!(!s.is_symmetric());
}

#[test]
fn observer_interconnection_matches_closed_form() {
    let plant = AnalyticSystem::new((2, 1), |w| {
        let s = C64::new(0.0, w);
        TransferMatrix::from_column_slice(2, 1, &[C64::new(1.0, 0.0) / (s + 1.0), C64::new(2.0, 0.0) / (s + 3.0)])
    });
    let observer = AnalyticSystem::new((1, 2), |w| {
        let s = C64::new(0.0, w);
        TransferMatrix::from_row_slice(1, 2, &[C64::new(0.3, 0.0) / (s + 2.0), C64::new(0.5, 0.0) / (s + 4.0)])
    });
    let g = feedback_interconnect(std::sync::Arc::new(plant), std::sync::Arc::new(observer), Topology::ObserverError)
        .unwrap();
    assert_eq!(g.dims(), (1, 3));
    let w = 0.8;
    let s = C64::new(0.0, w);
    let pz = TransferMatrix::from_element(1, 1, C64::new(1.0, 0.0) / (s + 1.0));
    let py = TransferMatrix::from_element(1, 1, C64::new(2.0, 0.0) / (s + 3.0));
    let ku = TransferMatrix::from_element(1, 1, C64::new(0.3, 0.0) / (s + 2.0));
    let ky = TransferMatrix::from_element(1, 1, C64::new(0.5, 0.0) / (s + 4.0));
    let expected = observer_error_value(&pz, &py, &ku, &ky);
    assert!((g.evaluate(w).unwrap() - &expected).norm() < 1e-15);
    let leak = pz[(0, 0)] - ky[(0, 0)] * py[(0, 0)];
    assert!((expected[(0, 0)] - leak).norm() < 1e-15);
    assert!((expected[(0, 1)] - (leak - ku[(0, 0)])).norm() < 1e-15);
    assert!((expected[(0, 2)] + ky[(0, 0)]).norm() < 1e-15);
}

#[test]
fn affine_family_gradient_matches_finite_differences() {
    let fam = random_affine_family(6, 3, 21).unwrap();
    for w in [0.0, 0.2, 3.0, 50.0] {
        let dev = parameter_gradient_fd_check(&fam, &[0.4, -0.2, 0.1], w, 1e-6).unwrap();
        assert!(dev < 1e-7, "ω = {w}: {dev}");
    }
}

proptest! {
    #[test]
    fn projection_is_idempotent_and_inside(v in prop::collection::vec(-10.0f64..10.0, 3)) {
        let b = ParameterBox::new(vec![-1.0, -2.0, f64::NEG_INFINITY], vec![1.0, 0.0, 0.5]).unwrap();
        let (p, _) = b.project(&v);
        prop_assert!(b.contains(&p));
        let (q, moved) = b.project(&p);
        prop_assert_eq!(&p, &q);
        prop_assert!(!moved);
    }

    #[test]
    fn conjugate_symmetry(w in 0.0f64..100.0, seed in 0u64..50) {
        let fam = random_affine_family(4, 1, seed).unwrap();
        let a = sh2opt::ParametrizedSystem::evaluate(&fam, &[0.3], w).unwrap();
        let b = sh2opt::ParametrizedSystem::evaluate(&fam, &[0.3], -w).unwrap();
        prop_assert!((a.map(|z| z.conj()) - b).norm() <= 1e-12 * a.norm().max(1.0));
    }
}
