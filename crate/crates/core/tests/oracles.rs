//! Checks against nalgebra as an independent dense linear algebra oracle.

use nalgebra::DMatrix;
use ptbd_core::linalg::{polar_factor, sin_theta_frob, spectral_norm_estimate, thin_svd, trace_norm, Unfolding};
use ptbd_core::random::NormalRng;
use ptbd_core::{Complex64, Matrix, Scalar, Tensor};

fn to_na<S: Scalar>(m: &Matrix<S>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| {
        let x = m.col(j)[i];
        Complex64::new(x.re(), x.im())
    })
}

fn oracle_singular_values<S: Scalar>(m: &Matrix<S>) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(m).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[test]
fn singular_values_match_gram_eigenvalues() {
    let mut rng = NormalRng::seed_from(11);
    let a: Matrix<f64> = rng.matrix(5, 3);
    let svd = thin_svd(&a).unwrap();
    let gram = to_na(&a).adjoint() * to_na(&a);
    let herm = DMatrix::from_fn(3, 3, |i, j| gram[(i, j)].re);
    let mut eig: Vec<f64> = herm.symmetric_eigenvalues().iter().map(|e| e.max(0.0).sqrt()).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    for (s, e) in svd.singular_values.iter().zip(&eig) {
        assert!((s - e).abs() <= 1e-10 * eig[0]);
    }
    assert!(svd.reconstruct().sub(&a).frobenius_norm() <= 1e-12 * a.frobenius_norm());
}

#[test]
fn singular_values_match_oracle_on_many_shapes() {
    let mut rng = NormalRng::seed_from(12);
    for trial in 0..60 {
        let rows = 1 + trial % 9;
        let cols = 1 + (trial * 7) % 8;
        let (ours, theirs) = if trial % 2 == 0 {
            let a: Matrix<f64> = rng.matrix(rows, cols);
            (thin_svd(&a).unwrap().singular_values, oracle_singular_values(&a))
        } else {
            let a: Matrix<Complex64> = rng.matrix(rows, cols);
            (thin_svd(&a).unwrap().singular_values, oracle_singular_values(&a))
        };
        assert_eq!(ours.len(), theirs.len());
        for (s, t) in ours.iter().zip(&theirs) {
            assert!((s - t).abs() <= 1e-12 * theirs[0].max(1.0), "{rows}x{cols}: {s} vs {t}");
        }
    }
}

#[test]
fn jacobi_converges_on_tall_ill_conditioned_inputs() {
    let mut rng = NormalRng::seed_from(13);
    for _ in 0..40 {
        let u: Matrix<f64> = rng.orthonormal(16, 8).unwrap();
        let v: Matrix<f64> = rng.orthonormal(8, 8).unwrap();
        let sigma: Vec<f64> = (0..8).map(|i| 10f64.powi(-2 * i)).collect();
        let a = u.matmul(&Matrix::diag(&sigma)).matmul(&v.adjoint());
        let svd = thin_svd(&a).unwrap();
        assert!(svd.reconstruct().sub(&a).frobenius_norm() <= 1e-12 * a.frobenius_norm());
        assert!((svd.singular_values[0] - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn polar_factor_attains_the_trace_norm() {
    let mut rng = NormalRng::seed_from(14);
    let a: Matrix<f64> = rng.matrix(6, 2);
    let pol = polar_factor(&a).unwrap();
    let na = a.frobenius_norm();
    assert!(a.sub(&pol.q.matmul(&pol.h)).frobenius_norm() <= 1e-12 * na);
    let tn: f64 = oracle_singular_values(&a).iter().sum();
    assert!((pol.q.inner_re(&a) - tn).abs() <= 1e-10 * tn);
    for _ in 0..200 {
        let x: Matrix<f64> = rng.orthonormal(6, 2).unwrap();
        assert!(x.inner_re(&a) <= pol.q.inner_re(&a) + 1e-10 * na);
    }
}

#[test]
fn trace_norm_dominates_competitors() {
    let mut rng = NormalRng::seed_from(15);
    let a: Matrix<Complex64> = rng.matrix(7, 3);
    let tn = trace_norm(&a).unwrap();
    for _ in 0..100 {
        let p: Matrix<Complex64> = rng.orthonormal(7, 3).unwrap();
        assert!(tn >= p.inner_re(&a).abs());
    }
}

#[test]
fn spectral_estimate_is_bracketed() {
    let mut rng = NormalRng::seed_from(16);
    for _ in 0..20 {
        let t: Tensor<f64> = rng.tensor(&[6, 5, 4]);
        for mode in 0..3 {
            let u = t.unfold(mode).unwrap();
            let exact = oracle_singular_values(&u)[0];
            let est = spectral_norm_estimate(&Unfolding::new(&t, mode).unwrap());
            assert!(est >= exact * (1.0 - 1e-3), "{est} vs {exact}");
            assert!(est <= (u.norm_one() * u.norm_inf()).sqrt() * (1.0 + 1e-12));
        }
    }
}

#[test]
fn mode_multiply_is_submultiplicative() {
    let mut rng = NormalRng::seed_from(17);
    for _ in 0..20 {
        let t: Tensor<Complex64> = rng.tensor(&[4, 3, 5]);
        let mode = 2;
        let x: Matrix<Complex64> = rng.matrix(3, 5);
        let lhs = t.mode_multiply(&x, mode).unwrap().frobenius_norm();
        let bound = oracle_singular_values(&x)[0] * t.frobenius_norm();
        assert!(lhs <= bound * (1.0 + 1e-12));
    }
}

#[test]
fn sin_theta_matches_canonical_angles() {
    let mut rng = NormalRng::seed_from(18);
    for _ in 0..20 {
        let p1: Matrix<f64> = rng.orthonormal(7, 3).unwrap();
        let p2: Matrix<f64> = rng.orthonormal(7, 3).unwrap();
        let cosines = oracle_singular_values(&p1.adjoint_mul(&p2));
        let expect: f64 = cosines.iter().map(|c| 1.0 - c.min(1.0).powi(2)).sum::<f64>().sqrt();
        assert!((sin_theta_frob(&p1, &p2).unwrap() - expect).abs() <= 1e-12);
    }
}
