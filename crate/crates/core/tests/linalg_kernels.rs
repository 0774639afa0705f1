mod common;

use common::*;
use proptest::prelude::*;
use riemannlora::linalg::{qr_thin, skeleton_svd, svd_trunc, DenseMatrix};

#[test]
fn qr_reconstructs_random_well_conditioned() {
    let mut g = rng(11);
    for _ in 0..100 {
        let m = DenseMatrix::random_normal(9, 5, &mut g);
        let (q, r) = qr_thin(&m).unwrap();
        assert!(rel(&naive_mul(&q, &r), &m) <= 1e-12);
        assert!(q.orthonormality_defect() <= 1e-12);
        for i in 0..r.rows() {
            for j in 0..i {
                assert_eq!(r.get(i, j), 0.0);
            }
        }
    }
}

#[test]
fn truncated_svd_matches_jacobi() {
    let mut g = rng(3);
    let m = DenseMatrix::random_normal(6, 4, &mut g);
    let svd = svd_trunc(&m, 3).unwrap();
    let oracle = singular_values(&m);
    for i in 0..3 {
        assert!((svd.sigma[i] - oracle[i]).abs() <= 1e-10 * oracle[i], "{i}");
    }
    assert!(svd.u.orthonormality_defect() <= 1e-10 * 3f64.sqrt());
    assert!(svd.v.orthonormality_defect() <= 1e-10 * 3f64.sqrt());
}

#[test]
fn truncation_error_is_tail_energy() {
    let mut g = rng(5);
    for (m, n, k) in [(7, 5, 2), (5, 9, 3), (12, 12, 6), (4, 4, 1)] {
        let a = DenseMatrix::random_normal(m, n, &mut g);
        let svd = svd_trunc(&a, k).unwrap();
        let resid = (&a - &svd.to_dense()).frobenius_norm_sq();
        let tail: f64 = singular_values(&a)[k..].iter().map(|s| s * s).sum();
        assert!((resid - tail).abs() <= 1e-9 * tail.max(1e-300), "{m}x{n} k={k}");
        assert!(rel(&svd.to_dense(), &dense_trunc(&a, k)) <= 1e-9);
    }
}

#[test]
fn skeleton_matches_dense_product() {
    let mut g = rng(8);
    let p = DenseMatrix::random_normal(8, 4, &mut g);
    let q = DenseMatrix::random_normal(6, 4, &mut g);
    let dense = naive_mul(&p, &q.transpose());
    let sk = skeleton_svd(&p, &q, 3).unwrap();
    let tr = svd_trunc(&dense, 3).unwrap();
    for i in 0..3 {
        assert!((sk.sigma[i] - tr.sigma[i]).abs() <= 1e-10 * tr.sigma[0]);
    }
    assert!(rel(&sk.to_dense(), &tr.to_dense()) <= 1e-10);
    assert!(rel(&sk.to_dense(), &dense_trunc(&dense, 3)) <= 1e-10);
}

#[test]
fn low_rank_rectangular_products_are_resolved() {
    // Rank-deficient rectangular inputs are where bidiagonal SVDs tend to
    // stall; sweep sizes like the ones the optimizer produces.
    let mut g = rng(41);
    for (m, n, w) in [(59, 32, 2), (60, 40, 2), (49, 51, 6), (55, 46, 6), (7, 33, 4), (64, 64, 16), (10, 45, 2)] {
        let p = DenseMatrix::random_normal(m, w, &mut g);
        let q = DenseMatrix::random_normal(n, w, &mut g);
        let x = naive_mul(&p, &q.transpose());
        let full = svd_trunc(&x, m.min(n)).unwrap();
        assert!(rel(&full.to_dense(), &x) <= 1e-12, "{m}x{n} rank {w}");
        let oracle = singular_values(&x);
        for i in 0..w {
            assert!((full.sigma[i] - oracle[i]).abs() <= 1e-10 * oracle[0], "{m}x{n} sigma {i}");
        }
        let sk = skeleton_svd(&p, &q, w).unwrap();
        assert!(rel(&sk.to_dense(), &full.to_dense()) <= 1e-10);
    }
}

#[test]
fn sign_convention_is_deterministic_across_shapes() {
    let mut g = rng(21);
    for _ in 0..20 {
        let m = DenseMatrix::random_normal(7, 5, &mut g);
        let a = svd_trunc(&m, 4).unwrap();
        let b = svd_trunc(&m.clone(), 4).unwrap();
        assert_eq!(a.u.to_row_major(), b.u.to_row_major());
        assert_eq!(a.v.to_row_major(), b.v.to_row_major());
        for j in 0..4 {
            let col: Vec<f64> = (0..7).map(|i| a.u.get(i, j)).collect();
            let top = col.iter().cloned().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            assert!(top > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn skeleton_equals_truncated_dense(m in 2usize..10, n in 2usize..10, k in 1usize..5, seed in any::<u64>()) {
        let k = k.min(m).min(n);
        let mut g = rng(seed);
        let p = DenseMatrix::random_normal(m, k, &mut g);
        let q = DenseMatrix::random_normal(n, k, &mut g);
        let r = 1 + (seed as usize) % k;
        let sk = skeleton_svd(&p, &q, r).unwrap();
        let dense = naive_mul(&p, &q.transpose());
        let oracle = singular_values(&dense);
        for i in 0..r {
            prop_assert!((sk.sigma[i] - oracle[i]).abs() <= 1e-10 * oracle[0]);
        }
        prop_assert!((&sk.to_dense() - &dense_trunc(&dense, r)).frobenius_norm() <= 1e-9 * dense.frobenius_norm());
    }

    #[test]
    fn sigma_sorted_and_nonnegative(m in 1usize..8, n in 1usize..8, seed in any::<u64>()) {
        let a = DenseMatrix::random_normal(m, n, &mut rng(seed));
        let s = svd_trunc(&a, m.min(n)).unwrap().sigma;
        prop_assert!(s.iter().all(|&x| x >= 0.0));
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }
}
