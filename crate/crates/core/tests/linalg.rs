mod common;

use common::*;
use kronopt::linalg::{cholesky, cholesky_strict, direct_inverse, matmul, power_iteration, start_vector};
use kronopt::{Matrix, Rng};
use proptest::prelude::*;

fn mat(rows: usize, cols: usize, seed: u64) -> Matrix {
    Matrix::random_normal(rows, cols, 1.0, &mut Rng::new(seed))
}

#[test]
fn jacobi_oracle_sanity() {
    let ev = jacobi_eigenvalues(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
    assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    let ev = jacobi_eigenvalues(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
    // Characteristic polynomial roots: 3 and 3 ± √3.
    let s3 = 3f64.sqrt();
    for (got, want) in ev.iter().zip([3.0 - s3, 3.0, 3.0 + s3]) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn inverse_residual_up_to_64() {
    let mut rng = Rng::new(11);
    for d in [1, 2, 5, 16, 33, 64] {
        let m = Matrix::random_spd(d, 2 * d, 0.1, &mut rng);
        let inv = direct_inverse(&m).unwrap();
        let r = matmul(&m, &inv).unwrap();
        let err = max_abs_diff(&to_rows(&r), &identity(d));
        assert!(err < 1e-8 * d as f64, "d={d}: {err:e}");
    }
}

#[test]
fn singular_inverse_is_an_error() {
    let m = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
    assert!(matches!(direct_inverse(&m), Err(kronopt::Error::SingularMatrix)));
}

#[test]
fn power_iteration_matches_jacobi() {
    let mut rng = Rng::new(5);
    for d in [2, 4, 9, 20] {
        let m = Matrix::random_spd(d, 3 * d, 0.0, &mut rng);
        let (lambda, _) = power_iteration(&m, &start_vector(d), 10_000, 1e-13).unwrap();
        let top = *jacobi_eigenvalues(&to_rows(&m)).last().unwrap();
        assert!((lambda - top).abs() <= 1e-8 * top, "d={d}: {lambda} vs {top}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matmul_matches_triple_loop(n in 1usize..12, k in 1usize..12, m in 1usize..12, seed in any::<u64>()) {
        let a = mat(n, k, seed);
        let b = mat(k, m, seed ^ 1);
        let got = to_rows(&matmul(&a, &b).unwrap());
        let want = common::matmul(&to_rows(&a), &to_rows(&b));
        prop_assert!(max_abs_diff(&got, &want) <= 1e-12 * (k as f64));
    }

    #[test]
    fn identity_product_is_bitwise(n in 1usize..20, m in 1usize..20, seed in any::<u64>()) {
        let a = mat(n, m, seed);
        prop_assert_eq!(matmul(&Matrix::identity(n), &a).unwrap(), a.clone());
        prop_assert_eq!(matmul(&a, &Matrix::identity(m)).unwrap(), a);
    }

    #[test]
    fn matmul_shape_mismatch_errors(n in 1usize..6, k in 1usize..6, seed in any::<u64>()) {
        let r = matmul(&mat(n, k, seed), &mat(k + 1, 2, seed));
        prop_assert!(matches!(r, Err(kronopt::Error::DimensionMismatch { .. })), "expected a dimension mismatch");
    }

    #[test]
    fn cholesky_agrees_with_jacobi(d in 1usize..9, shift in -2.0f64..2.0, rank_deficient in any::<bool>(), seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let m = if rank_deficient && d > 1 {
            // Small integers keep B·Bᵀ exact, so the zero eigenvalue is exact up to
            // the eigen-solver's rounding.
            let b: Vec<Vec<f64>> = (0..d).map(|_| (0..d - 1).map(|_| (rng.below(5) as f64) - 2.0).collect()).collect();
            let bt: Vec<Vec<f64>> = (0..d - 1).map(|j| (0..d).map(|i| b[i][j]).collect()).collect();
            from_rows(&common::matmul(&b, &bt))
        } else {
            let base = common::random_spd(d, d + 1, 0.0, &mut rng);
            let mut base = base;
            for (i, row) in base.iter_mut().enumerate() {
                row[i] += shift;
            }
            from_rows(&base)
        };
        let rows = to_rows(&m);
        let lmin = jacobi_eigenvalues(&rows)[0];
        let norm = inf_norm(&rows);
        let threshold = -1e-10 * norm;
        // Away from the threshold the decision is unambiguous.
        prop_assume!((lmin - threshold).abs() > 1e-7 * norm.max(1.0) || rank_deficient);
        let ok = cholesky(&m).is_ok();
        prop_assert_eq!(ok, lmin >= threshold, "λmin = {:e}, ‖M‖∞ = {}", lmin, norm);
        if lmin > 1e-7 * norm.max(1.0) {
            let c = to_rows(&cholesky_strict(&m).unwrap());
            let ct: Vec<Vec<f64>> = (0..d).map(|j| (0..d).map(|i| c[i][j]).collect()).collect();
            prop_assert!(max_abs_diff(&common::matmul(&c, &ct), &rows) < 1e-10 * norm.max(1.0));
        }
    }

    #[test]
    fn inverse_matches_gauss_jordan(d in 1usize..12, seed in any::<u64>()) {
        let m = Matrix::random_spd(d, 2 * d, 0.2, &mut Rng::new(seed));
        let got = to_rows(&direct_inverse(&m).unwrap());
        let want = inverse(&to_rows(&m)).unwrap();
        prop_assert!(max_abs_diff(&got, &want) < 1e-9 * inf_norm(&want).max(1.0));
    }

    #[test]
    fn seeded_draws_are_reproducible(seed in any::<u64>(), n in 1usize..50) {
        let mut a = Rng::new(seed);
        let mut b = Rng::new(seed);
        let xs: Vec<u64> = (0..n).map(|_| a.normal().to_bits()).collect();
        let ys: Vec<u64> = (0..n).map(|_| b.normal().to_bits()).collect();
        prop_assert_eq!(xs, ys);
    }
}
