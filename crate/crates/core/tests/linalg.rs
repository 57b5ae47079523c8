//! Pseudoinverse and rank checked against the Penrose conditions and an
//! independent SVD.

use ibfd::linalg::{certainly_rank_deficient, numerical_rank, pseudoinverse, DenseMatrix, Svd};
use ibfd::{Rational, RationalMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `m × n` matrix of rank `min(r, m, n)` built as a product of random
/// factors, with entries spread over a few decades.
fn low_rank(seed: u64, m: usize, n: usize, r: usize) -> DenseMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l: Vec<f64> = (0..m * r).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let scale: Vec<f64> = (0..r).map(|_| 10f64.powf(rng.gen_range(-2.0..2.0))).collect();
    let rt: Vec<f64> = (0..r * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut data = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            data[i * n + j] = (0..r).map(|k| l[i * r + k] * scale[k] * rt[k * n + j]).sum();
        }
    }
    DenseMatrix::new(m, n, data).unwrap()
}

fn to_na(a: &DenseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

fn max_diff(a: &DenseMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            d = d.max((a.get(i, j) - b[(i, j)]).abs());
        }
    }
    d
}

fn is_symmetric(a: &DenseMatrix<f64>, tol: f64) -> bool {
    (0..a.rows()).all(|i| (0..a.cols()).all(|j| (a.get(i, j) - a.get(j, i)).abs() <= tol))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn penrose_conditions(seed in any::<u64>(), m in 1usize..9, n in 1usize..9, r in 1usize..9) {
        let a = low_rank(seed, m, n, r);
        let p = pseudoinverse(&a, 0.0).unwrap();
        prop_assert_eq!(p.shape(), (n, m));
        let norm = a.norm_inf().max(1e-300);
        let pnorm = p.norm_inf().max(1e-300);
        let tol = 1e-9;
        let apa = a.matmul(&p).unwrap().matmul(&a).unwrap();
        prop_assert!(apa.max_abs_diff(&a) <= tol * norm);
        let pap = p.matmul(&a).unwrap().matmul(&p).unwrap();
        prop_assert!(pap.max_abs_diff(&p) <= tol * pnorm);
        prop_assert!(is_symmetric(&a.matmul(&p).unwrap(), tol));
        prop_assert!(is_symmetric(&p.matmul(&a).unwrap(), tol));
    }

    #[test]
    fn agrees_with_reference_svd(seed in any::<u64>(), m in 1usize..9, n in 1usize..9, r in 1usize..9) {
        let a = low_rank(seed, m, n, r);
        let na = to_na(&a);
        let svd = na.clone().svd(true, true);
        let values = svd.singular_values.clone();
        let smax = values.max();
        let tol = m.max(n) as f64 * f64::EPSILON * smax;
        let reference = svd.pseudo_inverse(1e-10 * smax).unwrap();
        let ours = pseudoinverse(&a, 0.0).unwrap();
        prop_assert!(max_diff(&ours, &reference) <= 1e-8 * reference.abs().max().max(1.0));
        let expected_rank = values.iter().filter(|&&s| s > tol).count();
        prop_assert_eq!(numerical_rank(&a, 0.0).unwrap(), expected_rank);
        let ours_svd = Svd::new(&a).unwrap();
        for (s, t) in ours_svd.sigma.iter().zip(sorted_desc(values.as_slice())) {
            prop_assert!((s - t).abs() <= 1e-12 * smax);
        }
    }

    #[test]
    fn rank_of_transpose(seed in any::<u64>(), m in 1usize..9, n in 1usize..9, r in 1usize..9) {
        let a = low_rank(seed, m, n, r);
        let rank = numerical_rank(&a, 0.0).unwrap();
        prop_assert_eq!(rank, numerical_rank(&a.transpose(), 0.0).unwrap());
        prop_assert_eq!(rank, r.min(m).min(n));
    }

    #[test]
    fn deficiency_screen_never_contradicts_the_svd(seed in any::<u64>(), m in 1usize..12, n in 1usize..9, r in 1usize..9) {
        let a = low_rank(seed, m.max(n), n, r);
        if certainly_rank_deficient(&a, 0.0) {
            prop_assert!(numerical_rank(&a, 0.0).unwrap() < n);
        }
    }
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

#[test]
fn tall_preconditioned_path_matches_direct() {
    // 40 × 6 is tall enough for the QR-preconditioned route.
    let a = low_rank(7, 40, 6, 6);
    let svd = Svd::new(&a).unwrap();
    let reference = to_na(&a).svd(false, false).singular_values;
    for (s, t) in svd.sigma.iter().zip(sorted_desc(reference.as_slice())) {
        assert!((s - t).abs() <= 1e-12 * reference.max());
    }
    let recon = {
        let mut us = svd.u.clone();
        for i in 0..us.rows() {
            for k in 0..us.cols() {
                let v = *us.get(i, k) * svd.sigma[k];
                us.set(i, k, v);
            }
        }
        us.matmul(&svd.v.transpose()).unwrap()
    };
    assert!(recon.max_abs_diff(&a) <= 1e-12 * a.norm_inf());
}

#[test]
fn exact_rational_inverse() {
    let r = |n: i64, d: i64| Rational::new(n, d);
    let a = RationalMatrix::from_rows(&[
        vec![r(1, 1), r(-1, 1), r(1, 2)],
        vec![r(1, 1), r(0, 1), r(0, 1)],
        vec![r(1, 1), r(1, 1), r(1, 2)],
    ])
    .unwrap();
    let inv = a.inverse().unwrap();
    let expected = RationalMatrix::from_rows(&[
        vec![r(0, 1), r(1, 1), r(0, 1)],
        vec![r(-1, 2), r(0, 1), r(1, 2)],
        vec![r(1, 1), r(-2, 1), r(1, 1)],
    ])
    .unwrap();
    assert_eq!(inv, expected);
}
