mod common;

use common::random_sym;
use eigsmooth::rng::seeded;
use eigsmooth::smoothing::*;
use eigsmooth::spectral::{full_eig, LanczosOptions, SymMatrix};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn sample_exceeds_lambda_max_by_witness(n in 2usize..30, seed in any::<u64>(), eps in 0.01f64..5.0, k in 1usize..5) {
        let x = random_sym(n, &mut seeded(seed));
        let d = full_eig(&x).unwrap();
        let params = SmoothingParams::new(eps, k, n).unwrap();
        let s = sample_fk(&EigenPath::Secular(&d), &params, &mut seeded(seed ^ 1)).unwrap();
        let shift = s.value - d.lambda_max();
        let witness = s.gap_witness.unwrap();
        prop_assert!(shift >= witness - 1e-12 * (1.0 + d.lambda_max().abs()));
        prop_assert_eq!(s.cost_eigvecs, k as f64);
        prop_assert!((s.vector.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_is_unit_trace_psd(n in 2usize..25, seed in any::<u64>(), q in 1usize..6) {
        let x = random_sym(n, &mut seeded(seed));
        let d = full_eig(&x).unwrap();
        let params = SmoothingParams::new(0.3, 3, n).unwrap();
        let g = gradient_oracle(&EigenPath::Secular(&d), &params, q, seed, 5).unwrap();
        prop_assert!((g.trace() - 1.0).abs() < 1e-12);
        let e = full_eig(&g.dense()).unwrap();
        prop_assert!(e.values.iter().all(|v| *v > -1e-12));
        prop_assert!((g.diagonal().sum() - 1.0).abs() < 1e-12);
        prop_assert_eq!(g.cost_eigvecs, (3 * q) as f64);
    }
}

#[test]
fn oracle_streams_are_reproducible_and_distinct() {
    let x = random_sym(12, &mut seeded(2));
    let d = full_eig(&x).unwrap();
    let params = SmoothingParams::new(0.5, 3, 12).unwrap();
    let path = EigenPath::Secular(&d);
    let a = gradient_oracle(&path, &params, 4, 9, 1).unwrap();
    let b = gradient_oracle(&path, &params, 4, 9, 1).unwrap();
    let c = gradient_oracle(&path, &params, 4, 9, 2).unwrap();
    assert_eq!(a.vectors, b.vectors);
    assert_ne!(a.vectors, c.vectors);
}

#[test]
fn lanczos_path_matches_secular_path() {
    let x = random_sym(40, &mut seeded(3));
    let d = full_eig(&x).unwrap();
    let params = SmoothingParams::new(0.8, 3, 40).unwrap();
    let s = gradient_oracle(&EigenPath::Secular(&d), &params, 3, 4, 0).unwrap();
    let l = gradient_oracle(&EigenPath::Lanczos(&x, LanczosOptions::with_tol(1e-12)), &params, 3, 4, 0).unwrap();
    for (a, b) in s.values.iter().zip(&l.values) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(s.dense().max_abs_diff(&l.dense()) < 1e-7);
}

#[test]
fn small_k_has_no_lipschitz_constant() {
    assert!(lipschitz_factor(2).is_err());
    assert_eq!(lipschitz_factor(4).unwrap(), 2.0);
    let p = SmoothingParams::new(0.1, 3, 50).unwrap();
    assert!((lipschitz_bound(&p).unwrap() - 3.0 * 50.0 / 0.1).abs() < 1e-9);
}

#[test]
fn ck_is_close_to_one_in_high_dimension() {
    let est = estimate_ck(3, 400, 2000, &mut seeded(8));
    assert!(est.mean > 1.0 && est.mean < 1.2, "{est:?}");
}

#[test]
fn zero_eps_sample_is_lambda_max() {
    let x = SymMatrix::from_diagonal(&[1.0, 3.0, -2.0]);
    let d = full_eig(&x).unwrap();
    let params = SmoothingParams::new(0.0, 3, 3).unwrap();
    let s = sample_fk(&EigenPath::Secular(&d), &params, &mut seeded(1));
    match s {
        Ok(s) => assert!((s.value - 3.0).abs() < 1e-12),
        Err(e) => panic!("{e}"),
    }
}
