mod common;

use eigsmooth::optimizer::{Objective, OracleSpec, SolverConfig};
use eigsmooth::problems::*;
use eigsmooth::rng::seeded;
use eigsmooth::spectral::{full_eig, LanczosOptions, SymMatrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn spec(n: usize) -> OracleSpec {
    SolverConfig::default().oracle_spec(n).unwrap()
}

#[test]
fn dspca_at_zero_is_one() {
    let a = synthetic_covariance(8, 2, &mut seeded(1)).unwrap();
    let p = dspca_problem(a).unwrap();
    let x0 = p.prox().center();
    assert!((p.true_objective(&x0).unwrap() - 1.0).abs() < 1e-12);
    let e = p.exact(&x0, &LanczosOptions::with_tol(1e-12), 0, 0).unwrap();
    assert!((e.value - 1.0).abs() < 1e-10);
    let g = p.to_matrix(&e.grad);
    assert!((g.trace() - 1.0).abs() < 1e-10);
}

#[test]
fn box_diameter_matches_direct_maximization() {
    for n in 1..5 {
        let p = BoxProblem::new(SymMatrix::identity(n), 0.3).unwrap();
        // omega = ||x||^2 / 2 is maximized at a corner; D = sqrt(max omega - min omega)
        let corner = DVector::from_element(n * n, 0.3);
        let direct = p.prox().omega(&corner).sqrt();
        assert!((p.prox().diameter() - direct).abs() < 1e-12);
        assert!((p.prox().diameter() - 0.3 * n as f64 / 2f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn sampled_oracles_have_consistent_shapes() {
    let mc = maxcut_problem(7, 7.0, &mut seeded(3)).unwrap();
    let w = DVector::from_element(7, 0.2);
    let o = mc.sampled(&w, &spec(7), 0).unwrap();
    assert_eq!(o.grad.len(), 7);
    // gradient of lambda_max part has unit trace, minus the all-ones vector
    assert!((o.grad.sum() - (1.0 - 7.0)).abs() < 1e-10);
    assert!(o.value >= mc.true_objective(&w).unwrap());

    let a = synthetic_covariance(6, 2, &mut seeded(4)).unwrap();
    let ds = dspca_problem(a).unwrap();
    let x = ds.prox().center();
    let o = ds.sampled(&x, &spec(6), 0).unwrap();
    let g = ds.to_matrix(&o.grad);
    assert!(g.max_abs_diff(&SymMatrix::from_dmatrix(g.as_matrix().transpose()).unwrap()) < 1e-14);
    assert_eq!(o.cost_eigvecs, 6.0);
}

#[test]
fn covariance_files_load() {
    let dir = std::env::temp_dir().join(format!("eigsmooth-cov-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let samples = synthetic_samples(40, 12, 3, &mut seeded(5));
    let mut text = String::from("40 12\n");
    for r in samples.row_iter() {
        let row: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    let path = dir.join("samples.txt");
    std::fs::write(&path, &text).unwrap();
    let c = load_covariance(&path, 5).unwrap();
    assert_eq!(c.dim(), 5);
    assert!((full_eig(&c).unwrap().lambda_max() - 1.0).abs() < 1e-10);

    let full = sample_covariance(&samples).unwrap();
    let keep = top_variance_indices(full.diagonal().as_slice(), 5);
    let top = full_eig(&SymMatrix::from_fn(5, |i, j| full.get(keep[i], keep[j])).unwrap()).unwrap().lambda_max();
    assert!((c.get(0, 1) - full.get(keep[0], keep[1]) / top).abs() < 1e-12);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn reference_solution_is_certified() {
    let p = maxcut_problem(6, 6.0, &mut seeded(9)).unwrap();
    let r = reference_optimum(&p, 1e-6, 40_000).unwrap();
    assert!(r.gap <= 1e-6);
    assert!(r.lower_bound <= r.value);
    // a feasible perturbation cannot beat the certified bound
    let mut rng = seeded(1);
    for _ in 0..100 {
        let w = p.prox().set.project(&(&r.x + common::gaussian(6, &mut rng) * 0.1));
        assert!(p.true_objective(&w).unwrap() >= r.lower_bound);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn dspca_is_permutation_invariant(seed in any::<u64>()) {
        let n = 5;
        let mut rng = seeded(seed);
        let a = synthetic_covariance(n, 2, &mut rng).unwrap();
        let p = dspca_problem(a.clone()).unwrap();
        let x = p.prox().set.project(&(common::gaussian(n * n, &mut rng) * 0.05));
        let xs = p.to_matrix(&x);
        let x = p.to_point(&xs);
        let perm: Vec<usize> = vec![3, 0, 4, 1, 2];
        let pm = DMatrix::from_fn(n, n, |i, j| if perm[i] == j { 1.0 } else { 0.0 });
        let pa = dspca_problem(a.conjugate(&pm)).unwrap();
        let px = pa.to_point(&xs.conjugate(&pm));
        let lhs = p.true_objective(&x).unwrap();
        let rhs = pa.true_objective(&px).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn projections_stay_feasible_and_symmetric(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let mut rng = seeded(seed);
        let p = BoxProblem::new(SymMatrix::identity(4), 0.25).unwrap();
        let m = common::random_sym(4, &mut rng).scaled(scale);
        let y = p.prox().set.project(&p.to_point(&m));
        let ym = p.to_matrix(&y);
        prop_assert!(y.iter().all(|v| v.abs() <= 0.25));
        prop_assert_eq!(p.to_point(&ym), y);
        let b = BallProblem::new(SymMatrix::identity(4), 2.0).unwrap();
        let w = b.prox().set.project(&(common::gaussian(4, &mut rng) * scale));
        prop_assert!(w.norm() <= 2.0 * (1.0 + 1e-12));
    }
}
