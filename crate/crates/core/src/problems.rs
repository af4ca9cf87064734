//! Problem instances: `lambda_max(A + X)` over a hypercube (DSPCA) and
//! `lambda_max(C + diag(w)) - 1^T w` over a Euclidean ball (MaxCut dual).
//!
//! DSPCA iterates are full `n x n` matrices stored column-major as vectors of
//! length `n^2`; the box applies to every entry, diagonal included.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{
    nesterov_smooth_baseline, softmax_value_grad, EuclideanProx, FeasibleSet, Objective,
    OracleOutput, OracleSpec, SmoothConfig,
};
use crate::rng::derived;
use crate::smoothing::{gradient_oracle, EigenPath};
use crate::spectral::{full_eig, lanczos_leading, parse_row, LanczosOptions, SymMatrix};

/// Stream tag keeping exact-oracle Lanczos starts apart from sampling streams.
const EXACT_STREAM: u64 = u64::MAX;

/// Dual lower bounds from a unit-trace positive semidefinite matrix `Z`.
pub trait Certificate {
    /// The affine matrix map `B(x)`.
    fn matrix(&self, x: &DVector<f64>) -> SymMatrix;
    /// `min_{x in Q} Tr(B(x) Z) + c^T x <= optimal value`.
    fn lower_bound(&self, z: &SymMatrix) -> f64;
}

fn unflatten(x: &DVector<f64>, n: usize) -> SymMatrix {
    SymMatrix::symmetrized(&DMatrix::from_column_slice(n, n, x.as_slice()))
}

fn flatten(m: &SymMatrix) -> DVector<f64> {
    DVector::from_column_slice(m.as_matrix().as_slice())
}

/// `minimize lambda_max(A + X)` subject to `|X_ij| <= rho`.
#[derive(Clone, Debug)]
pub struct BoxProblem {
    pub a: SymMatrix,
    pub rho: f64,
    prox: EuclideanProx,
}

/// Builds the hypercube problem with `rho = max(diag(A)) / 2`.
pub fn dspca_problem(a: SymMatrix) -> Result<BoxProblem> {
    let rho = a.diagonal().max() / 2.0;
    BoxProblem::new(a, rho)
}

impl BoxProblem {
    pub fn new(a: SymMatrix, rho: f64) -> Result<Self> {
        let n = a.dim();
        let prox = EuclideanProx::new(FeasibleSet::Box {
            half_width: rho,
            dim: n * n,
        })?;
        Ok(Self { a, rho, prox })
    }

    pub fn n(&self) -> usize {
        self.a.dim()
    }

    pub fn matrix_at(&self, x: &DVector<f64>) -> SymMatrix {
        self.a.add(&unflatten(x, self.n()))
    }

    pub fn to_matrix(&self, x: &DVector<f64>) -> SymMatrix {
        unflatten(x, self.n())
    }

    pub fn to_point(&self, x: &SymMatrix) -> DVector<f64> {
        flatten(x)
    }
}

impl Objective for BoxProblem {
    fn prox(&self) -> &EuclideanProx {
        &self.prox
    }

    fn matrix_dim(&self) -> usize {
        self.n()
    }

    fn sampled(&self, x: &DVector<f64>, spec: &OracleSpec, call: u64) -> Result<OracleOutput> {
        let b = self.matrix_at(x);
        let est = gradient_oracle(&EigenPath::Lanczos(&b, spec.lanczos), &spec.params, spec.q, spec.seed, call)?;
        Ok(OracleOutput {
            value: est.mean_value(),
            grad: flatten(&est.dense()),
            cost_eigvecs: est.cost_eigvecs,
            matvecs: est.matvecs,
            exact_value: None,
        })
    }

    fn exact(&self, x: &DVector<f64>, lanczos: &LanczosOptions, seed: u64, call: u64) -> Result<OracleOutput> {
        let b = self.matrix_at(x);
        let pair = lanczos_leading(&b, lanczos, &mut derived(seed, &[EXACT_STREAM, call]))?;
        let g = SymMatrix::zeros(self.n()).add_rank_one(&pair.vector, 1.0);
        Ok(OracleOutput {
            value: pair.value,
            grad: flatten(&g),
            cost_eigvecs: pair.cost_eigvecs,
            matvecs: pair.matvecs,
            exact_value: Some(pair.value),
        })
    }

    fn smoothed(&self, x: &DVector<f64>, mu: f64) -> Result<OracleOutput> {
        let s = softmax_value_grad(&self.matrix_at(x), mu)?;
        Ok(OracleOutput {
            value: s.value,
            grad: flatten(&s.grad),
            cost_eigvecs: s.cost_eigvecs,
            matvecs: 0,
            exact_value: Some(s.lambda_max),
        })
    }

    fn true_objective(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(full_eig(&self.matrix_at(x))?.lambda_max())
    }
}

impl Certificate for BoxProblem {
    fn matrix(&self, x: &DVector<f64>) -> SymMatrix {
        self.matrix_at(x)
    }

    /// `Tr(A Z) - rho sum_ij |Z_ij|`.
    fn lower_bound(&self, z: &SymMatrix) -> f64 {
        self.a.dot(z) - self.rho * z.as_matrix().iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// `minimize lambda_max(C + diag(w)) - 1^T w` subject to `||w|| <= R`.
#[derive(Clone, Debug)]
pub struct BallProblem {
    pub c: SymMatrix,
    pub radius: f64,
    prox: EuclideanProx,
}

/// Wishart instance `C = G^T G / ||G||_2^2` with `G` standard Gaussian.
pub fn maxcut_problem<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Result<BallProblem> {
    if n < 2 {
        return Err(Error::invalid(format!("MaxCut needs n >= 2, got {n}")));
    }
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let gtg = SymMatrix::symmetrized(&(g.transpose() * &g));
    let top = full_eig(&gtg)?.lambda_max();
    BallProblem::new(gtg.scaled(1.0 / top), radius)
}

impl BallProblem {
    pub fn new(c: SymMatrix, radius: f64) -> Result<Self> {
        let prox = EuclideanProx::new(FeasibleSet::Ball {
            radius,
            dim: c.dim(),
        })?;
        Ok(Self { c, radius, prox })
    }

    pub fn n(&self) -> usize {
        self.c.dim()
    }

    pub fn matrix_at(&self, w: &DVector<f64>) -> SymMatrix {
        self.c.add_diagonal(w)
    }

    fn linear(&self, w: &DVector<f64>) -> f64 {
        -w.sum()
    }
}

impl Objective for BallProblem {
    fn prox(&self) -> &EuclideanProx {
        &self.prox
    }

    fn matrix_dim(&self) -> usize {
        self.n()
    }

    fn sampled(&self, w: &DVector<f64>, spec: &OracleSpec, call: u64) -> Result<OracleOutput> {
        let b = self.matrix_at(w);
        let est = gradient_oracle(&EigenPath::Lanczos(&b, spec.lanczos), &spec.params, spec.q, spec.seed, call)?;
        Ok(OracleOutput {
            value: est.mean_value() + self.linear(w),
            grad: est.diagonal().add_scalar(-1.0),
            cost_eigvecs: est.cost_eigvecs,
            matvecs: est.matvecs,
            exact_value: None,
        })
    }

    fn exact(&self, w: &DVector<f64>, lanczos: &LanczosOptions, seed: u64, call: u64) -> Result<OracleOutput> {
        let pair = lanczos_leading(&self.matrix_at(w), lanczos, &mut derived(seed, &[EXACT_STREAM, call]))?;
        let value = pair.value + self.linear(w);
        Ok(OracleOutput {
            value,
            grad: pair.vector.component_mul(&pair.vector).add_scalar(-1.0),
            cost_eigvecs: pair.cost_eigvecs,
            matvecs: pair.matvecs,
            exact_value: Some(value),
        })
    }

    fn smoothed(&self, w: &DVector<f64>, mu: f64) -> Result<OracleOutput> {
        let s = softmax_value_grad(&self.matrix_at(w), mu)?;
        let lin = self.linear(w);
        Ok(OracleOutput {
            value: s.value + lin,
            grad: s.grad.diagonal().add_scalar(-1.0),
            cost_eigvecs: s.cost_eigvecs,
            matvecs: 0,
            exact_value: Some(s.lambda_max + lin),
        })
    }

    fn true_objective(&self, w: &DVector<f64>) -> Result<f64> {
        Ok(full_eig(&self.matrix_at(w))?.lambda_max() + self.linear(w))
    }
}

impl Certificate for BallProblem {
    fn matrix(&self, w: &DVector<f64>) -> SymMatrix {
        self.matrix_at(w)
    }

    /// `Tr(C Z) - R ||diag(Z) - 1||`.
    fn lower_bound(&self, z: &SymMatrix) -> f64 {
        self.c.dot(z) - self.radius * z.diagonal().add_scalar(-1.0).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Sampled,
}

/// Value, chain-ruled (sub)gradient and cost at `x` in either oracle mode.
pub fn composite_objective(
    obj: &impl Objective,
    x: &DVector<f64>,
    mode: Mode,
    spec: &OracleSpec,
    call: u64,
) -> Result<OracleOutput> {
    if !obj.prox().set.contains(x, 1e-12) {
        return Err(Error::invalid("point is not feasible"));
    }
    match mode {
        Mode::Exact => obj.exact(x, &spec.lanczos, spec.seed, call),
        Mode::Sampled => obj.sampled(x, spec, call),
    }
}

#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub x: DVector<f64>,
    pub value: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub smoothed_evaluations: usize,
}

/// Runs the soft-max baseline with decreasing `mu`, warm-started, until the
/// duality gap certified by the soft-max gradient falls below `gap_tol` or
/// `max_evaluations` smoothed evaluations have been spent.
pub fn reference_optimum<P: Objective + Certificate>(
    problem: &P,
    gap_tol: f64,
    max_evaluations: usize,
) -> Result<ReferenceSolution> {
    let n = problem.matrix_dim();
    let mut x = problem.prox().center();
    let mut best_value = problem.true_objective(&x)?;
    let mut best_x = x.clone();
    let mut lower = f64::NEG_INFINITY;
    let mut mu = 0.1;
    let mut evaluations = 0;
    let stage = 400;
    while evaluations < max_evaluations {
        let cfg = SmoothConfig {
            iterations: stage,
            lip_scale: 1.0,
            mu: Some(mu),
            start: Some(x.clone()),
            adaptive_restart: true,
            log_every: Some(stage),
            ..SmoothConfig::default()
        };
        let run = nesterov_smooth_baseline(problem, &cfg).map_err(|a| a.error)?;
        evaluations += run.oracle_calls;
        x = run.x;
        let value = problem.true_objective(&x)?;
        if value < best_value {
            best_value = value;
            best_x = x.clone();
        }
        let b = problem.matrix(&x);
        for m in [mu, mu * 0.1, mu * 0.01] {
            let z = softmax_value_grad(&b, m)?.grad;
            lower = lower.max(problem.lower_bound(&z));
        }
        if best_value - lower <= gap_tol {
            break;
        }
        mu = (mu * 0.25).max(1e-12 / (n as f64).ln().max(1.0));
    }
    Ok(ReferenceSolution {
        x: best_x,
        value: best_value,
        lower_bound: lower,
        gap: best_value - lower,
        smoothed_evaluations: evaluations,
    })
}

// ---------------------------------------------------------------------------
// Covariance ingestion and synthetic data.

/// Sample covariance of the columns of `samples` (rows are observations).
pub fn sample_covariance(samples: &DMatrix<f64>) -> Result<SymMatrix> {
    let m = samples.nrows();
    if m < 2 {
        return Err(Error::invalid(format!("need at least 2 observations, got {m}")));
    }
    let mean = samples.row_mean();
    let mut centered = samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.transpose() * &centered / (m as f64 - 1.0);
    Ok(SymMatrix::symmetrized(&cov))
}

/// Indices of the `k` largest variances, returned in increasing index order.
/// Ties keep the lower index.
pub fn top_variance_indices(variances: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..variances.len()).collect();
    order.sort_by(|&a, &b| variances[b].total_cmp(&variances[a]));
    let mut keep: Vec<usize> = order.into_iter().take(k).collect();
    keep.sort_unstable();
    keep
}

/// Restricts a covariance to its `n_select` highest-variance coordinates and
/// scales it to unit spectral norm.
pub fn select_and_normalize(cov: &SymMatrix, n_select: usize) -> Result<SymMatrix> {
    let p = cov.dim();
    if n_select == 0 || n_select > p {
        return Err(Error::invalid(format!(
            "n_select must lie in 1..={p}, got {n_select}"
        )));
    }
    let keep = top_variance_indices(cov.diagonal().as_slice(), n_select);
    let sub = SymMatrix::from_fn(n_select, |i, j| cov.get(keep[i], keep[j]))?;
    let d = full_eig(&sub)?;
    let top = d.lambda_max();
    let bottom = d.values[d.dim() - 1];
    if !(top > 0.0) || bottom < -1e-10 * top {
        return Err(Error::invalid(format!(
            "covariance must be positive semidefinite and nonzero, spectrum [{bottom}, {top}]"
        )));
    }
    Ok(sub.scaled(1.0 / top))
}

/// Parses either a covariance matrix (header `n`) or a sample matrix
/// (header `m p`, then `m` rows of `p` values).
pub fn parse_covariance(text: &str, n_select: usize) -> Result<SymMatrix> {
    let (line_no, header) = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .find(|(_, l)| !l.is_empty())
        .ok_or(Error::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let cov = match dims.as_slice() {
        [_] => SymMatrix::parse_text(text)?,
        [m, p] => {
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("invalid dimension {s:?}"),
                })
            };
            let (m, p) = (parse(m)?, parse(p)?);
            let mut data = DMatrix::zeros(m, p);
            let mut row = 0;
            let mut last = line_no;
            for (i, line) in text.lines().enumerate().skip(line_no) {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                last = i + 1;
                if row == m {
                    return Err(Error::Parse {
                        line: last,
                        msg: format!("unexpected extra row; expected {m} observations"),
                    });
                }
                let vals = parse_row(line, last)?;
                if vals.len() != p {
                    return Err(Error::Parse {
                        line: last,
                        msg: format!("expected {p} values, found {}", vals.len()),
                    });
                }
                for (j, v) in vals.into_iter().enumerate() {
                    data[(row, j)] = v;
                }
                row += 1;
            }
            if row != m {
                return Err(Error::Parse {
                    line: last + 1,
                    msg: format!("expected {m} observations, found {row}"),
                });
            }
            sample_covariance(&data)?
        }
        _ => {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("header must be `n` or `m p`, found {header:?}"),
            })
        }
    };
    select_and_normalize(&cov, n_select)
}

pub fn load_covariance(path: impl AsRef<Path>, n_select: usize) -> Result<SymMatrix> {
    parse_covariance(&std::fs::read_to_string(path)?, n_select)
}

/// Low-rank-plus-noise observations with heterogeneous coordinate scales.
///
/// Factor `f` has strength `2^(rank - 1 - f)`; every coordinate is multiplied
/// by a log-normal scale so that variance ranking is informative.
pub fn synthetic_samples<R: Rng + ?Sized>(m: usize, p: usize, rank: usize, rng: &mut R) -> DMatrix<f64> {
    let loadings = DMatrix::from_fn(p, rank, |_, f| {
        rng.sample::<f64, _>(StandardNormal) * 2f64.powi((rank - 1 - f) as i32)
    });
    let scales: Vec<f64> = (0..p)
        .map(|_| (0.5 * rng.sample::<f64, _>(StandardNormal)).exp())
        .collect();
    let factors = DMatrix::from_fn(m, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    let noise = DMatrix::from_fn(m, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut x = factors * loadings.transpose() + noise;
    for (j, s) in scales.iter().enumerate() {
        x.column_mut(j).scale_mut(*s);
    }
    x
}

/// Normalized covariance of `n` top-variance coordinates out of `2n`
/// synthetic ones, with `rank` well-separated leading directions.
pub fn synthetic_covariance<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> Result<SymMatrix> {
    let samples = synthetic_samples(4 * n, 2 * n, rank, rng);
    select_and_normalize(&sample_covariance(&samples)?, n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Dspca,
    Maxcut,
}
