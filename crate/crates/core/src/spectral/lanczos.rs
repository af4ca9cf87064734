//! Leading eigenpair by Lanczos with full reorthogonalization.
//!
//! A start vector drawn uniformly on the sphere reaches relative precision
//! `rel_tol` with probability at least `1 - delta` within
//! `ceil(log(n / delta^2) / (4 sqrt(rel_tol)))` iterations. Each attempt runs
//! at most that many iterations (never more than `n`, where the Krylov space
//! is exhausted); when an attempt stagnates the iteration restarts from the
//! best Ritz vector mixed with a fresh random direction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::decomp::{canonical_sign, EigPair};
use super::SymMatrix;
use crate::error::{Error, Result};

/// A symmetric linear operator that can be applied to vectors.
pub trait SymOperator: Sync {
    fn dim(&self) -> usize;
    /// `y <- A x`.
    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>);
}

impl SymOperator for SymMatrix {
    fn dim(&self) -> usize {
        SymMatrix::dim(self)
    }

    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        self.mul_vec_into(x, y);
    }
}

/// `base + scale * v v^T`, applied without forming the update.
pub struct RankOneUpdate<'a> {
    pub base: &'a SymMatrix,
    pub v: &'a DVector<f64>,
    pub scale: f64,
}

impl SymOperator for RankOneUpdate<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        self.base.mul_vec_into(x, y);
        let c = self.scale * self.v.dot(x);
        y.axpy(c, self.v, 1.0);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LanczosOptions {
    /// Relative precision on the eigenvalue; also the residual tolerance
    /// `||A x - value x|| <= rel_tol * max(1, |value|)`.
    pub rel_tol: f64,
    /// Failure probability used in the iteration budget.
    pub fail_prob: f64,
    /// Restarts allowed after the first attempt.
    pub max_restarts: usize,
    /// Overrides the per-attempt iteration budget (testing and tuning).
    pub max_iter: Option<usize>,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            fail_prob: 1e-2,
            max_restarts: 3,
            max_iter: None,
        }
    }
}

impl LanczosOptions {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::invalid(format!(
                "Lanczos rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        if !(self.fail_prob > 0.0 && self.fail_prob < 1.0) {
            return Err(Error::invalid(format!(
                "Lanczos failure probability must lie in (0, 1), got {}",
                self.fail_prob
            )));
        }
        Ok(())
    }
}

/// Worst-case iteration count `ceil(log(n / delta^2) / (4 sqrt(rel_tol)))`.
pub fn lanczos_iteration_budget(n: usize, rel_tol: f64, fail_prob: f64) -> usize {
    let k = (n as f64 / (fail_prob * fail_prob)).ln() / (4.0 * rel_tol.sqrt());
    k.ceil().max(1.0) as usize
}

/// Computes the leading eigenpair of `op`.
///
/// `cost_eigvecs` is 1 on success; `matvecs` counts every operator
/// application, including restarts and final residual checks.
pub fn lanczos_leading<R: Rng + ?Sized>(
    op: &impl SymOperator,
    opts: &LanczosOptions,
    rng: &mut R,
) -> Result<EigPair> {
    opts.validate()?;
    let n = op.dim();
    if n == 0 {
        return Err(Error::invalid("empty operator"));
    }
    let budget = opts
        .max_iter
        .unwrap_or_else(|| lanczos_iteration_budget(n, opts.rel_tol, opts.fail_prob))
        .clamp(1, n);

    let mut matvecs = 0;
    let mut best: Option<(f64, DVector<f64>, f64)> = None;
    for _attempt in 0..=opts.max_restarts {
        let mut start = random_unit(n, rng);
        if let Some((_, ritz, _)) = &best {
            // Keep the progress of the last attempt while re-seeding every direction.
            start = ritz + start * 1e-3;
            start.normalize_mut();
        }
        let outcome = run_attempt(op, start, budget, opts.rel_tol, &mut matvecs);
        match outcome {
            Attempt::Converged(value, vector) => {
                return Ok(EigPair {
                    value,
                    vector,
                    cost_eigvecs: 1.0,
                    matvecs,
                });
            }
            Attempt::Stalled(value, vector, residual) => {
                if best.as_ref().is_none_or(|b| residual < b.2) {
                    best = Some((value, vector, residual));
                }
            }
        }
    }
    Err(Error::LanczosNoConvergence {
        attempts: opts.max_restarts + 1,
        matvecs,
        residual: best.map_or(f64::INFINITY, |b| b.2),
    })
}

enum Attempt {
    Converged(f64, DVector<f64>),
    Stalled(f64, DVector<f64>, f64),
}

fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

fn run_attempt(
    op: &impl SymOperator,
    start: DVector<f64>,
    budget: usize,
    tol: f64,
    matvecs: &mut usize,
) -> Attempt {
    let n = op.dim();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(budget + 1);
    let mut alpha: Vec<f64> = Vec::with_capacity(budget);
    let mut beta: Vec<f64> = Vec::with_capacity(budget);
    basis.push(start);
    let mut w = DVector::zeros(n);
    let mut scale = 0.0f64;
    let mut last = (f64::NAN, basis[0].clone(), f64::INFINITY);

    for j in 0..budget {
        op.apply(&basis[j], &mut w);
        *matvecs += 1;
        let a = basis[j].dot(&w);
        w.axpy(-a, &basis[j], 1.0);
        if j > 0 {
            w.axpy(-beta[j - 1], &basis[j - 1], 1.0);
        }
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        alpha.push(a);
        let b = w.norm();
        scale = scale.max(a.abs()).max(b);
        let breakdown = b <= 1e-14 * scale.max(1e-300);
        let steps = j + 1;
        let check = steps <= 8 || steps % 4 == 0 || breakdown || steps == budget;
        if check {
            let (theta, s) = top_ritz(&alpha, &beta);
            let estimate = b * s[steps - 1].abs();
            let mut y = DVector::zeros(n);
            for (k, q) in basis.iter().enumerate() {
                y.axpy(s[k], q, 1.0);
            }
            y.normalize_mut();
            if estimate <= tol * theta.abs().max(1.0) || breakdown || steps == budget {
                let mut ay = DVector::zeros(n);
                op.apply(&y, &mut ay);
                *matvecs += 1;
                let value = y.dot(&ay);
                ay.axpy(-value, &y, 1.0);
                let residual = ay.norm();
                if residual <= tol * value.abs().max(1.0) {
                    canonical_sign(&mut y);
                    return Attempt::Converged(value, y);
                }
                last = (value, y, residual);
            }
        }
        if breakdown {
            break;
        }
        beta.push(b);
        basis.push(&w / b);
    }
    Attempt::Stalled(last.0, last.1, last.2)
}

/// Largest eigenpair of the Lanczos tridiagonal matrix.
fn top_ritz(alpha: &[f64], beta: &[f64]) -> (f64, DVector<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (idx, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty tridiagonal");
    (theta, eig.eigenvectors.column(idx).into_owned())
}
