use nalgebra::DVector;

use super::{Aborted, Objective, Recorder, RunResult};
use crate::error::{Error, Result};
use crate::spectral::{full_eig, LanczosOptions, SymMatrix};

/// Soft-max smoothing of `lambda_max` at one matrix.
#[derive(Clone, Debug)]
pub struct SoftmaxEval {
    /// `mu log Tr exp(X / mu)`, in `[lambda_max, lambda_max + mu log n]`.
    pub value: f64,
    /// `exp(X / mu) / Tr exp(X / mu)`: unit trace, positive semidefinite.
    pub grad: SymMatrix,
    pub lambda_max: f64,
    /// A dense decomposition counts as `n` eigenvectors.
    pub cost_eigvecs: f64,
}

/// Evaluates the soft-max through one full decomposition, shifting by
/// `lambda_max` so every exponent is nonpositive.
pub fn softmax_value_grad(x: &SymMatrix, mu: f64) -> Result<SoftmaxEval> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("soft-max needs mu > 0, got {mu}")));
    }
    let d = full_eig(x)?;
    let l1 = d.lambda_max();
    let total: f64 = d.values.iter().map(|l| ((l - l1) / mu).exp()).sum();
    let grad = d.spectral_map(|l| ((l - l1) / mu).exp() / total);
    Ok(SoftmaxEval {
        value: l1 + mu * total.ln(),
        grad,
        lambda_max: l1,
        cost_eigvecs: d.cost_eigvecs(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubgradientConfig {
    pub iterations: usize,
    pub seed: u64,
    pub lanczos: LanczosOptions,
    pub log_every: Option<usize>,
    pub record_wall_time: bool,
}

impl Default for SubgradientConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            seed: 0,
            lanczos: LanczosOptions::with_tol(1e-10),
            log_every: None,
            record_wall_time: false,
        }
    }
}

/// Projected subgradient descent with steps `D / (||g|| sqrt(t))`.
///
/// Trace rows report the best objective so far as `obj_true` and the current
/// one as `obj_sampled`; the returned point is the best iterate.
pub fn subgradient_baseline(obj: &impl Objective, cfg: &SubgradientConfig) -> RunResult {
    let prox = obj.prox();
    let n_iter = cfg.iterations;
    let every = cfg.log_every.unwrap_or(n_iter.div_ceil(200)).max(1);
    let mut rec = Recorder::new(every, n_iter, cfg.record_wall_time);
    let d = prox.diameter();
    let mut x = prox.center();
    let mut best = (f64::INFINITY, x.clone());
    for t in 1..=n_iter {
        let g = match obj.exact(&x, &cfg.lanczos, cfg.seed, t as u64) {
            Ok(g) => g,
            Err(e) => {
                return Err(Aborted {
                    partial: Box::new(rec.finish(best.1, t - 1, None, None, None)),
                    error: Error::Oracle {
                        iteration: t,
                        source: Box::new(e),
                    },
                })
            }
        };
        rec.charge(&g);
        if g.value < best.0 {
            best = (g.value, x.clone());
        }
        let gnorm = g.grad.norm();
        let step = if gnorm > 0.0 {
            d / (gnorm * (t as f64).sqrt())
        } else {
            0.0
        };
        rec.gammas.push(step);
        if rec.due(t) {
            rec.log(t, best.0, g.value, step);
        }
        x = prox.prox(&x, &(&g.grad * step));
    }
    Ok(rec.finish(best.1, n_iter, None, None, None))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothConfig {
    /// Target accuracy; `mu = eps / log n` unless `mu` is given.
    pub eps: f64,
    pub iterations: usize,
    /// Initial curvature estimate is `1 / (mu lip_scale)`.
    pub lip_scale: f64,
    pub mu: Option<f64>,
    pub start: Option<DVector<f64>>,
    /// Resets momentum when the smoothed value increases.
    pub adaptive_restart: bool,
    pub log_every: Option<usize>,
    pub record_wall_time: bool,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        Self {
            eps: 0.05,
            iterations: 100,
            lip_scale: 100.0,
            mu: None,
            start: None,
            adaptive_restart: false,
            log_every: None,
            record_wall_time: false,
        }
    }
}

impl SmoothConfig {
    pub fn mu(&self, n: usize) -> f64 {
        self.mu
            .unwrap_or_else(|| self.eps / (n as f64).ln().max(1.0))
    }
}

/// Accelerated projected gradient with backtracking on the soft-max
/// smoothing `mu log Tr exp(B(x) / mu)`.
///
/// Each smoothed evaluation is one dense decomposition and is charged `n`
/// eigenvectors, including the evaluations spent on backtracking.
pub fn nesterov_smooth_baseline(obj: &impl Objective, cfg: &SmoothConfig) -> RunResult {
    let prox = obj.prox();
    let n = obj.matrix_dim();
    let n_iter = cfg.iterations;
    let every = cfg.log_every.unwrap_or(n_iter.div_ceil(200)).max(1);
    let mut rec = Recorder::new(every, n_iter, cfg.record_wall_time);
    let mu = cfg.mu(n);
    let start = cfg
        .start
        .as_ref()
        .map_or_else(|| prox.center(), |s| prox.set.project(s));
    let fail = |rec: Recorder, x: DVector<f64>, t: usize, e: Error| Aborted {
        partial: Box::new(rec.finish(x, t - 1, None, None, None)),
        error: Error::Oracle {
            iteration: t,
            source: Box::new(e),
        },
    };
    if !(mu > 0.0 && mu.is_finite()) || !(cfg.lip_scale > 0.0) {
        return Err(fail(
            rec,
            start,
            1,
            Error::invalid(format!("mu and lip_scale must be positive, got {mu} and {}", cfg.lip_scale)),
        ));
    }
    let mut lip = 1.0 / (mu * cfg.lip_scale);
    let mut x_prev = start.clone();
    let mut y = start;
    let mut theta = 1.0f64;
    let mut last_value = f64::INFINITY;
    for t in 1..=n_iter {
        let fy = match obj.smoothed(&y, mu) {
            Ok(v) => v,
            Err(e) => return Err(fail(rec, x_prev, t, e)),
        };
        rec.charge(&fy);
        let (x_new, fx) = loop {
            let x_new = prox.prox(&y, &(&fy.grad / lip));
            let fx = match obj.smoothed(&x_new, mu) {
                Ok(v) => v,
                Err(e) => return Err(fail(rec, x_prev, t, e)),
            };
            rec.charge(&fx);
            let diff = &x_new - &y;
            let model = fy.value + fy.grad.dot(&diff) + 0.5 * lip * diff.norm_squared();
            if fx.value <= model + 1e-12 * fy.value.abs().max(1.0) {
                break (x_new, fx);
            }
            lip *= 2.0;
        };
        rec.gammas.push(1.0 / lip);
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        if cfg.adaptive_restart && fx.value > last_value {
            theta = 1.0;
            y = x_new.clone();
        } else {
            y = &x_new + (&x_new - &x_prev) * ((theta - 1.0) / theta_next);
            theta = theta_next;
        }
        last_value = fx.value;
        if rec.due(t) {
            let exact = match fx.exact_value {
                Some(v) => v,
                None => match obj.true_objective(&x_new) {
                    Ok(v) => v,
                    Err(e) => return Err(fail(rec, x_new, t, e)),
                },
            };
            rec.log(t, exact, fx.value, 1.0 / lip);
        }
        x_prev = x_new;
    }
    let d = prox.diameter();
    let bound = 2.0 * lip * d * d / ((n_iter as f64 + 1.0).powi(2)) + cfg.eps;
    Ok(rec.finish(x_prev, n_iter, None, None, Some(bound)))
}
