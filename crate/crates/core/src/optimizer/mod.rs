//! First-order methods for `min_{x in Q} Psi(x)` where `Psi` is a maximum
//! eigenvalue composed with an affine map.
//!
//! The stochastic methods are AC-SA with deterministic step sizes and its
//! adaptive variant with a monotone line search on the step scale `gamma`.
//! A projected subgradient method and an accelerated soft-max smoothing
//! method serve as baselines. All of them emit traces in the same schema.

mod acsa;
mod baselines;
mod prox;

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use acsa::{acsa_linesearch_run, acsa_run, line_search_exit, ExitTest};
pub use baselines::{
    nesterov_smooth_baseline, softmax_value_grad, subgradient_baseline, SmoothConfig,
    SoftmaxEval, SubgradientConfig,
};
pub use prox::{EuclideanProx, FeasibleSet};

use crate::error::{Error, Result};
use crate::smoothing::{lipschitz_bound, lipschitz_factor, SmoothingParams};
use crate::spectral::LanczosOptions;
use crate::trace::TraceRecord;

/// Value and (sub)gradient returned by one oracle call.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleOutput {
    pub value: f64,
    pub grad: DVector<f64>,
    pub cost_eigvecs: f64,
    pub matvecs: usize,
    /// Exact objective at the same point when it falls out of the computation.
    pub exact_value: Option<f64>,
}

/// Everything the stochastic oracle needs besides the point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleSpec {
    pub params: SmoothingParams,
    pub q: usize,
    pub seed: u64,
    pub lanczos: LanczosOptions,
}

/// An objective `Psi(x) = lambda_max(B(x)) + c^T x` over a Euclidean prox setup.
pub trait Objective: Sync {
    fn prox(&self) -> &EuclideanProx;

    /// Dimension `n` of the matrix `B(x)`.
    fn matrix_dim(&self) -> usize;

    /// Smoothed stochastic oracle `Psi(x, xi)`, `G(x, xi)` with noise index `call`.
    fn sampled(&self, x: &DVector<f64>, spec: &OracleSpec, call: u64) -> Result<OracleOutput>;

    /// Exact value and subgradient from one leading eigenvector.
    /// `seed` and `call` only feed Lanczos start vectors.
    fn exact(
        &self,
        x: &DVector<f64>,
        lanczos: &LanczosOptions,
        seed: u64,
        call: u64,
    ) -> Result<OracleOutput>;

    /// Soft-max smoothed value `mu log Tr exp(B(x)/mu) + c^T x` and its gradient.
    fn smoothed(&self, x: &DVector<f64>, mu: f64) -> Result<OracleOutput>;

    /// High-accuracy objective for diagnostics; never charged.
    fn true_objective(&self, x: &DVector<f64>) -> Result<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Iteration budget `N`.
    pub iterations: usize,
    pub eps: f64,
    pub k: usize,
    pub q: usize,
    pub gamma_max: Option<f64>,
    pub gamma_min: Option<f64>,
    pub gamma_d: f64,
    pub gamma_init: Option<f64>,
    /// The Lipschitz bound `C_k n / eps` is divided by this factor.
    pub lip_scale: f64,
    /// Overrides the scaled Lipschitz bound.
    pub lipschitz: Option<f64>,
    /// Overrides the oracle variance `1/q`.
    pub sigma_sq: Option<f64>,
    /// Nonsmooth modulus `M` of the composite template.
    pub m_lipschitz: f64,
    /// Noise bias bound, `k eps` when unset.
    pub mu: Option<f64>,
    pub seed: u64,
    /// Relative tolerance of the Lanczos solves inside the oracle.
    pub lanczos_tol: f64,
    /// Trace row spacing, `ceil(N / 200)` when unset.
    pub log_every: Option<usize>,
    pub record_wall_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            eps: 0.05,
            k: 3,
            q: 2,
            gamma_max: None,
            gamma_min: None,
            gamma_d: 0.5,
            gamma_init: None,
            lip_scale: 100.0,
            lipschitz: None,
            sigma_sq: None,
            m_lipschitz: 0.0,
            mu: None,
            seed: 0,
            lanczos_tol: 1e-8,
            log_every: None,
            record_wall_time: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::invalid(format!("{field}: {why}")));
        if self.iterations == 0 {
            return bad("iterations", "must be at least 1".into());
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps", format!("must be positive, got {}", self.eps));
        }
        if self.k == 0 {
            return bad("k", "must be at least 1".into());
        }
        if self.q == 0 {
            return bad("q", "must be at least 1".into());
        }
        if !(self.gamma_d > 0.0 && self.gamma_d < 1.0) {
            return bad("gamma_d", format!("must lie in (0, 1), got {}", self.gamma_d));
        }
        if !(self.lip_scale > 0.0) {
            return bad("lip_scale", format!("must be positive, got {}", self.lip_scale));
        }
        if !(self.m_lipschitz >= 0.0) {
            return bad("m_lipschitz", format!("must be >= 0, got {}", self.m_lipschitz));
        }
        if !(self.lanczos_tol > 0.0 && self.lanczos_tol < 1.0) {
            return bad("lanczos_tol", format!("must lie in (0, 1), got {}", self.lanczos_tol));
        }
        if self.log_every == Some(0) {
            return bad("log_every", "must be at least 1".into());
        }
        for (name, v) in [
            ("gamma_max", self.gamma_max),
            ("gamma_min", self.gamma_min),
            ("gamma_init", self.gamma_init),
            ("lipschitz", self.lipschitz),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(name, format!("must be positive and finite, got {v}"));
                }
            }
        }
        Ok(())
    }

    pub fn smoothing_params(&self, n: usize) -> Result<SmoothingParams> {
        SmoothingParams::new(self.eps, self.k, n)
    }

    pub fn oracle_spec(&self, n: usize) -> Result<OracleSpec> {
        Ok(OracleSpec {
            params: self.smoothing_params(n)?,
            q: self.q,
            seed: self.seed,
            lanczos: LanczosOptions::with_tol(self.lanczos_tol),
        })
    }

    pub fn log_every(&self) -> usize {
        self.log_every.unwrap_or(self.iterations.div_ceil(200)).max(1)
    }
}

/// Step-size ingredients after defaults are filled in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub alpha: f64,
    pub diameter: f64,
    pub lipschitz: f64,
    pub sigma_sq: f64,
    pub m_lipschitz: f64,
    pub mu: f64,
    pub gamma_max: f64,
    pub gamma_min: f64,
    pub gamma_init: f64,
}

/// `sqrt(6 alpha) D / ((N + 2)^(3/2) sqrt(4 M^2 + sigma^2))`.
pub fn gamma_max_formula(alpha: f64, d: f64, n_iter: usize, m: f64, sigma_sq: f64) -> f64 {
    let denom = (n_iter as f64 + 2.0).powf(1.5) * (4.0 * m * m + sigma_sq).sqrt();
    (6.0 * alpha).sqrt() * d / denom
}

pub fn resolve_steps(cfg: &SolverConfig, prox: &EuclideanProx, matrix_dim: usize) -> Result<StepSizes> {
    cfg.validate()?;
    let alpha = prox.alpha();
    let diameter = prox.diameter();
    let lipschitz = match cfg.lipschitz {
        Some(l) => l,
        None => lipschitz_bound(&cfg.smoothing_params(matrix_dim)?)? / cfg.lip_scale,
    };
    let sigma_sq = cfg.sigma_sq.unwrap_or(1.0 / cfg.q as f64);
    let gamma_max = cfg.gamma_max.unwrap_or_else(|| {
        gamma_max_formula(alpha, diameter, cfg.iterations, cfg.m_lipschitz, sigma_sq)
    });
    let gamma_min = cfg
        .gamma_min
        .unwrap_or_else(|| (alpha / (2.0 * lipschitz)).min(gamma_max));
    let gamma_init = cfg.gamma_init.unwrap_or(gamma_max);
    if gamma_min > gamma_max || gamma_init > gamma_max || gamma_init < gamma_min {
        return Err(Error::invalid(format!(
            "need gamma_min <= gamma_init <= gamma_max, got {gamma_min} / {gamma_init} / {gamma_max}"
        )));
    }
    Ok(StepSizes {
        alpha,
        diameter,
        lipschitz,
        sigma_sq,
        m_lipschitz: cfg.m_lipschitz,
        mu: cfg.mu.unwrap_or(cfg.k as f64 * cfg.eps),
        gamma_max,
        gamma_min,
        gamma_init,
    })
}

/// `N = ceil(2 D sqrt(n) / eps)`, `q = ceil(max(1, D / (eps sqrt(n))))`.
pub fn default_schedule(n: usize, eps: f64, d: f64) -> (usize, usize) {
    let rn = (n as f64).sqrt();
    let iters = (2.0 * d * rn / eps).ceil().max(1.0) as usize;
    let q = (d / (eps * rn)).max(1.0).ceil() as usize;
    (iters, q)
}

/// Experimental protocol: `eps = 0.05`, `q = ceil(0.1 / eps)`, `k = 3`,
/// `N = ceil(c sqrt(n))` and the Lipschitz bound scaled down by 100.
pub fn experiment_preset(n: usize, iteration_factor: f64) -> SolverConfig {
    let eps = 0.05;
    SolverConfig {
        iterations: (iteration_factor * (n as f64).sqrt()).ceil() as usize,
        eps,
        k: 3,
        q: (0.1 / eps).ceil() as usize,
        lip_scale: 100.0,
        ..SolverConfig::default()
    }
}

/// `8 n C_k D^2 / (eps N (N + 2)) + 4 sqrt(2) D / sqrt(N q)`.
pub fn acsa_expected_bound(n: usize, eps: f64, k: usize, d: f64, q: usize, n_iter: usize) -> Result<f64> {
    let ck = lipschitz_factor(k)?;
    let nn = n_iter as f64;
    Ok(8.0 * n as f64 * ck * d * d / (eps * nn * (nn + 2.0))
        + 4.0 * 2f64.sqrt() * d / (nn * q as f64).sqrt())
}

/// Coarse bound for the line-search variant with switch time `T_gamma`.
pub fn linesearch_coarse_bound(steps: &StepSizes, n_iter: usize, t_gamma: usize) -> f64 {
    let nn = n_iter as f64;
    let tg = t_gamma as f64;
    let rho = ((tg + 2.0) / (nn + 2.0)).powi(3);
    let d = steps.diameter;
    let noise = (4.0 * steps.m_lipschitz.powi(2) + steps.sigma_sq).sqrt();
    let ratio = steps.gamma_max / steps.gamma_min;
    8.0 * steps.lipschitz * d * d / (steps.alpha * nn * nn)
        + 8.0 * d * noise / nn.sqrt() * (ratio * rho + 1.0 - rho)
        + (tg + 2.0).powi(2) * steps.gamma_max * steps.mu / (nn * nn * 2.0 * steps.gamma_min)
}

/// The `(x_t, x_t^md, x_t^ag)` triple and step state of the adaptive method.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateState {
    pub t: usize,
    pub x: DVector<f64>,
    pub x_md: DVector<f64>,
    pub x_ag: DVector<f64>,
    pub gamma: f64,
    pub t_gamma: Option<usize>,
}

impl IterateState {
    pub fn beta_t(&self) -> f64 {
        (self.t as f64 + 1.0) / 2.0
    }

    pub fn gamma_t(&self) -> f64 {
        (self.t as f64 + 1.0) * self.gamma / 2.0
    }
}

/// `(2 / (t + 1)) x + ((t - 1) / (t + 1)) y`.
pub fn interpolate(t: usize, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let tf = t as f64;
    let a = 2.0 / (tf + 1.0);
    let b = (tf - 1.0) / (tf + 1.0);
    x * a + y * b
}

#[derive(Clone, Debug)]
pub struct SolverRun {
    /// Returned point: `x^ag_{N+1}` for the AC-SA family, best iterate for the baselines.
    pub x: DVector<f64>,
    pub trace: Vec<TraceRecord>,
    /// Step scale used at each completed iteration.
    pub gammas: Vec<f64>,
    pub t_gamma: Option<usize>,
    pub iterations: usize,
    pub total_eigvecs: f64,
    pub matvecs: usize,
    pub oracle_calls: usize,
    pub steps: Option<StepSizes>,
    /// Theoretical bound logged with the run.
    pub bound: Option<f64>,
}

impl SolverRun {
    pub fn best_objective(&self) -> f64 {
        self.trace.iter().map(|r| r.obj_true).fold(f64::INFINITY, f64::min)
    }

    pub fn final_objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.obj_true)
    }
}

/// A run that stopped early; `partial` holds everything up to the failure.
#[derive(Debug, thiserror::Error)]
#[error("solver aborted at iteration {}: {error}", partial.iterations + 1)]
pub struct Aborted {
    pub partial: Box<SolverRun>,
    #[source]
    pub error: Error,
}

pub type RunResult = std::result::Result<SolverRun, Aborted>;

/// Cost bookkeeping and trace emission shared by every method.
pub(crate) struct Recorder {
    every: usize,
    last: usize,
    start: Option<Instant>,
    pub eigvecs: f64,
    pub matvecs: usize,
    pub calls: usize,
    pub trace: Vec<TraceRecord>,
    pub gammas: Vec<f64>,
}

impl Recorder {
    pub fn new(every: usize, last: usize, wall: bool) -> Self {
        Self {
            every,
            last,
            start: wall.then(Instant::now),
            eigvecs: 0.0,
            matvecs: 0,
            calls: 0,
            trace: Vec::new(),
            gammas: Vec::new(),
        }
    }

    pub fn charge(&mut self, out: &OracleOutput) {
        self.eigvecs += out.cost_eigvecs;
        self.matvecs += out.matvecs;
        self.calls += 1;
    }

    pub fn due(&self, t: usize) -> bool {
        t % self.every == 0 || t == self.last
    }

    pub fn log(&mut self, t: usize, obj_true: f64, obj_sampled: f64, gamma: f64) {
        let wall_ms = self
            .start
            .map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3);
        self.trace.push(TraceRecord {
            t,
            obj_true,
            obj_sampled,
            gamma,
            eigvecs: self.eigvecs,
            wall_ms,
        });
    }

    pub fn finish(
        self,
        x: DVector<f64>,
        iterations: usize,
        t_gamma: Option<usize>,
        steps: Option<StepSizes>,
        bound: Option<f64>,
    ) -> SolverRun {
        SolverRun {
            x,
            trace: self.trace,
            gammas: self.gammas,
            t_gamma,
            iterations,
            total_eigvecs: self.eigvecs,
            matvecs: self.matvecs,
            oracle_calls: self.calls,
            steps,
            bound,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_arithmetic() {
        assert_eq!(default_schedule(100, 0.05, 10.0), (4000, 20));
        assert_eq!(default_schedule(100, 0.05, 0.5).1, 1);
        let p = experiment_preset(100, 100.0);
        assert_eq!((p.q, p.k, p.iterations), (2, 3, 1000));
        assert_eq!(p.eps, 0.05);
    }

    #[test]
    fn acsa_bound_matches_hand_evaluation() {
        for n_iter in [10usize, 100, 1000] {
            let nn = n_iter as f64;
            let want = 8.0 * 100.0 * 3.0 / (0.05 * nn * (nn + 2.0)) + 4.0 * 2f64.sqrt() / (2.0 * nn).sqrt();
            assert_relative_eq!(
                acsa_expected_bound(100, 0.05, 3, 1.0, 2, n_iter).unwrap(),
                want,
                max_relative = 1e-14
            );
        }
        let b: Vec<f64> = (1..50)
            .map(|n| acsa_expected_bound(100, 0.05, 3, 1.0, 2, n).unwrap())
            .collect();
        assert!(b.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn interpolation_weights_sum_to_one() {
        for t in 1..50usize {
            let tf = t as f64;
            assert_eq!(2.0 / (tf + 1.0) + (tf - 1.0) / (tf + 1.0), 1.0);
        }
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let y = DVector::from_vec(vec![-3.0, 0.5]);
        assert_eq!(interpolate(1, &x, &y), x);
    }

    #[test]
    fn steps_follow_formulas() {
        let prox = EuclideanProx::new(FeasibleSet::Ball { radius: 2f64.sqrt(), dim: 4 }).unwrap();
        let cfg = SolverConfig {
            iterations: 98,
            eps: 0.5,
            k: 3,
            q: 4,
            lip_scale: 1.0,
            ..SolverConfig::default()
        };
        let s = resolve_steps(&cfg, &prox, 10).unwrap();
        assert_relative_eq!(s.diameter, 1.0, epsilon = 1e-15);
        assert_relative_eq!(s.lipschitz, 60.0, max_relative = 1e-14);
        // sqrt(6) / (100^1.5 * 0.5)
        assert_relative_eq!(s.gamma_max, 6f64.sqrt() / 500.0, max_relative = 1e-14);
        assert_relative_eq!(s.gamma_min, (1.0f64 / 120.0).min(6f64.sqrt() / 500.0));
        assert_relative_eq!(s.mu, 1.5);
    }

    #[test]
    fn config_errors_name_the_field() {
        let cfg = SolverConfig {
            gamma_d: 1.5,
            ..SolverConfig::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("gamma_d"), "{msg}");
    }
}
