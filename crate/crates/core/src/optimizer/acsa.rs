use nalgebra::DVector;

use super::{
    acsa_expected_bound, interpolate, linesearch_coarse_bound, resolve_steps, Aborted, Objective,
    OracleOutput, Recorder, RunResult, SolverConfig, StepSizes,
};
use crate::error::Error;

/// Inputs of the line-search exit inequality at one candidate step.
#[derive(Clone, Copy, Debug)]
pub struct ExitTest<'a> {
    /// `Psi(x^ag_{t+1}, xi_{t+1})`.
    pub psi_next: f64,
    /// `Psi(x^md_t, xi_t)`.
    pub psi_md: f64,
    /// `G(x^md_t, xi_t)`.
    pub grad_md: &'a DVector<f64>,
    pub x_ag_next: &'a DVector<f64>,
    pub x_md: &'a DVector<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub gamma_d: f64,
    pub m_lipschitz: f64,
}

/// `Psi(ag, xi_{t+1}) <= Psi(md, xi_t) + <G, ag - md> + alpha gamma_d / (4 gamma) ||ag - md||^2 + 2 M ||ag - md||`.
pub fn line_search_exit(e: &ExitTest<'_>) -> bool {
    let diff = e.x_ag_next - e.x_md;
    let dist_sq = diff.norm_squared();
    let rhs = e.psi_md
        + e.grad_md.dot(&diff)
        + e.alpha * e.gamma_d / (4.0 * e.gamma) * dist_sq
        + 2.0 * e.m_lipschitz * dist_sq.sqrt();
    e.psi_next <= rhs
}

fn abort(rec: Recorder, x: DVector<f64>, t: usize, steps: StepSizes, error: Error) -> Aborted {
    Aborted {
        partial: Box::new(rec.finish(x, t - 1, None, Some(steps), None)),
        error: Error::Oracle {
            iteration: t,
            source: Box::new(error),
        },
    }
}

/// Plain AC-SA with step scale `gamma = min(alpha / (2L), gamma_max)`.
pub fn acsa_run(obj: &impl Objective, cfg: &SolverConfig) -> RunResult {
    let setup = || -> crate::Result<_> {
        let n = obj.matrix_dim();
        Ok((resolve_steps(cfg, obj.prox(), n)?, cfg.oracle_spec(n)?))
    };
    let (steps, spec) = setup().map_err(|error| Aborted {
        partial: Box::new(Recorder::new(1, 0, false).finish(obj.prox().center(), 0, None, None, None)),
        error,
    })?;
    let prox = obj.prox();
    let n_iter = cfg.iterations;
    let gamma = steps.gamma_min;
    let mut rec = Recorder::new(cfg.log_every(), n_iter, cfg.record_wall_time);
    let mut x = prox.center();
    let mut x_ag = x.clone();

    for t in 1..=n_iter {
        let x_md = interpolate(t, &x, &x_ag);
        let g = match obj.sampled(&x_md, &spec, t as u64) {
            Ok(g) => g,
            Err(e) => return Err(abort(rec, x_ag, t, steps, e)),
        };
        rec.charge(&g);
        let gamma_t = (t as f64 + 1.0) * gamma / 2.0;
        x = prox.prox(&x, &(&g.grad * gamma_t));
        x_ag = interpolate(t, &x, &x_ag);
        rec.gammas.push(gamma);
        if rec.due(t) {
            let obj_true = match obj.true_objective(&x_ag) {
                Ok(v) => v,
                Err(e) => return Err(abort(rec, x_ag, t, steps, e)),
            };
            rec.log(t, obj_true, g.value, gamma);
        }
    }
    let bound = acsa_expected_bound(obj.matrix_dim(), cfg.eps, cfg.k, steps.diameter, cfg.q, n_iter).ok();
    Ok(rec.finish(x_ag, n_iter, None, Some(steps), bound))
}

/// AC-SA with the monotone line search on `gamma`.
///
/// `gamma` starts at `gamma_init` (default `gamma_max`) and is multiplied by
/// `gamma_d` each time the exit test fails, never going below `gamma_min`.
/// Once `gamma_min` is reached the test is skipped for the rest of the run.
/// The test call `Psi(x^ag_{t+1}, xi_{t+1})` shares its noise with the next
/// gradient call and is reused when `x^md_{t+1}` coincides with that point.
pub fn acsa_linesearch_run(obj: &impl Objective, cfg: &SolverConfig) -> RunResult {
    let setup = || -> crate::Result<_> {
        let n = obj.matrix_dim();
        let steps = resolve_steps(cfg, obj.prox(), n)?;
        if !steps.gamma_init.is_finite() {
            return Err(Error::invalid("gamma_max: line search needs a finite starting scale"));
        }
        Ok((steps, cfg.oracle_spec(n)?))
    };
    let (steps, spec) = setup().map_err(|error| Aborted {
        partial: Box::new(Recorder::new(1, 0, false).finish(obj.prox().center(), 0, None, None, None)),
        error,
    })?;
    let prox = obj.prox();
    let n_iter = cfg.iterations;
    let mut rec = Recorder::new(cfg.log_every(), n_iter, cfg.record_wall_time);
    let mut x = prox.center();
    let mut x_ag = x.clone();
    let mut gamma = steps.gamma_init;
    let mut t_gamma = (gamma <= steps.gamma_min).then_some(0);
    let mut cached: Option<(DVector<f64>, OracleOutput)> = None;

    for t in 1..=n_iter {
        let x_md = interpolate(t, &x, &x_ag);
        let g = match cached.take() {
            Some((point, out)) if point == x_md => out,
            _ => match obj.sampled(&x_md, &spec, t as u64) {
                Ok(g) => {
                    rec.charge(&g);
                    g
                }
                Err(e) => return Err(abort(rec, x_ag, t, steps, e)),
            },
        };
        let (x_next, ag_next) = loop {
            let gamma_t = (t as f64 + 1.0) * gamma / 2.0;
            let x_next = prox.prox(&x, &(&g.grad * gamma_t));
            let ag_next = interpolate(t, &x_next, &x_ag);
            if gamma <= steps.gamma_min {
                break (x_next, ag_next);
            }
            let check = match obj.sampled(&ag_next, &spec, t as u64 + 1) {
                Ok(c) => c,
                Err(e) => return Err(abort(rec, x_ag, t, steps, e)),
            };
            rec.charge(&check);
            let accept = line_search_exit(&super::ExitTest {
                psi_next: check.value,
                psi_md: g.value,
                grad_md: &g.grad,
                x_ag_next: &ag_next,
                x_md: &x_md,
                alpha: steps.alpha,
                gamma,
                gamma_d: cfg.gamma_d,
                m_lipschitz: steps.m_lipschitz,
            });
            if accept {
                cached = Some((ag_next.clone(), check));
                break (x_next, ag_next);
            }
            gamma = (gamma * cfg.gamma_d).max(steps.gamma_min);
        };
        x = x_next;
        x_ag = ag_next;
        rec.gammas.push(gamma);
        if gamma <= steps.gamma_min && t_gamma.is_none() {
            t_gamma = Some(t - 1);
        }
        if rec.due(t) {
            let obj_true = match obj.true_objective(&x_ag) {
                Ok(v) => v,
                Err(e) => return Err(abort(rec, x_ag, t, steps, e)),
            };
            rec.log(t, obj_true, g.value, gamma);
        }
    }
    let bound = linesearch_coarse_bound(&steps, n_iter, t_gamma.unwrap_or(n_iter));
    Ok(rec.finish(x_ag, n_iter, t_gamma, Some(steps), Some(bound)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_test(l: f64, gamma: f64, gamma_d: f64, md: f64, ag: f64) -> bool {
        let f = |x: f64| 0.5 * l * x * x;
        let g = DVector::from_element(1, l * md);
        let (xm, xa) = (DVector::from_element(1, md), DVector::from_element(1, ag));
        line_search_exit(&ExitTest {
            psi_next: f(ag),
            psi_md: f(md),
            grad_md: &g,
            x_ag_next: &xa,
            x_md: &xm,
            alpha: 1.0,
            gamma,
            gamma_d,
            m_lipschitz: 0.0,
        })
    }

    #[test]
    fn affine_always_exits() {
        let g = DVector::from_vec(vec![1.0, -2.0]);
        let md = DVector::from_vec(vec![0.3, 0.1]);
        let ag = DVector::from_vec(vec![-5.0, 4.0]);
        let f = |x: &DVector<f64>| 3.0 + g.dot(x);
        for gamma in [1e-6, 1.0, 1e6] {
            assert!(line_search_exit(&ExitTest {
                psi_next: f(&ag),
                psi_md: f(&md),
                grad_md: &g,
                x_ag_next: &ag,
                x_md: &md,
                alpha: 1.0,
                gamma,
                gamma_d: 0.5,
                m_lipschitz: 0.0,
            }));
        }
    }

    #[test]
    fn quadratic_threshold() {
        let (l, gd) = (4.0, 0.5);
        let thr = gd / (2.0 * l);
        assert!(quad_test(l, thr, gd, 1.0, 0.2));
        assert!(quad_test(l, 0.3 * thr, gd, -2.0, 0.7));
        // a gradient step with a large scale overshoots the model
        let gamma = 10.0 * gd / l;
        assert!(!quad_test(l, gamma, gd, 1.0, 1.0 - gamma * l));
    }
}
