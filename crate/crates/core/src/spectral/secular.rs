//! Rank-one updates of a decomposed symmetric matrix.
//!
//! For `X = V diag(lambda) V^T` and `y = V^T v`, the top eigenvalue of
//! `X + scale * v v^T` is `lambda_1 + t*` where `t*` is the unique positive
//! root of
//!
//! ```text
//! s(t) = 1/scale - sum_i y_i^2 / (lambda_1 - lambda_i + t)
//! ```
//!
//! `s` is increasing and concave on `(0, inf)`, so Newton started from the
//! left end of the bracket `[scale * w_1, scale * sum_i y_i^2]` (with `w_1`
//! the weight on the leading eigenspace) climbs monotonically to the root.

use nalgebra::DVector;

use super::decomp::{canonical_sign, EigPair, SpectralDecomp};
use crate::error::{Error, Result};

/// Coordinates with weight below this fraction of the total are deflated.
pub const DEFLATION_RATIO: f64 = 1e-14;

const MAX_ITERS: usize = 200;

#[derive(Clone, Debug)]
pub struct SecularProblem {
    /// Eigenvalues of `X`, decreasing.
    pub lambdas: Vec<f64>,
    /// Squared eigenbasis coordinates of the update vector.
    pub weights: Vec<f64>,
    /// Update scale, `eps / n` for the smoothing oracle.
    pub scale: f64,
}

impl SecularProblem {
    pub fn new(lambdas: Vec<f64>, weights: Vec<f64>, scale: f64) -> Result<Self> {
        if lambdas.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: lambdas.len(),
                got: weights.len(),
            });
        }
        if lambdas.is_empty() {
            return Err(Error::invalid("empty secular problem"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {scale}")));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::invalid("eigenvalues must be finite"));
        }
        if lambdas.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("eigenvalues must be in decreasing order"));
        }
        Ok(Self {
            lambdas,
            weights,
            scale,
        })
    }

    /// Problem for `X + scale * v v^T` given the decomposition of `X`.
    pub fn from_decomp(decomp: &SpectralDecomp, v: &DVector<f64>, scale: f64) -> Result<Self> {
        let y = decomp.coords(v);
        Self::new(
            decomp.values.clone(),
            y.iter().map(|c| c * c).collect(),
            scale,
        )
    }

    /// `s(t)` including every coordinate (no deflation).
    pub fn eval(&self, t: f64) -> f64 {
        let l1 = self.lambdas[0];
        1.0 / self.scale
            - self
                .lambdas
                .iter()
                .zip(&self.weights)
                .map(|(l, w)| w / (l1 - l + t))
                .sum::<f64>()
    }

    /// Total weight on coordinates whose eigenvalue equals `lambda_1`.
    pub fn leading_weight(&self) -> f64 {
        let l1 = self.lambdas[0];
        self.lambdas
            .iter()
            .zip(&self.weights)
            .filter(|(l, _)| **l == l1)
            .map(|(_, w)| w)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecularRoot {
    /// Shift of the top eigenvalue, `lambda_max(X + scale v v^T) - lambda_1(X) >= 0`.
    pub t: f64,
    /// Largest root of the (deflated) secular function, in the same units as `t`.
    /// Equals `t` unless `degenerate` and the root is nonpositive.
    pub root: f64,
    /// The update vector carries no weight on the leading eigenspace of `X`.
    pub degenerate: bool,
    pub iterations: usize,
}

/// Solves the secular equation by safeguarded Newton inside the analytic bracket.
pub fn secular_root(p: &SecularProblem) -> Result<SecularRoot> {
    let total: f64 = p.weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeights);
    }
    let cutoff = DEFLATION_RATIO * total;
    let l1 = p.lambdas[0];
    // (distance to lambda_1, weight) for the surviving coordinates
    let active: Vec<(f64, f64)> = p
        .lambdas
        .iter()
        .zip(&p.weights)
        .filter(|(_, &w)| w >= cutoff)
        .map(|(l, &w)| ((l1 - l).max(0.0), w))
        .collect();
    let d_min = active
        .iter()
        .map(|a| a.0)
        .fold(f64::INFINITY, f64::min);
    let w_min: f64 = active.iter().filter(|a| a.0 == d_min).map(|a| a.1).sum();
    let w_all: f64 = active.iter().map(|a| a.1).sum();

    // Shifted variable u = t + d_min > 0; poles sit at u = -(d - d_min) <= 0.
    let shifted: Vec<(f64, f64)> = active.iter().map(|&(d, w)| (d - d_min, w)).collect();
    let inv_scale = 1.0 / p.scale;
    let f = |u: f64| -> (f64, f64) {
        let mut s = 0.0;
        let mut ds = 0.0;
        for &(e, w) in &shifted {
            let r = 1.0 / (e + u);
            s += w * r;
            ds += w * r * r;
        }
        (inv_scale - s, ds)
    };

    let mut lo = p.scale * w_min;
    let mut hi = p.scale * w_all;
    let mut u = lo;
    let mut iterations = 0;
    while iterations < MAX_ITERS {
        iterations += 1;
        let (fu, dfu) = f(u);
        if fu == 0.0 {
            break;
        }
        if fu < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let newton = u - fu / dfu;
        let next = if newton.is_finite() && newton > lo && newton <= hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - u).abs();
        u = next;
        if step <= 4.0 * f64::EPSILON * u || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }

    let root = u - d_min;
    Ok(SecularRoot {
        t: root.max(0.0),
        root,
        degenerate: d_min > 0.0,
        iterations,
    })
}

#[derive(Clone, Debug)]
pub struct RankOneLeading {
    pub pair: EigPair,
    pub root: SecularRoot,
}

/// Leading eigenpair of `X + eps_over_n * v v^T` from the decomposition of `X`.
///
/// Eigenvector coordinates in the eigenbasis are `y_j / (l_1 - lambda_j)`,
/// normalized and rotated back. Charged as one eigenvector.
pub fn rank_one_leading(
    decomp: &SpectralDecomp,
    v: &DVector<f64>,
    eps_over_n: f64,
) -> Result<RankOneLeading> {
    if v.len() != decomp.dim() {
        return Err(Error::DimensionMismatch {
            expected: decomp.dim(),
            got: v.len(),
        });
    }
    let y = decomp.coords(v);
    let problem = SecularProblem::new(
        decomp.values.clone(),
        y.iter().map(|c| c * c).collect(),
        eps_over_n,
    )?;
    let root = secular_root(&problem)?;
    let l1 = decomp.lambda_max();

    let mut vector = if root.degenerate && root.root <= 0.0 {
        // The untouched leading eigenvector of X stays on top.
        decomp.vector(0)
    } else {
        let total: f64 = problem.weights.iter().sum();
        let cutoff = DEFLATION_RATIO * total;
        let coords = DVector::from_fn(decomp.dim(), |j, _| {
            if problem.weights[j] >= cutoff {
                y[j] / ((l1 - decomp.values[j]).max(0.0) + root.root)
            } else {
                0.0
            }
        });
        decomp.from_coords(&coords)
    };
    vector.normalize_mut();
    canonical_sign(&mut vector);
    Ok(RankOneLeading {
        pair: EigPair {
            value: l1 + root.t,
            vector,
            cost_eigvecs: 1.0,
            matvecs: 0,
        },
        root,
    })
}

/// `det(X + v v^T - lambda I) = prod_i (lambda_i - lambda) (1 + sum_i y_i^2 / (lambda_i - lambda))`.
pub fn char_poly_rank_one(decomp: &SpectralDecomp, v: &DVector<f64>, lambda: f64) -> Result<f64> {
    let y = decomp.coords(v);
    let tol = f64::EPSILON * lambda.abs().max(1.0);
    let mut prod = 1.0;
    let mut sum = 1.0;
    for (i, &li) in decomp.values.iter().enumerate() {
        let d = li - lambda;
        if d.abs() <= tol {
            return Err(Error::AtPole(lambda));
        }
        prod *= d;
        sum += y[i] * y[i] / d;
    }
    Ok(prod * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{full_eig, SymMatrix};
    use approx::assert_relative_eq;

    #[test]
    fn zero_matrix_root_is_exact() {
        let v = [0.3, -1.2, 2.0, 0.7];
        let w: Vec<f64> = v.iter().map(|x| x * x).collect();
        let s = 0.125;
        let p = SecularProblem::new(vec![0.0; 4], w.clone(), s).unwrap();
        let r = secular_root(&p).unwrap();
        assert_relative_eq!(r.t, s * w.iter().sum::<f64>(), max_relative = 1e-15);
        assert!(!r.degenerate);
    }

    #[test]
    fn figure_spectrum_matches_dense() {
        let x = SymMatrix::from_diagonal(&[1.0, 0.0, -2.0, -2.0]);
        let d = full_eig(&x).unwrap();
        let v = DVector::from_element(4, 1.0);
        let r = rank_one_leading(&d, &v, 0.25).unwrap();
        let dense = full_eig(&x.add_rank_one(&v, 0.25)).unwrap();
        assert!((r.root.t - (dense.lambda_max() - 1.0)).abs() < 1e-10);
        assert!((r.pair.vector.clone() - dense.vector(0)).amax() < 1e-8);
    }

    #[test]
    fn leading_weight_lower_bound() {
        let p = SecularProblem::new(vec![2.0, 1.0, 0.0], vec![0.5, 1.0, 3.0], 0.1).unwrap();
        let r = secular_root(&p).unwrap();
        assert!(r.t >= 0.1 * 0.5);
        assert!(r.t <= 0.1 * 4.5);
        assert!(p.eval(r.t).abs() < 1e-10 * (1.0 / 0.1));
    }

    #[test]
    fn zero_weights_rejected() {
        let p = SecularProblem::new(vec![1.0, 0.0], vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(secular_root(&p), Err(Error::ZeroWeights)));
    }

    #[test]
    fn eigenvector_update_is_degenerate() {
        // v = e_2 is an eigenvector of diag(2, 1, 0): the update lifts 1 to 1.5 < 2.
        let d = full_eig(&SymMatrix::from_diagonal(&[2.0, 1.0, 0.0])).unwrap();
        let v = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let r = rank_one_leading(&d, &v, 0.5).unwrap();
        assert!(r.root.degenerate);
        assert_relative_eq!(r.root.root, -0.5, epsilon = 1e-14);
        assert_eq!(r.pair.value, 2.0);
        assert_relative_eq!(r.pair.vector[0], 1.0);

        // a large update overtakes the old leading eigenvalue
        let r = rank_one_leading(&d, &v, 3.0).unwrap();
        assert!(r.root.degenerate);
        assert_relative_eq!(r.pair.value, 4.0, epsilon = 1e-13);
        assert_relative_eq!(r.pair.vector[1], 1.0, epsilon = 1e-13);
    }

    #[test]
    fn char_poly_two_by_two() {
        let d = full_eig(&SymMatrix::from_diagonal(&[1.0, 0.0])).unwrap();
        let v = DVector::from_vec(vec![1.0, 1.0]);
        assert_relative_eq!(char_poly_rank_one(&d, &v, 2.0).unwrap(), -1.0, epsilon = 1e-15);
        assert!(matches!(
            char_poly_rank_one(&d, &v, 1.0),
            Err(Error::AtPole(_))
        ));
    }

    #[test]
    fn char_poly_zero_vector() {
        let d = full_eig(&SymMatrix::from_diagonal(&[3.0, -1.0, 0.5])).unwrap();
        let v = DVector::zeros(3);
        let got = char_poly_rank_one(&d, &v, 0.25).unwrap();
        assert_relative_eq!(got, (3.0 - 0.25) * (-1.0 - 0.25) * (0.5 - 0.25), epsilon = 1e-15);
    }
}
