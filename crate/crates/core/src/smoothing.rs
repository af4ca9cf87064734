//! Rank-one Gaussian smoothing of the maximum eigenvalue.
//!
//! `F_k(X) = E[max_{i<=k} lambda_max(X + (eps/n) z_i z_i^T)]` with `z_i`
//! standard Gaussian. One realization of the inner maximum is an
//! [`OracleSample`]; its gradient is the rank-one projector onto the winning
//! perturbed eigenvector. Averaging `q` of those gives a [`GradientEstimate`]
//! with unit trace and variance at most `1/q`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derived;
use crate::spectral::{
    lanczos_leading, rank_one_leading, LanczosOptions, RankOneUpdate, SpectralDecomp, SymMatrix,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub eps: f64,
    pub k: usize,
    pub n: usize,
}

impl SmoothingParams {
    pub fn new(eps: f64, k: usize, n: usize) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("eps must be finite and >= 0, got {eps}")));
        }
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if n == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(Self { eps, k, n })
    }

    /// Perturbation scale `eps / n`.
    pub fn scale(&self) -> f64 {
        self.eps / self.n as f64
    }
}

/// How the perturbed leading eigenpairs are computed.
#[derive(Clone, Copy, Debug)]
pub enum EigenPath<'a> {
    /// Closed-form secular updates of a known decomposition of `X`.
    Secular(&'a SpectralDecomp),
    /// Lanczos on `X + (eps/n) z z^T`, applied as a rank-one operator.
    Lanczos(&'a SymMatrix, LanczosOptions),
}

impl EigenPath<'_> {
    pub fn dim(&self) -> usize {
        match self {
            EigenPath::Secular(d) => d.dim(),
            EigenPath::Lanczos(x, _) => x.dim(),
        }
    }
}

/// One realization of the random function inside `F_k`.
#[derive(Clone, Debug)]
pub struct OracleSample {
    pub value: f64,
    /// Index of the winning perturbation, lowest index on ties.
    pub i0: usize,
    /// Unit leading eigenvector of `X + (eps/n) z_{i0} z_{i0}^T`.
    pub vector: DVector<f64>,
    /// `(eps/n) max_i w_i` where `w_i` is the weight of `z_i` on the leading
    /// eigenspace of `X`; a lower bound on `value - lambda_max(X)`.
    /// Only available on the secular path.
    pub gap_witness: Option<f64>,
    pub cost_eigvecs: f64,
    pub matvecs: usize,
    /// The winning perturbation had no weight on the leading eigenspace.
    pub degenerate: bool,
}

pub fn draw_noise<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<DVector<f64>> {
    (0..k)
        .map(|_| DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

/// Evaluates the inner maximum at fixed noise. `rng` only feeds Lanczos start vectors.
pub fn evaluate_fk<R: Rng + ?Sized>(
    path: &EigenPath<'_>,
    params: &SmoothingParams,
    noise: &[DVector<f64>],
    rng: &mut R,
) -> Result<OracleSample> {
    if noise.is_empty() {
        return Err(Error::invalid("at least one perturbation is required"));
    }
    let n = path.dim();
    if n != params.n {
        return Err(Error::DimensionMismatch {
            expected: params.n,
            got: n,
        });
    }
    let scale = params.scale();
    let mut best: Option<OracleSample> = None;
    let mut cost = 0.0;
    let mut matvecs = 0;
    let mut witness = 0.0f64;
    for (i, z) in noise.iter().enumerate() {
        if z.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: z.len(),
            });
        }
        let (value, vector, degenerate) = match path {
            EigenPath::Secular(decomp) if scale == 0.0 => {
                cost += 1.0;
                (decomp.lambda_max(), decomp.vector(0), false)
            }
            EigenPath::Secular(decomp) => {
                let lead = rank_one_leading(decomp, z, scale)?;
                let y = decomp.coords(z);
                let l1 = decomp.lambda_max();
                let w1: f64 = decomp
                    .values
                    .iter()
                    .zip(y.iter())
                    .filter(|(l, _)| **l == l1)
                    .map(|(_, c)| c * c)
                    .sum();
                witness = witness.max(scale * w1);
                cost += lead.pair.cost_eigvecs;
                (lead.pair.value, lead.pair.vector, lead.root.degenerate)
            }
            EigenPath::Lanczos(x, opts) => {
                let op = RankOneUpdate {
                    base: x,
                    v: z,
                    scale,
                };
                let pair = lanczos_leading(&op, opts, rng)?;
                cost += pair.cost_eigvecs;
                matvecs += pair.matvecs;
                (pair.value, pair.vector, false)
            }
        };
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(OracleSample {
                value,
                i0: i,
                vector,
                gap_witness: None,
                cost_eigvecs: 0.0,
                matvecs: 0,
                degenerate,
            });
        }
    }
    let mut sample = best.expect("noise is non-empty");
    sample.cost_eigvecs = cost;
    sample.matvecs = matvecs;
    if matches!(path, EigenPath::Secular(_)) {
        sample.gap_witness = Some(witness);
    }
    Ok(sample)
}

/// Draws `k` perturbations from `rng` and evaluates the inner maximum.
pub fn sample_fk<R: Rng + ?Sized>(
    path: &EigenPath<'_>,
    params: &SmoothingParams,
    rng: &mut R,
) -> Result<OracleSample> {
    let noise = draw_noise(params.n, params.k, rng);
    evaluate_fk(path, params, &noise, rng)
}

/// Average of `q` rank-one projectors, kept as the list of eigenvectors.
#[derive(Clone, Debug)]
pub struct GradientEstimate {
    pub vectors: Vec<DVector<f64>>,
    pub values: Vec<f64>,
    pub cost_eigvecs: f64,
    pub matvecs: usize,
}

impl GradientEstimate {
    pub fn q(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.len())
    }

    /// `(1/q) sum_l phi_l phi_l^T`, accumulated in sample order.
    pub fn dense(&self) -> SymMatrix {
        let n = self.dim();
        let mut acc = SymMatrix::zeros(n);
        let w = 1.0 / self.q() as f64;
        for v in &self.vectors {
            acc.add_rank_one_mut(v, w);
        }
        acc
    }

    /// Diagonal of [`Self::dense`] without forming it.
    pub fn diagonal(&self) -> DVector<f64> {
        let w = 1.0 / self.q() as f64;
        let mut d = DVector::zeros(self.dim());
        for v in &self.vectors {
            d += v.component_mul(v) * w;
        }
        d
    }

    pub fn trace(&self) -> f64 {
        self.vectors.iter().map(|v| v.norm_squared()).sum::<f64>() / self.q() as f64
    }

    /// `<G, Y>` in the Frobenius inner product.
    pub fn inner(&self, y: &SymMatrix) -> f64 {
        self.vectors.iter().map(|v| y.quad_form(v)).sum::<f64>() / self.q() as f64
    }

    pub fn mean_value(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Averages `q` independent samples. Sample `l` draws from the stream
/// `(seed, call, l)`, so the result does not depend on thread scheduling.
pub fn gradient_oracle(
    path: &EigenPath<'_>,
    params: &SmoothingParams,
    q: usize,
    seed: u64,
    call: u64,
) -> Result<GradientEstimate> {
    if q == 0 {
        return Err(Error::invalid("q must be at least 1"));
    }
    let samples: Vec<OracleSample> = (0..q)
        .into_par_iter()
        .map(|l| sample_fk(path, params, &mut derived(seed, &[call, l as u64])))
        .collect::<Result<_>>()?;
    let mut est = GradientEstimate {
        vectors: Vec::with_capacity(q),
        values: Vec::with_capacity(q),
        cost_eigvecs: 0.0,
        matvecs: 0,
    };
    for s in samples {
        est.cost_eigvecs += s.cost_eigvecs;
        est.matvecs += s.matvecs;
        est.values.push(s.value);
        est.vectors.push(s.vector);
    }
    Ok(est)
}

/// Envelope `(eps/n, k eps)` for `F_k - lambda_max`.
pub fn approximation_bounds(params: &SmoothingParams) -> (f64, f64) {
    (params.scale(), params.k as f64 * params.eps)
}

/// `C_k = k / (k - 2)`, finite only for `k >= 3`.
pub fn lipschitz_factor(k: usize) -> Result<f64> {
    if k < 3 {
        return Err(Error::UnsupportedK(k));
    }
    Ok(k as f64 / (k as f64 - 2.0))
}

/// Gradient Lipschitz bound `C_k n / eps`.
pub fn lipschitz_bound(params: &SmoothingParams) -> Result<f64> {
    if params.eps <= 0.0 {
        return Err(Error::invalid("Lipschitz bound needs eps > 0"));
    }
    Ok(lipschitz_factor(params.k)? * params.n as f64 / params.eps)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / m).sqrt(),
            count: xs.len(),
        }
    }
}

/// Monte Carlo `E[1 / max_i z_i^2]` over `k` scalar standard normals.
pub fn inverse_max_square_mc<R: Rng + ?Sized>(k: usize, draws: usize, rng: &mut R) -> MeanEstimate {
    let xs: Vec<f64> = (0..draws)
        .map(|_| {
            let m = (0..k)
                .map(|_| rng.sample::<f64, _>(StandardNormal).powi(2))
                .fold(0.0, f64::max);
            1.0 / m
        })
        .collect();
    MeanEstimate::from_samples(&xs)
}

/// Monte Carlo `c_k = E[max_i ||z_i||^2 / n]`.
pub fn estimate_ck<R: Rng + ?Sized>(k: usize, n: usize, draws: usize, rng: &mut R) -> MeanEstimate {
    let xs: Vec<f64> = (0..draws)
        .map(|_| {
            draw_noise(n, k, rng)
                .iter()
                .map(|z| z.norm_squared() / n as f64)
                .fold(0.0, f64::max)
        })
        .collect();
    MeanEstimate::from_samples(&xs)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VarianceProbe {
    /// Empirical `E ||phi phi^T - mean||_F^2`.
    pub variance: f64,
    pub std_error: f64,
    /// Largest per-sample squared deviation.
    pub max_sq_deviation: f64,
    pub trials: usize,
    /// `variance <= 1 + 3 std_error`.
    pub within_bound: bool,
    /// Every per-sample squared deviation is at most 4.
    pub light_tail: bool,
}

/// Empirical variance of single-sample gradients around their mean.
pub fn gradient_variance_probe(
    path: &EigenPath<'_>,
    params: &SmoothingParams,
    trials: usize,
    seed: u64,
) -> Result<VarianceProbe> {
    if trials < 100 {
        return Err(Error::invalid(format!("variance probe needs >= 100 trials, got {trials}")));
    }
    let est = gradient_oracle(path, params, trials, seed, 0)?;
    let mean = est.dense();
    let mean_sq = mean.frobenius_norm().powi(2);
    // ||phi phi^T - M||^2 = ||phi||^4 - 2 phi^T M phi + ||M||^2
    let devs: Vec<f64> = est
        .vectors
        .iter()
        .map(|v| v.norm_squared().powi(2) - 2.0 * mean.quad_form(v) + mean_sq)
        .collect();
    let stats = MeanEstimate::from_samples(&devs);
    let max_sq_deviation = devs.iter().copied().fold(0.0, f64::max);
    Ok(VarianceProbe {
        variance: stats.mean,
        std_error: stats.std_error,
        max_sq_deviation,
        trials,
        within_bound: stats.mean <= 1.0 + 3.0 * stats.std_error,
        light_tail: max_sq_deviation <= 4.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::spectral::full_eig;
    use approx::assert_relative_eq;

    #[test]
    fn zero_matrix_sample_is_max_norm() {
        let n = 6;
        let d = full_eig(&SymMatrix::zeros(n)).unwrap();
        let params = SmoothingParams::new(0.3, 3, n).unwrap();
        let noise = draw_noise(n, 3, &mut seeded(4));
        let s = evaluate_fk(&EigenPath::Secular(&d), &params, &noise, &mut seeded(0)).unwrap();
        let norms: Vec<f64> = noise.iter().map(|z| z.norm_squared()).collect();
        let top = norms.iter().copied().fold(0.0, f64::max);
        assert_relative_eq!(s.value, params.scale() * top, max_relative = 1e-13);
        assert_eq!(norms[s.i0], top);
        let z = noise[s.i0].normalize();
        assert_relative_eq!(s.vector.dot(&z).abs(), 1.0, epsilon = 1e-12);
        assert_eq!(s.cost_eigvecs, 3.0);
    }

    #[test]
    fn paths_agree() {
        let n = 12;
        let x = SymMatrix::from_fn(n, |i, j| ((i * 7 + j * 3) % 5) as f64 / 5.0 - 0.4).unwrap();
        let d = full_eig(&x).unwrap();
        let params = SmoothingParams::new(0.5, 3, n).unwrap();
        let noise = draw_noise(n, 3, &mut seeded(9));
        let a = evaluate_fk(&EigenPath::Secular(&d), &params, &noise, &mut seeded(1)).unwrap();
        let opts = LanczosOptions::with_tol(1e-12);
        let b = evaluate_fk(&EigenPath::Lanczos(&x, opts), &params, &noise, &mut seeded(1)).unwrap();
        assert_eq!(a.i0, b.i0);
        assert_relative_eq!(a.value, b.value, max_relative = 1e-10);
        assert!((a.vector - b.vector).amax() < 1e-8);
        assert!(b.matvecs > 0 && b.gap_witness.is_none());
    }

    #[test]
    fn oracle_is_unit_trace_and_reproducible() {
        let n = 10;
        let d = full_eig(&SymMatrix::from_diagonal(&[1.0, 0.5, 0.0, 0.0, -1.0, 2.0, 0.1, 0.2, 0.3, 0.4])).unwrap();
        let params = SmoothingParams::new(0.2, 3, n).unwrap();
        let path = EigenPath::Secular(&d);
        let g1 = gradient_oracle(&path, &params, 7, 11, 3).unwrap();
        let g2 = gradient_oracle(&path, &params, 7, 11, 3).unwrap();
        assert!((g1.trace() - 1.0).abs() < 1e-12);
        assert!((g1.dense().trace() - 1.0).abs() < 1e-12);
        assert_eq!(g1.dense(), g2.dense());
        assert_eq!(g1.cost_eigvecs, 21.0);
        assert!((g1.diagonal() - g1.dense().diagonal()).amax() < 1e-15);
    }

    #[test]
    fn bounds_arithmetic() {
        let p = SmoothingParams::new(0.05, 3, 1000).unwrap();
        let (lo, hi) = approximation_bounds(&p);
        assert_relative_eq!(lo, 5e-5);
        assert_relative_eq!(hi, 0.15, epsilon = 1e-15);
        assert_eq!(approximation_bounds(&SmoothingParams::new(0.0, 3, 10).unwrap()), (0.0, 0.0));
        assert_relative_eq!(lipschitz_bound(&p).unwrap(), 60000.0, max_relative = 1e-12);
        let p = SmoothingParams::new(1.0, 4, 100).unwrap();
        assert_relative_eq!(lipschitz_bound(&p).unwrap(), 200.0);
        assert!(matches!(lipschitz_factor(2), Err(Error::UnsupportedK(2))));
    }

    #[test]
    fn gap_witness_bounds_the_shift() {
        let n = 8;
        let x = SymMatrix::from_fn(n, |i, j| (i as f64 - j as f64).cos()).unwrap();
        let d = full_eig(&x).unwrap();
        let params = SmoothingParams::new(0.1, 3, n).unwrap();
        let mut rng = seeded(2);
        for _ in 0..50 {
            let s = sample_fk(&EigenPath::Secular(&d), &params, &mut rng).unwrap();
            assert!(s.value - d.lambda_max() >= s.gap_witness.unwrap() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn probe_rejects_few_trials() {
        let d = full_eig(&SymMatrix::zeros(3)).unwrap();
        let params = SmoothingParams::new(0.1, 3, 3).unwrap();
        assert!(gradient_variance_probe(&EigenPath::Secular(&d), &params, 10, 0).is_err());
    }
}
