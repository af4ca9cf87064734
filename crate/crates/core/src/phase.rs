//! Rank-one phase transition of the top eigenvalue.
//!
//! For `X` with spectrum `lambda_1 = ... = lambda_l > lambda_{l+1} >= ...`, the
//! shift `T = lambda_max(X + (eps/n) z z^T) - lambda_max(X)` behaves like
//! `W/n` below the critical scale `eps_0`, `W/sqrt(n)` at it, and
//! `t_0 + W/sqrt(n)` above it.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derived;
use crate::spectral::{parse_row, secular_root, SecularProblem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumModel {
    /// Decreasing eigenvalues.
    pub lambdas: Vec<f64>,
    /// Multiplicity of `lambda_1`.
    pub l: usize,
    /// `lambda_1 - lambda_{l+1}`.
    pub gamma_gap: f64,
    /// `lambda_1 - lambda_i - gamma_gap` for `i > l`.
    pub deltas: Vec<f64>,
}

impl SpectrumModel {
    /// Sorts `lambdas` decreasingly; entries within `1e-12 (1 + |lambda_1|)`
    /// of the top count towards its multiplicity.
    pub fn new(mut lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.len() < 2 {
            return Err(Error::invalid("spectrum needs at least two eigenvalues"));
        }
        if let Some(i) = lambdas.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFinite(i, i));
        }
        lambdas.sort_by(|a, b| b.total_cmp(a));
        let top = lambdas[0];
        let tol = 1e-12 * (1.0 + top.abs());
        let l = lambdas.iter().take_while(|&&v| top - v <= tol).count();
        if l == lambdas.len() {
            return Err(Error::invalid("spectrum has no gap below lambda_1"));
        }
        for v in &mut lambdas[..l] {
            *v = top;
        }
        let gamma_gap = top - lambdas[l];
        let deltas = lambdas[l..].iter().map(|v| top - v - gamma_gap).collect();
        Ok(Self {
            lambdas,
            l,
            gamma_gap,
            deltas,
        })
    }

    /// `lambda_1 = 0` with multiplicity `l`, every other eigenvalue at `-gamma`.
    pub fn equal_gap(n: usize, l: usize, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || l == 0 || l >= n {
            return Err(Error::invalid(format!(
                "equal-gap model needs gamma > 0 and 1 <= l < n, got gamma={gamma}, l={l}, n={n}"
            )));
        }
        Self::new((0..n).map(|i| if i < l { 0.0 } else { -gamma }).collect())
    }

    /// Gaps `gamma + spread * j / (n - l - 1)` for the non-leading eigenvalues.
    pub fn linear_gap(n: usize, l: usize, gamma: f64, spread: f64) -> Result<Self> {
        if !(gamma > 0.0 && spread >= 0.0) || l == 0 || l >= n {
            return Err(Error::invalid(format!(
                "linear-gap model needs gamma > 0, spread >= 0 and 1 <= l < n, got {gamma}, {spread}, {l}, {n}"
            )));
        }
        let m = (n - l - 1).max(1) as f64;
        Self::new(
            (0..n)
                .map(|i| if i < l { 0.0 } else { -gamma - spread * (i - l) as f64 / m })
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    fn gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.deltas.iter().map(move |d| self.gamma_gap + d)
    }

    /// `(1/n) sum_{j>l} 1 / (t + gamma + delta_j)`.
    pub fn g(&self, t: f64) -> f64 {
        self.gaps().map(|d| 1.0 / (t + d)).sum::<f64>() / self.n() as f64
    }
}

/// Reads whitespace-separated eigenvalues; `#` starts a comment.
pub fn parse_spectrum(text: &str) -> Result<SpectrumModel> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if !line.is_empty() {
            values.extend(parse_row(line, i + 1)?);
        }
    }
    SpectrumModel::new(values)
}

pub fn load_spectrum(path: impl AsRef<Path>) -> Result<SpectrumModel> {
    parse_spectrum(&std::fs::read_to_string(path)?)
}

/// `1 / eps_0 = (1/n) sum_{j>l} 1 / (gamma + delta_j)`.
pub fn eps_critical(model: &SpectrumModel) -> f64 {
    1.0 / model.g(0.0)
}

/// Positive root of `1/eps = g(t_0)`; requires `eps > eps_0`.
pub fn t0_solve(model: &SpectrumModel, eps: f64) -> Result<f64> {
    let eps0 = eps_critical(model);
    if !(eps > eps0) || !eps.is_finite() {
        return Err(Error::NotSupercritical { eps, eps0 });
    }
    let target = 1.0 / eps;
    let (mut lo, mut hi) = (0.0, (1.0 - model.l as f64 / model.n() as f64) * eps);
    // g is decreasing with g(lo) > target >= g(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if model.g(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1e-300) {
            break;
        }
    }
    let t0 = 0.5 * (lo + hi);
    assert!(t0 <= (1.0 - model.l as f64 / model.n() as f64) * eps);
    Ok(t0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Sub,
    Critical,
    Super,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Sub => "sub",
            Regime::Critical => "critical",
            Regime::Super => "super",
        }
    }
}

/// Regime, critical scales and the leading-order law of `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePrediction {
    pub n: usize,
    pub eps: f64,
    pub eps0: f64,
    pub t0: Option<f64>,
    pub regime: Regime,
    /// Exponent of `n` in the fluctuation term: -1, -1/2 or -1/2 around `t_0`.
    pub predicted_order: f64,
    pub l: usize,
    #[serde(skip)]
    gaps: Vec<f64>,
}

/// `eps` within `1e-9 eps_0` of `eps_0` counts as critical.
pub fn classify_regime(model: &SpectrumModel, eps: f64) -> Result<PhasePrediction> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let eps0 = eps_critical(model);
    let (regime, t0, order) = if (eps - eps0).abs() <= 1e-9 * eps0 {
        (Regime::Critical, None, -0.5)
    } else if eps < eps0 {
        (Regime::Sub, None, -1.0)
    } else {
        (Regime::Super, Some(t0_solve(model, eps)?), -0.5)
    };
    Ok(PhasePrediction {
        n: model.n(),
        eps,
        eps0,
        t0,
        regime,
        predicted_order: order,
        l: model.l,
        gaps: model.gaps().collect(),
    })
}

impl PhasePrediction {
    /// `chi^2_l` from eigenbasis coordinates `z`.
    pub fn chi2(&self, z: &[f64]) -> f64 {
        z[..self.l].iter().map(|v| v * v).sum()
    }

    /// `(1/sqrt n) sum_{j>l} (z_j^2 - 1) / (t + gamma + delta_j)`.
    pub fn xi(&self, z: &[f64], t: f64) -> f64 {
        let s: f64 = z[self.l..]
            .iter()
            .zip(&self.gaps)
            .map(|(v, d)| (v * v - 1.0) / (t + d))
            .sum();
        s / (self.n as f64).sqrt()
    }

    /// `(1/n) sum_{j>l} z_j^2 / (gamma + delta_j)^2`.
    pub fn zeta1(&self, z: &[f64]) -> f64 {
        let s: f64 = z[self.l..]
            .iter()
            .zip(&self.gaps)
            .map(|(v, d)| v * v / (d * d))
            .sum();
        s / self.n as f64
    }

    /// `(1/n) sum_{j>l} 1 / (t + gamma + delta_j)^2`.
    pub fn zeta(&self, t: f64) -> f64 {
        self.gaps.iter().map(|d| 1.0 / ((t + d) * (t + d))).sum::<f64>() / self.n as f64
    }

    /// Leading random constant `W_1` for the noise `z`.
    pub fn w1(&self, z: &[f64]) -> f64 {
        match self.regime {
            Regime::Sub => self.chi2(z) / (1.0 / self.eps - 1.0 / self.eps0),
            Regime::Critical => {
                let xi = self.xi(z, 0.0);
                let zeta = self.zeta1(z);
                (xi + (xi * xi + 4.0 * self.chi2(z) * zeta).sqrt()) / (2.0 * zeta)
            }
            Regime::Super => {
                let t0 = self.t0.unwrap_or(0.0);
                self.xi(z, t0) / self.zeta(t0)
            }
        }
    }

    /// Second-order constant `W_2` of the sub-critical expansion.
    pub fn w2(&self, z: &[f64]) -> Option<f64> {
        (self.regime == Regime::Sub)
            .then(|| self.w1(z) * self.xi(z, 0.0) / (1.0 / self.eps - 1.0 / self.eps0))
    }

    /// Leading-order prediction of `T`.
    pub fn predicted_shift(&self, z: &[f64]) -> f64 {
        let n = self.n as f64;
        match self.regime {
            Regime::Sub => self.w1(z) / n,
            Regime::Critical => self.w1(z) / n.sqrt(),
            Regime::Super => self.t0.unwrap_or(0.0) + self.w1(z) / n.sqrt(),
        }
    }

    /// Centering subtracted before taking the scaling statistic.
    pub fn center(&self) -> f64 {
        self.t0.unwrap_or(0.0)
    }
}

/// Top-eigenvalue shift `T` of `diag(lambdas) + (eps/n) z z^T`.
pub fn sample_shift(model: &SpectrumModel, eps: f64, z: &[f64]) -> Result<f64> {
    let p = SecularProblem::new(
        model.lambdas.clone(),
        z.iter().map(|v| v * v).collect(),
        eps / model.n() as f64,
    )?;
    Ok(secular_root(&p)?.t)
}

/// Family of spectra indexed by dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumFamily {
    EqualGap { gamma: f64, l: usize },
    LinearGap { gamma: f64, spread: f64, l: usize },
    Fixed { model: SpectrumModel },
}

impl SpectrumFamily {
    pub fn model(&self, n: usize) -> Result<SpectrumModel> {
        match self {
            SpectrumFamily::EqualGap { gamma, l } => SpectrumModel::equal_gap(n, *l, *gamma),
            SpectrumFamily::LinearGap { gamma, spread, l } => {
                SpectrumModel::linear_gap(n, *l, *gamma, *spread)
            }
            SpectrumFamily::Fixed { model } if model.n() == n => Ok(model.clone()),
            SpectrumFamily::Fixed { model } => Err(Error::DimensionMismatch {
                expected: model.n(),
                got: n,
            }),
        }
    }
}

/// How `eps` is chosen at each `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum EpsRule {
    Fixed(f64),
    /// `eps = factor * eps_0(n)`.
    RelativeToCritical(f64),
}

impl EpsRule {
    pub fn eps(&self, model: &SpectrumModel) -> f64 {
        match *self {
            EpsRule::Fixed(e) => e,
            EpsRule::RelativeToCritical(f) => f * eps_critical(model),
        }
    }
}

/// Monte Carlo summary at one dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub prediction: PhasePrediction,
    pub trials: usize,
    pub median_t: f64,
    /// Median of `|T - t_0|` above the critical scale, of `T` otherwise.
    pub statistic: f64,
    /// `1.2533 (IQR / 1.349) / sqrt(trials)` for `statistic`.
    pub statistic_se: f64,
    /// Same standard error formula applied to `T` itself.
    pub median_t_se: f64,
    /// Median of `n^{-order} (T - t_0)`.
    pub normalized_median: f64,
    /// Median of `W_1` over the same draws.
    pub w1_median: f64,
    /// Samples violating `T >= (eps/n) chi^2_l`.
    pub gap_lb_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<GapRow>,
    /// Least-squares slope of `log statistic` on `log n`.
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Linear-interpolation quantile of an unsorted sample.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    }
}

/// Normal-theory standard error of a sample median, with the IQR as scale.
pub fn median_std_error(xs: &[f64]) -> f64 {
    let iqr = quantile(xs, 0.75) - quantile(xs, 0.25);
    1.2533 * (iqr / 1.349) / (xs.len() as f64).sqrt()
}

/// Ordinary least squares `y = a + b x`, returning `(b, a, se(b))`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let se = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a1, b1)| (b1 - a - b * a1).powi(2)).sum();
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (b, a, se)
}

/// Samples `T` at every `n` and regresses the scaling statistic on `n`.
///
/// Trial `i` at dimension `n` draws `z` from stream `(seed, n, i)`.
pub fn monte_carlo_gap(
    family: &SpectrumFamily,
    n_list: &[usize],
    rule: EpsRule,
    trials: usize,
    seed: u64,
) -> Result<ScalingReport> {
    if trials < 200 {
        return Err(Error::invalid(format!("trials must be at least 200, got {trials}")));
    }
    if n_list.is_empty() {
        return Err(Error::invalid("n_list is empty"));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let model = family.model(n)?;
        let eps = rule.eps(&model);
        let pred = classify_regime(&model, eps)?;
        let scale = eps / n as f64;
        let draws: Vec<(f64, f64, bool)> = (0..trials)
            .into_par_iter()
            .map(|i| -> Result<(f64, f64, bool)> {
                let mut rng = derived(seed, &[n as u64, i as u64]);
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let t = sample_shift(&model, eps, &z)?;
                let lb = scale * pred.chi2(&z);
                Ok((t, pred.w1(&z), t < lb * (1.0 - 1e-12)))
            })
            .collect::<Result<_>>()?;
        let ts: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let w1s: Vec<f64> = draws.iter().map(|d| d.1).collect();
        let centered: Vec<f64> = ts.iter().map(|t| t - pred.center()).collect();
        let stat_sample: Vec<f64> = match pred.regime {
            Regime::Super => centered.iter().map(|c| c.abs()).collect(),
            _ => ts.clone(),
        };
        let norm = (n as f64).powf(-pred.predicted_order);
        let normalized: Vec<f64> = centered.iter().map(|c| c * norm).collect();
        rows.push(GapRow {
            trials,
            median_t: median(&ts),
            statistic: median(&stat_sample),
            statistic_se: median_std_error(&stat_sample),
            median_t_se: median_std_error(&ts),
            normalized_median: median(&normalized),
            w1_median: median(&w1s),
            gap_lb_violations: draws.iter().filter(|d| d.2).count(),
            prediction: pred,
        });
    }
    let (slope, intercept, slope_std_error) = if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| (r.prediction.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.statistic.ln()).collect();
        linear_fit(&x, &y)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    Ok(ScalingReport {
        rows,
        slope,
        intercept,
        slope_std_error,
    })
}
