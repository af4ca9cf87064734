//! Flat TOML configuration for `solve` and `phase`.

use std::path::{Path, PathBuf};

use eigsmooth::optimizer::{SmoothConfig, SolverConfig, SubgradientConfig};
use eigsmooth::phase::{EpsRule, SpectrumFamily};
use eigsmooth::problems::ProblemKind;
use eigsmooth::spectral::LanczosOptions;
use serde::Deserialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    StochLs,
    Acsa,
    DetSmooth,
    Subgrad,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::StochLs => "stoch_ls",
            Algorithm::Acsa => "acsa",
            Algorithm::DetSmooth => "det_smooth",
            Algorithm::Subgrad => "subgrad",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub algorithm: Algorithm,
    pub n: usize,
    pub seed: u64,

    /// MaxCut ball radius, `n` when unset.
    pub radius: Option<f64>,
    /// DSPCA covariance or sample file; synthetic data when unset.
    pub data_path: Option<PathBuf>,
    /// Number of leading factors in synthetic DSPCA data.
    #[serde(default = "default_rank")]
    pub data_rank: usize,

    pub iterations: Option<usize>,
    /// `iterations = ceil(iteration_factor sqrt(n))` when `iterations` is unset.
    #[serde(default = "default_factor")]
    pub iteration_factor: f64,
    pub eps: Option<f64>,
    pub k: Option<usize>,
    pub q: Option<usize>,
    pub gamma_max: Option<f64>,
    pub gamma_min: Option<f64>,
    pub gamma_d: Option<f64>,
    pub gamma_init: Option<f64>,
    pub lip_scale: Option<f64>,
    pub lipschitz: Option<f64>,
    pub sigma_sq: Option<f64>,
    pub m_lipschitz: Option<f64>,
    pub mu: Option<f64>,
    /// Soft-max parameter of `det_smooth`, `eps / ln n` when unset.
    pub smooth_mu: Option<f64>,
    #[serde(default)]
    pub adaptive_restart: bool,
    pub lanczos_tol: Option<f64>,
    pub log_every: Option<usize>,
    #[serde(default)]
    pub record_wall_time: bool,

    pub out_dir: Option<PathBuf>,
    pub label: Option<String>,
}

fn default_rank() -> usize {
    3
}

fn default_factor() -> f64 {
    100.0
}

fn default_trials() -> usize {
    500
}

fn default_l() -> usize {
    1
}

impl RunConfig {
    pub fn iterations(&self) -> usize {
        self.iterations
            .unwrap_or_else(|| (self.iteration_factor * (self.n as f64).sqrt()).ceil() as usize)
    }

    pub fn solver(&self) -> SolverConfig {
        let base = SolverConfig::default();
        SolverConfig {
            iterations: self.iterations(),
            eps: self.eps.unwrap_or(base.eps),
            k: self.k.unwrap_or(base.k),
            q: self.q.unwrap_or(base.q),
            gamma_max: self.gamma_max,
            gamma_min: self.gamma_min,
            gamma_d: self.gamma_d.unwrap_or(base.gamma_d),
            gamma_init: self.gamma_init,
            lip_scale: self.lip_scale.unwrap_or(base.lip_scale),
            lipschitz: self.lipschitz,
            sigma_sq: self.sigma_sq,
            m_lipschitz: self.m_lipschitz.unwrap_or(base.m_lipschitz),
            mu: self.mu,
            seed: self.seed,
            lanczos_tol: self.lanczos_tol.unwrap_or(base.lanczos_tol),
            log_every: self.log_every,
            record_wall_time: self.record_wall_time,
        }
    }

    pub fn smooth(&self) -> SmoothConfig {
        let base = SmoothConfig::default();
        SmoothConfig {
            eps: self.eps.unwrap_or(base.eps),
            iterations: self.iterations(),
            lip_scale: self.lip_scale.unwrap_or(base.lip_scale),
            mu: self.smooth_mu,
            start: None,
            adaptive_restart: self.adaptive_restart,
            log_every: self.log_every,
            record_wall_time: self.record_wall_time,
        }
    }

    pub fn subgradient(&self) -> SubgradientConfig {
        let base = SubgradientConfig::default();
        SubgradientConfig {
            iterations: self.iterations(),
            seed: self.seed,
            lanczos: self
                .lanczos_tol
                .map_or(base.lanczos, LanczosOptions::with_tol),
            log_every: self.log_every,
            record_wall_time: self.record_wall_time,
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            let problem = match self.problem {
                ProblemKind::Dspca => "dspca",
                ProblemKind::Maxcut => "maxcut",
            };
            format!("{problem}-{}-n{}-s{}", self.algorithm.name(), self.n, self.seed)
        })
    }

    /// Checks fields that only some algorithms or problems use.
    pub fn validate(&self) -> Result<(), String> {
        if self.n < 2 {
            return Err(format!("n: must be at least 2, got {}", self.n));
        }
        if self.iterations == Some(0) {
            return Err("iterations: must be at least 1".into());
        }
        if !(self.iteration_factor > 0.0) {
            return Err(format!("iteration_factor: must be positive, got {}", self.iteration_factor));
        }
        if let Some(r) = self.radius {
            if self.problem != ProblemKind::Maxcut {
                return Err("radius: only used by problem = \"maxcut\"".into());
            }
            if !(r > 0.0 && r.is_finite()) {
                return Err(format!("radius: must be positive, got {r}"));
            }
        }
        if self.data_path.is_some() && self.problem != ProblemKind::Dspca {
            return Err("data_path: only used by problem = \"dspca\"".into());
        }
        if self.smooth_mu.is_some() && self.algorithm != Algorithm::DetSmooth {
            return Err("smooth_mu: only used by algorithm = \"det_smooth\"".into());
        }
        if let Some(mu) = self.smooth_mu {
            if !(mu > 0.0) {
                return Err(format!("smooth_mu: must be positive, got {mu}"));
            }
        }
        match self.algorithm {
            Algorithm::StochLs | Algorithm::Acsa => {
                self.solver().validate().map_err(|e| e.to_string())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    EqualGap,
    LinearGap,
    File,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub family: FamilyKind,
    pub gamma: Option<f64>,
    #[serde(default = "default_l")]
    pub l: usize,
    #[serde(default)]
    pub spread: f64,
    pub spectrum_path: Option<PathBuf>,
    pub n_list: Option<Vec<usize>>,
    /// `eps = eps_factor * eps_0(n)`.
    pub eps_factor: Option<f64>,
    /// Fixed `eps` at every `n`.
    pub eps: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub label: Option<String>,
}

impl PhaseConfig {
    pub fn rule(&self) -> Result<EpsRule, String> {
        match (self.eps_factor, self.eps) {
            (Some(f), None) => Ok(EpsRule::RelativeToCritical(f)),
            (None, Some(e)) => Ok(EpsRule::Fixed(e)),
            _ => Err("eps_factor / eps: set exactly one of them".into()),
        }
    }

    /// Resolves the spectrum family; relative paths are taken from `base`.
    pub fn family(&self, base: &Path) -> Result<(SpectrumFamily, Vec<usize>), String> {
        let need_gamma = || self.gamma.ok_or_else(|| "gamma: required for this family".to_string());
        let family = match self.family {
            FamilyKind::EqualGap => SpectrumFamily::EqualGap {
                gamma: need_gamma()?,
                l: self.l,
            },
            FamilyKind::LinearGap => SpectrumFamily::LinearGap {
                gamma: need_gamma()?,
                spread: self.spread,
                l: self.l,
            },
            FamilyKind::File => {
                let rel = self
                    .spectrum_path
                    .as_ref()
                    .ok_or("spectrum_path: required for family = \"file\"")?;
                let path = base.join(rel);
                let model = eigsmooth::phase::load_spectrum(&path)
                    .map_err(|e| format!("spectrum_path: {}: {e}", path.display()))?;
                SpectrumFamily::Fixed { model }
            }
        };
        let n_list = match (&self.n_list, &family) {
            (Some(list), _) => list.clone(),
            (None, SpectrumFamily::Fixed { model }) => vec![model.n()],
            (None, _) => return Err("n_list: required for this family".into()),
        };
        Ok((family, n_list))
    }
}

pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, String> {
    toml::from_str(text).map_err(|e| e.message().to_string() + &location(text, e.span()))
}

fn location(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    span.map_or_else(String::new, |s| {
        let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
        format!(" (line {line})")
    })
}
