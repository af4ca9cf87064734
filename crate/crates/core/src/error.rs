use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },

    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("Lanczos did not converge: {attempts} attempts, {matvecs} matrix-vector products, best residual {residual:e}")]
    LanczosNoConvergence {
        attempts: usize,
        matvecs: usize,
        residual: f64,
    },

    #[error("secular equation has no positive weight")]
    ZeroWeights,

    #[error("spectral gap {gap:e} is below threshold {threshold:e} (nonsmooth point)")]
    NonsmoothPoint { gap: f64, threshold: f64 },

    #[error("matrix exponential overflows: largest eigenvalue {0}")]
    ExpOverflow(f64),

    #[error("evaluation point {0} coincides with an eigenvalue")]
    AtPole(f64),

    #[error("Lipschitz bound requires k >= 3, got k = {0}")]
    UnsupportedK(usize),

    #[error("no positive root: eps {eps} does not exceed the critical scale {eps0}")]
    NotSupercritical { eps: f64, eps0: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("oracle failure at iteration {iteration}: {source}")]
    Oracle {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
