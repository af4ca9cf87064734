//! Dense symmetric spectral kernel: leading eigenpairs, full decompositions,
//! rank-one secular updates and matrix exponentials.

mod decomp;
mod lanczos;
mod matrix;
mod secular;

pub use decomp::{
    canonical_sign, exp_from_decomp, extremal_direction, full_eig, lambda_max_curvature,
    local_lip_constant, local_lip_constant_with_threshold, matrix_exponential, EigPair,
    SpectralDecomp, DEFAULT_GAP_THRESHOLD,
};
pub use lanczos::{
    lanczos_iteration_budget, lanczos_leading, LanczosOptions, RankOneUpdate, SymOperator,
};
pub use matrix::{SymMatrix, SYMMETRY_TOL};
pub(crate) use matrix::parse_row;
pub use secular::{
    char_poly_rank_one, rank_one_leading, secular_root, RankOneLeading, SecularProblem,
    SecularRoot, DEFLATION_RATIO,
};
