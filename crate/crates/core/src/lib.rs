//! Maximum-eigenvalue minimization by rank-one Gaussian smoothing.
//!
//! The crate is organized bottom-up:
//!
//! - [`spectral`]: dense symmetric eigen-kernels (Lanczos, full decompositions,
//!   secular-equation rank-one updates, matrix exponentials).
//! - [`smoothing`]: the smoothed objective `F_k(X) = E[max_i lambda_max(X + (eps/n) z_i z_i^T)]`,
//!   its stochastic value/gradient oracle and analytic bounds.
//! - [`optimizer`]: Euclidean prox setups, accelerated stochastic approximation
//!   with and without the monotone line search, and subgradient / soft-max baselines.
//! - [`problems`]: the hypercube (DSPCA) and Euclidean-ball (MaxCut dual) instances.
//! - [`phase`]: critical scales and Monte Carlo checks of the rank-one phase transition.
//! - [`trace`]: CSV traces and run reports shared with the command-line front end.

pub mod error;
pub mod optimizer;
pub mod phase;
pub mod problems;
pub mod rng;
pub mod smoothing;
pub mod spectral;
pub mod trace;

pub use error::{Error, Result};
pub use spectral::SymMatrix;
