use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::SymMatrix;
use crate::error::{Error, Result};

/// Smallest spectral gap accepted by [`local_lip_constant`] unless overridden.
pub const DEFAULT_GAP_THRESHOLD: f64 = 1e-12;

const SIGN_EPS: f64 = 1e-12;

/// A leading eigenpair together with what it cost to compute.
#[derive(Clone, Debug)]
pub struct EigPair {
    pub value: f64,
    /// Unit-norm eigenvector, first significant coordinate positive.
    pub vector: DVector<f64>,
    /// Cost in leading-eigenvector equivalents.
    pub cost_eigvecs: f64,
    /// Raw matrix-vector products spent (zero for closed-form paths).
    pub matvecs: usize,
}

/// Full decomposition `X = V diag(values) V^T`, values in decreasing order.
///
/// Columns of `vectors` are the eigenvectors, so `vectors^T` plays the role of
/// the rotation that diagonalizes `X`.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SpectralDecomp {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[0]
    }

    /// `lambda_1 - lambda_2`, infinite for `n = 1`.
    pub fn top_gap(&self) -> f64 {
        if self.values.len() < 2 {
            f64::INFINITY
        } else {
            self.values[0] - self.values[1]
        }
    }

    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i).into_owned()
    }

    /// Coordinates of `v` in the eigenbasis, `V^T v`.
    pub fn coords(&self, v: &DVector<f64>) -> DVector<f64> {
        self.vectors.tr_mul(v)
    }

    /// Maps eigenbasis coordinates back, `V y`.
    pub fn from_coords(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.vectors * y
    }

    pub fn reconstruct(&self) -> SymMatrix {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.values));
        SymMatrix::symmetrized(&(&self.vectors * d * self.vectors.transpose()))
    }

    /// Applies `f` to the spectrum: `V diag(f(values)) V^T`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let fj = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        SymMatrix::symmetrized(&(scaled * self.vectors.transpose()))
    }

    /// A full decomposition counts as `n` leading eigenvectors.
    pub fn cost_eigvecs(&self) -> f64 {
        self.dim() as f64
    }
}

/// Flips `v` so that its first significant coordinate is positive.
pub fn canonical_sign(v: &mut DVector<f64>) {
    if let Some(first) = v.iter().copied().find(|x| x.abs() > SIGN_EPS) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// Full symmetric eigendecomposition, values decreasing with stable index
/// tie-breaking and canonical eigenvector signs.
pub fn full_eig(x: &SymMatrix) -> Result<SpectralDecomp> {
    let m = x.as_matrix();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite(i, j));
            }
        }
    }
    let eig = SymmetricEigen::new(m.clone());
    let n = x.dim();
    let mut order: Vec<usize> = (0..n).collect();
    // sort_by is stable, so equal eigenvalues keep solver index order.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        col.normalize_mut();
        canonical_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok(SpectralDecomp { values, vectors })
}

/// `exp(X)` through the full decomposition. Callers are expected to shift or
/// scale `X` so the spectrum stays below the overflow threshold.
pub fn matrix_exponential(x: &SymMatrix) -> Result<SymMatrix> {
    let decomp = full_eig(x)?;
    exp_from_decomp(&decomp)
}

pub fn exp_from_decomp(decomp: &SpectralDecomp) -> Result<SymMatrix> {
    let top = decomp.lambda_max();
    if !top.exp().is_finite() {
        return Err(Error::ExpOverflow(top));
    }
    Ok(decomp.spectral_map(f64::exp))
}

/// Local Lipschitz constant of the gradient of `lambda_max` at a point with a
/// simple top eigenvalue: `1 / (lambda_1 - lambda_2)`.
pub fn local_lip_constant(decomp: &SpectralDecomp) -> Result<f64> {
    local_lip_constant_with_threshold(decomp, DEFAULT_GAP_THRESHOLD)
}

pub fn local_lip_constant_with_threshold(decomp: &SpectralDecomp, threshold: f64) -> Result<f64> {
    let gap = decomp.top_gap();
    if gap <= threshold {
        return Err(Error::NonsmoothPoint { gap, threshold });
    }
    Ok(1.0 / gap)
}

/// Unit Frobenius-norm direction `(phi_1 phi_2^T + phi_2 phi_1^T) / sqrt(2)`
/// that swaps the two leading eigenvectors; the curvature of `lambda_max`
/// along it equals the local Lipschitz constant.
pub fn extremal_direction(decomp: &SpectralDecomp) -> Result<SymMatrix> {
    if decomp.dim() < 2 {
        return Err(Error::invalid("extremal direction needs n >= 2"));
    }
    let p1 = decomp.vector(0);
    let p2 = decomp.vector(1);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    SymMatrix::from_fn(decomp.dim(), |i, j| s * (p1[i] * p2[j] + p2[i] * p1[j]))
}

/// Second derivative of `t -> lambda_max(X + tY)` at `t = 0` from the
/// perturbation expansion `2 sum_{j>=2} (phi_1^T Y phi_j)^2 / (lambda_1 - lambda_j)`.
pub fn lambda_max_curvature(decomp: &SpectralDecomp, y: &SymMatrix) -> Result<f64> {
    local_lip_constant(decomp)?;
    let p1 = decomp.vector(0);
    let yp1 = y.mul_vec(&p1);
    let coeffs = decomp.coords(&yp1);
    let l1 = decomp.lambda_max();
    Ok(2.0
        * (1..decomp.dim())
            .map(|j| coeffs[j] * coeffs[j] / (l1 - decomp.values[j]))
            .sum::<f64>())
}
