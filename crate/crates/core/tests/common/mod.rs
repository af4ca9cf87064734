#![allow(dead_code)]

use eigsmooth::SymMatrix;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// GOE-like matrix with unit-variance off-diagonal entries, scaled by `1/sqrt(n)`.
pub fn random_sym<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = (&g + g.transpose()) / (2.0 * (n as f64).sqrt());
    SymMatrix::from_dmatrix(s).unwrap()
}

pub fn gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Haar-ish orthogonal matrix from the QR of a Gaussian matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}
