//! Euclidean prox setups on simple feasible sets.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeasibleSet {
    /// `|x_i| <= half_width` for every coordinate.
    Box { half_width: f64, dim: usize },
    /// `||x||_2 <= radius`.
    Ball { radius: f64, dim: usize },
    Singleton(Vec<f64>),
}

impl FeasibleSet {
    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Box { dim, .. } | FeasibleSet::Ball { dim, .. } => *dim,
            FeasibleSet::Singleton(p) => p.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FeasibleSet::Box { half_width: r, .. } | FeasibleSet::Ball { radius: r, .. } => {
                if !(*r > 0.0 && r.is_finite()) {
                    return Err(Error::invalid(format!("set size must be positive, got {r}")));
                }
            }
            FeasibleSet::Singleton(p) => {
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("singleton point must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            FeasibleSet::Box { half_width, .. } => x.map(|v| v.clamp(-half_width, *half_width)),
            FeasibleSet::Ball { radius, .. } => {
                let norm = x.norm();
                if norm <= *radius {
                    x.clone()
                } else {
                    x * (radius / norm)
                }
            }
            FeasibleSet::Singleton(p) => DVector::from_column_slice(p),
        }
    }

    /// Membership up to `tol` (absolute, per coordinate or on the norm).
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        match self {
            FeasibleSet::Box { half_width, .. } => x.iter().all(|v| v.abs() <= half_width + tol),
            FeasibleSet::Ball { radius, .. } => x.norm() <= radius + tol,
            FeasibleSet::Singleton(p) => x.iter().zip(p).all(|(a, b)| (a - b).abs() <= tol),
        }
    }
}

/// Prox setup with `omega(x) = ||x||^2 / 2`, so `alpha = 1` and the prox-mapping
/// is a Euclidean projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EuclideanProx {
    pub set: FeasibleSet,
}

impl EuclideanProx {
    pub fn new(set: FeasibleSet) -> Result<Self> {
        set.validate()?;
        Ok(Self { set })
    }

    pub fn alpha(&self) -> f64 {
        1.0
    }

    pub fn omega(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.norm_squared()
    }

    /// Bregman distance `V(x, z) = omega(z) - omega(x) - <grad omega(x), z - x>`.
    pub fn bregman(&self, x: &DVector<f64>, z: &DVector<f64>) -> f64 {
        0.5 * (z - x).norm_squared()
    }

    /// `argmin_z { y^T (z - x) + V(x, z) } = Proj(x - y)`.
    pub fn prox(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.set.project(&(x - y))
    }

    /// Minimizer of `omega` over the set.
    pub fn center(&self) -> DVector<f64> {
        self.set.project(&DVector::zeros(self.set.dim()))
    }

    /// `(max omega - min omega)^(1/2)` over the set.
    pub fn diameter(&self) -> f64 {
        match &self.set {
            FeasibleSet::Box { half_width, dim } => half_width * (*dim as f64 / 2.0).sqrt(),
            FeasibleSet::Ball { radius, .. } => radius * std::f64::consts::FRAC_1_SQRT_2,
            FeasibleSet::Singleton(_) => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn box_projection_clamps() {
        let p = EuclideanProx::new(FeasibleSet::Box { half_width: 1.0, dim: 3 }).unwrap();
        let z = p.prox(&DVector::zeros(3), &DVector::from_vec(vec![2.0, 0.0, 0.0]));
        assert_eq!(z, DVector::from_vec(vec![-1.0, 0.0, 0.0]));
    }

    #[test]
    fn ball_interior_unchanged() {
        let p = EuclideanProx::new(FeasibleSet::Ball { radius: 2.0, dim: 2 }).unwrap();
        let x = DVector::from_vec(vec![0.5, 0.5]);
        let y = DVector::from_vec(vec![0.1, -0.2]);
        assert_eq!(p.prox(&x, &y), &x - &y);
    }

    #[test]
    fn diameters() {
        let b = EuclideanProx::new(FeasibleSet::Box { half_width: 0.5, dim: 16 }).unwrap();
        // DSPCA with n = 4: rho * n / sqrt(2)
        assert_relative_eq!(b.diameter(), 0.5 * 4.0 / 2f64.sqrt(), epsilon = 1e-15);
        let s = EuclideanProx::new(FeasibleSet::Ball { radius: 3.0, dim: 5 }).unwrap();
        assert_relative_eq!(s.diameter(), 3.0 / 2f64.sqrt());
    }

    #[test]
    fn singleton_collapses() {
        let p = EuclideanProx::new(FeasibleSet::Singleton(vec![1.0, -2.0])).unwrap();
        let z = p.prox(&DVector::from_vec(vec![1.0, -2.0]), &DVector::from_vec(vec![5.0, 5.0]));
        assert_eq!(z.as_slice(), &[1.0, -2.0]);
        assert_eq!(p.center().as_slice(), &[1.0, -2.0]);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(EuclideanProx::new(FeasibleSet::Ball { radius: 0.0, dim: 2 }).is_err());
    }
}
