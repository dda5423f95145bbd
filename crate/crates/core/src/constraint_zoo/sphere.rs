use nalgebra::{DMatrix, DVector};

use crate::implicit_manifold::ConstraintSystem;

/// `F(θ) = ‖θ‖² - 1` on `ℝ^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphereSystem {
    dim: usize,
}

impl SphereSystem {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2);
        SphereSystem { dim }
    }
}

/// The unit sphere in `ℝ³`.
pub fn sphere_system() -> SphereSystem {
    SphereSystem::new(3)
}

impl ConstraintSystem for SphereSystem {
    fn p_tilde(&self) -> usize {
        self.dim
    }
    fn q(&self) -> usize {
        1
    }
    fn eval_f(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, theta.norm_squared() - 1.0)
    }
    fn eval_df(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(1, self.dim, |_, j| 2.0 * theta[j])
    }
    fn eval_d2f_apply(&self, _theta: &DVector<f64>, s1: &DVector<f64>, s2: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, 2.0 * s1.dot(s2))
    }
}
