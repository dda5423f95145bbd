use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::implicit_manifold::ConstraintSystem;

/// `O(M)` as the zero set of `h_{·l}ᵀ h_{·k} - δ_{kl}` for `l <= k`.
///
/// `θ` holds the `M × M` matrix in column-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrthogonalSystem {
    m: usize,
    pairs: Vec<(usize, usize)>,
}

impl OrthogonalSystem {
    pub fn new(m: usize) -> Self {
        assert!(m >= 2);
        let pairs = (0..m).flat_map(|l| (l..m).map(move |k| (l, k))).collect();
        OrthogonalSystem { m, pairs }
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn to_matrix(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.m, self.m, theta.as_slice())
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_column_slice(m.as_slice())
    }

    fn col<'a>(&self, v: &'a DVector<f64>, c: usize) -> &'a [f64] {
        &v.as_slice()[c * self.m..(c + 1) * self.m]
    }
}

pub fn orthogonal_filter_system(m: usize) -> OrthogonalSystem {
    OrthogonalSystem::new(m)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ConstraintSystem for OrthogonalSystem {
    fn p_tilde(&self) -> usize {
        self.m * self.m
    }
    fn q(&self) -> usize {
        self.pairs.len()
    }
    fn eval_f(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.pairs.len(),
            self.pairs.iter().map(|&(l, k)| {
                dot(self.col(theta, l), self.col(theta, k)) - if l == k { 1.0 } else { 0.0 }
            }),
        )
    }
    fn eval_df(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let m = self.m;
        let mut j = DMatrix::zeros(self.pairs.len(), m * m);
        for (row, &(l, k)) in self.pairs.iter().enumerate() {
            for r in 0..m {
                j[(row, l * m + r)] += theta[k * m + r];
                j[(row, k * m + r)] += theta[l * m + r];
            }
        }
        j
    }
    fn eval_d2f_apply(&self, _theta: &DVector<f64>, s1: &DVector<f64>, s2: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.pairs.len(),
            self.pairs
                .iter()
                .map(|&(l, k)| dot(self.col(s1, l), self.col(s2, k)) + dot(self.col(s2, l), self.col(s1, k))),
        )
    }
}
