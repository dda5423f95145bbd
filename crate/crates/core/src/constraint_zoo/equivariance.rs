use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::implicit_manifold::ConstraintSystem;

/// Complex layers `W̃` commuting with a diagonalizable operator with eigenvectors `V`.
///
/// The constraint is that `V⁻¹ W̃ V` is diagonal; its off-diagonal entries are
/// split into real and imaginary parts, giving `2n(n-1)` real equations on the
/// `2n²` real parameters `θ = (vec Re W̃, vec Im W̃)` (column-major).
#[derive(Debug, Clone)]
pub struct CommutingSystem {
    n: usize,
    v: DMatrix<Complex64>,
    v_inv: DMatrix<Complex64>,
    off: Vec<(usize, usize)>,
}

pub fn commuting_equivariance_system(v: &DMatrix<Complex64>) -> Result<CommutingSystem> {
    CommutingSystem::new(v)
}

impl CommutingSystem {
    pub fn new(v: &DMatrix<Complex64>) -> Result<Self> {
        let n = v.nrows();
        if n == 0 || v.ncols() != n {
            return Err(Error::SingularV);
        }
        let v_inv = v.clone().try_inverse().ok_or(Error::SingularV)?;
        let check = &v_inv * v - DMatrix::<Complex64>::identity(n, n);
        if check.iter().any(|z| !(z.norm() < 1e-8)) {
            return Err(Error::SingularV);
        }
        let off = (0..n).flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c))).collect();
        Ok(CommutingSystem { n, v: v.clone(), v_inv, off })
    }

    pub fn to_complex(&self, theta: &DVector<f64>) -> DMatrix<Complex64> {
        let nn = self.n * self.n;
        DMatrix::from_fn(self.n, self.n, |i, j| {
            Complex64::new(theta[j * self.n + i], theta[nn + j * self.n + i])
        })
    }

    pub fn from_complex(w: &DMatrix<Complex64>) -> DVector<f64> {
        let re = w.iter().map(|z| z.re);
        let im = w.iter().map(|z| z.im);
        DVector::from_iterator(2 * w.len(), re.chain(im))
    }

    /// `Re W̃`, the real layer weight.
    pub fn real_part(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        self.to_complex(theta).map(|z| z.re)
    }

    /// `Im W̃`.
    pub fn imag_part(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        self.to_complex(theta).map(|z| z.im)
    }
}

impl ConstraintSystem for CommutingSystem {
    fn p_tilde(&self) -> usize {
        2 * self.n * self.n
    }
    fn q(&self) -> usize {
        2 * self.off.len()
    }
    fn eval_f(&self, theta: &DVector<f64>) -> DVector<f64> {
        let x = &self.v_inv * self.to_complex(theta) * &self.v;
        let mut out = DVector::zeros(self.q());
        for (i, &(r, c)) in self.off.iter().enumerate() {
            out[2 * i] = x[(r, c)].re;
            out[2 * i + 1] = x[(r, c)].im;
        }
        out
    }
    fn eval_df(&self, _theta: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        let nn = n * n;
        let mut j = DMatrix::zeros(self.q(), 2 * nn);
        for (i, &(r, c)) in self.off.iter().enumerate() {
            for b in 0..n {
                for a in 0..n {
                    let k = self.v_inv[(r, a)] * self.v[(b, c)];
                    let col = b * n + a;
                    j[(2 * i, col)] = k.re;
                    j[(2 * i + 1, col)] = k.im;
                    j[(2 * i, nn + col)] = -k.im;
                    j[(2 * i + 1, nn + col)] = k.re;
                }
            }
        }
        j
    }
    fn eval_d2f_apply(&self, _theta: &DVector<f64>, _s1: &DVector<f64>, _s2: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.q())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::implicit_manifold::{chart_at, FiniteDifferenceSystem};
    use crate::linalg::max_abs;
    use core::f64::consts::PI;

    fn fourier(n: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |j, k| {
            let a = 2.0 * PI * (j * k) as f64 / n as f64;
            Complex64::new(a.cos(), a.sin()) / (n as f64).sqrt()
        })
    }

    #[test]
    fn identity_commutes() {
        let s = commuting_equivariance_system(&fourier(4)).unwrap();
        assert_eq!(s.q(), 24);
        let th = CommutingSystem::from_complex(&DMatrix::identity(4, 4));
        assert!(max_abs(&s.eval_f(&th)) < 1e-14);
    }

    #[test]
    fn circulants_commute_with_shift() {
        let n = 5;
        let s = commuting_equivariance_system(&fourier(n)).unwrap();
        let c = [0.3, -1.2, 0.5, 2.0, 0.7];
        let w = DMatrix::from_fn(n, n, |i, j| Complex64::new(c[(j + n - i) % n], 0.0));
        assert!(max_abs(&s.eval_f(&CommutingSystem::from_complex(&w))) <= 1e-12);
    }

    #[test]
    fn diagonal_construction_and_derivatives() {
        let n = 3;
        let v = DMatrix::from_fn(n, n, |i, j| Complex64::new(((i * 3 + j) as f64).sin() + if i == j { 2.0 } else { 0.0 }, (i as f64 - j as f64) * 0.3));
        let s = commuting_equivariance_system(&v).unwrap();
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.1), Complex64::new(0.3, -0.7)]));
        let w = &v * d * v.clone().try_inverse().unwrap();
        let th = CommutingSystem::from_complex(&w);
        assert!(max_abs(&s.eval_f(&th)) <= 1e-12);
        let fd = FiniteDifferenceSystem::new(18, 12, |t: &DVector<f64>| s.eval_f(t));
        assert!((fd.eval_df(&th) - s.eval_df(&th)).amax() < 1e-8);
        let ch = chart_at(&s, &th, 1e8, 1e-10).unwrap();
        assert_eq!(ch.dim(), 2 * n);
        assert_eq!(s.real_part(&th), w.map(|z| z.re));
    }

    #[test]
    fn singular_v_rejected() {
        let v = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(commuting_equivariance_system(&v), Err(Error::SingularV)));
    }
}
