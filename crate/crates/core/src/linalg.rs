//! Small dense helpers on top of nalgebra.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_mat(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

/// Column order produced by Householder QR with greedy column pivoting.
///
/// At each stage the remaining column with the largest residual norm is moved to
/// the front; ties go to the lowest original index.
pub fn pivoted_qr_order(a: &DMatrix<f64>) -> Vec<usize> {
    let (m, n) = a.shape();
    let mut r = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let steps = m.min(n);
    for k in 0..steps {
        let mut best = k;
        let mut best_norm = -1.0;
        for j in k..n {
            let s: f64 = (k..m).map(|i| r[(i, j)] * r[(i, j)]).sum();
            if s > best_norm || (s == best_norm && perm[j] < perm[best]) {
                best = j;
                best_norm = s;
            }
        }
        r.swap_columns(k, best);
        perm.swap(k, best);
        let norm = best_norm.sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[(k, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vn: f64 = v.iter().map(|x| x * x).sum();
        if vn == 0.0 {
            continue;
        }
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
            let f = 2.0 * dot / vn;
            for i in k..m {
                r[(i, j)] -= f * v[i - k];
            }
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pivot_order_prefers_large_columns() {
        let a = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 3.0]);
        let p = pivoted_qr_order(&a);
        assert_eq!(&p[..2], &[2, 1]);
    }

    #[test]
    fn condition_of_identity() {
        assert!((condition_number(&DMatrix::identity(4, 4)) - 1.0).abs() < 1e-14);
        assert!(condition_number(&DMatrix::zeros(2, 2)).is_infinite());
    }
}
