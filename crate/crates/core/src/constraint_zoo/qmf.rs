//! Quadrature mirror filter constraints.
//!
//! A filter of order `M` has taps `h_l` for `l = 1-M..=M-1`, stored with tap `l`
//! at position `l + M - 1`. Writing `c_n = Σ_l h_l h_{l+n}`, the QMF map is
//!
//! `F_M(h) = (c_0 - 1, c_2, c_4, …, c_{2(M-1)}, Σ h_l - √2) ∈ ℝ^{M+1}`.
//!
//! Its Jacobian drops rank on the whole zero set because
//! `(Σh)² + (Σ(-1)^l h_l)² = 2(c_0 + 2 Σ_k c_{2k})`. [`QmfSystem`] therefore
//! replaces the norm row by the alternating sum `Σ(-1)^l h_l`, which has the same
//! zeros and a full-rank Jacobian at regular points. The reported residual is
//! still `‖F_M‖_∞`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::daubechies::TABLE;
use super::winding::{winding_zero_count, WINDING_N_QUAD, WINDING_RADIUS};
use crate::dft_conv::TwoSidedSeq;
use crate::error::{Error, Result};
use crate::implicit_manifold::{chart_at, ConstraintSystem, DEFAULT_KAPPA_MAX};
use crate::linalg::max_abs;
use crate::riemannian_sgd::{chart_partials, retract, step_first_order};

fn order_of(len: usize) -> usize {
    assert!(len % 2 == 1, "filter length must be odd");
    (len + 1) / 2
}

fn lag(h: &[f64], n: usize) -> f64 {
    (0..h.len().saturating_sub(n)).map(|i| h[i] * h[i + n]).sum()
}

fn alternating(m: usize, i: usize) -> f64 {
    if (i + m - 1) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `F_M(h)` for `h` of length `2M-1`.
pub fn qmf_residual(h: &[f64]) -> DVector<f64> {
    let m = order_of(h.len());
    let mut out = DVector::zeros(m + 1);
    out[0] = lag(h, 0) - 1.0;
    for k in 1..m {
        out[k] = lag(h, 2 * k);
    }
    out[m] = h.iter().sum::<f64>() - SQRT_2;
    out
}

fn lag_rows(h: &[f64], j: &mut DMatrix<f64>) {
    let m = order_of(h.len());
    let p = h.len() as i64;
    for k in 1..m {
        let s = 2 * k as i64;
        for i in 0..p {
            let mut v = 0.0;
            if i + s < p {
                v += h[(i + s) as usize];
            }
            if i - s >= 0 {
                v += h[(i - s) as usize];
            }
            j[(k, i as usize)] = v;
        }
    }
    for i in 0..h.len() {
        j[(m, i)] = 1.0;
    }
}

/// Jacobian of [`qmf_residual`], shape `(M+1) × (2M-1)`.
pub fn qmf_jacobian(h: &[f64]) -> DMatrix<f64> {
    let m = order_of(h.len());
    let mut j = DMatrix::zeros(m + 1, h.len());
    for i in 0..h.len() {
        j[(0, i)] = 2.0 * h[i];
    }
    lag_rows(h, &mut j);
    j
}

fn lag_bilinear(s1: &[f64], s2: &[f64], n: usize) -> f64 {
    (0..s1.len().saturating_sub(n)).map(|i| s1[i] * s2[i + n] + s2[i] * s1[i + n]).sum()
}

/// `D²F_M[s1, s2]`; independent of `h` since every component is at most quadratic.
pub fn qmf_d2_apply(h: &[f64], s1: &[f64], s2: &[f64]) -> DVector<f64> {
    let m = order_of(h.len());
    let mut out = DVector::zeros(m + 1);
    out[0] = 2.0 * s1.iter().zip(s2).map(|(a, b)| a * b).sum::<f64>();
    for k in 1..m {
        out[k] = lag_bilinear(s1, s2, 2 * k);
    }
    out
}

/// QMF constraints of order `M` with the regularized first row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QmfSystem {
    order: usize,
}

impl QmfSystem {
    /// # Panics
    /// If `order < 2`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 2, "QMF order must be at least 2");
        QmfSystem { order }
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

impl ConstraintSystem for QmfSystem {
    fn p_tilde(&self) -> usize {
        2 * self.order - 1
    }

    fn q(&self) -> usize {
        self.order + 1
    }

    fn eval_f(&self, theta: &DVector<f64>) -> DVector<f64> {
        let h = theta.as_slice();
        let m = self.order;
        let mut out = qmf_residual(h);
        out[0] = (0..h.len()).map(|i| alternating(m, i) * h[i]).sum();
        out
    }

    fn eval_df(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let h = theta.as_slice();
        let m = self.order;
        let mut j = DMatrix::zeros(m + 1, h.len());
        for i in 0..h.len() {
            j[(0, i)] = alternating(m, i);
        }
        lag_rows(h, &mut j);
        j
    }

    fn eval_d2f_apply(&self, theta: &DVector<f64>, s1: &DVector<f64>, s2: &DVector<f64>) -> DVector<f64> {
        let mut out = qmf_d2_apply(theta.as_slice(), s1.as_slice(), s2.as_slice());
        out[0] = 0.0;
        out
    }

    fn residual(&self, theta: &DVector<f64>) -> f64 {
        max_abs(&qmf_residual(theta.as_slice()))
    }
}

/// A real low-pass filter of order `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    seq: TwoSidedSeq<f64>,
}

impl WaveletFilter {
    pub fn new(seq: TwoSidedSeq<f64>) -> Self {
        WaveletFilter { seq }
    }

    pub fn from_values(h: Vec<f64>) -> Self {
        WaveletFilter { seq: TwoSidedSeq::new(h) }
    }

    pub fn from_dvector(h: &DVector<f64>) -> Self {
        Self::from_values(h.as_slice().to_vec())
    }

    /// Order `M` filter with `taps[0]` at index `first`.
    pub fn embed(order: usize, first: i64, taps: &[f64]) -> Self {
        WaveletFilter { seq: TwoSidedSeq::from_taps(order, first, taps) }
    }

    /// The `2N`-tap Daubechies filter, `1 <= N <= 9`.
    ///
    /// # Panics
    /// If `N` is outside `1..=9`.
    pub fn daubechies_taps(n: usize) -> Vec<f64> {
        assert!((1..=9).contains(&n), "Daubechies tables cover N = 1..=9");
        TABLE[n - 1].to_vec()
    }

    /// Daubechies filter with `N = M-1`, first tap at index `1-M`, `2 <= M <= 10`.
    ///
    /// This placement lies on a single component of the zero set, so charts there are regular.
    pub fn daubechies(order: usize) -> Self {
        Self::embed(order, 1 - order as i64, &Self::daubechies_taps(order - 1))
    }

    pub fn haar(order: usize) -> Self {
        Self::embed(order, 1 - order as i64, &Self::daubechies_taps(1))
    }

    /// Random feasible filter: Daubechies start, chart coordinates perturbed
    /// uniformly by up to `noise`, then re-embedded by Newton.
    pub fn perturbed_daubechies<R: Rng + ?Sized>(order: usize, noise: f64, rng: &mut R) -> Result<Self> {
        let sys = QmfSystem::new(order);
        let base = Self::daubechies(order).to_dvector();
        let chart = chart_at(&sys, &base, DEFAULT_KAPPA_MAX, 1e-12)?;
        let dir: Vec<f64> = (0..chart.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut scale = noise;
        let mut last = Error::NonConvergence { iterations: 0, residual: f64::INFINITY };
        for _ in 0..6 {
            let beta = &chart.beta_star + DVector::from_column_slice(&dir) * scale;
            match chart.embed(&sys, &beta, 1e-14, 50) {
                Ok(theta) => return Ok(Self::from_dvector(&theta)),
                Err(e) => last = e,
            }
            scale *= 0.5;
        }
        Err(last)
    }

    pub fn order(&self) -> usize {
        self.seq.order()
    }

    pub fn get(&self, k: i64) -> f64 {
        self.seq.get(k)
    }

    pub fn values(&self) -> &[f64] {
        self.seq.values()
    }

    pub fn seq(&self) -> &TwoSidedSeq<f64> {
        &self.seq
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.seq.values())
    }

    /// `‖F_M(h)‖_∞`.
    pub fn residual(&self) -> f64 {
        max_abs(&qmf_residual(self.values()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QmfSearch {
    pub tol: f64,
    pub max_iter: usize,
    pub attempts: usize,
    /// Lower edge of the band `[stopband, 1/2]` whose energy the polishing descent minimizes.
    pub stopband: f64,
    pub polish_steps: usize,
    pub polish_rate: f64,
}

impl Default for QmfSearch {
    fn default() -> Self {
        QmfSearch { tol: 1e-13, max_iter: 200, attempts: 50, stopband: 0.45, polish_steps: 200, polish_rate: 1.0 }
    }
}

/// `Q` with `hᵀQh` the mean of `|H(ξ)|²` over a grid on `[lo, 1/2]`.
fn stopband_gram(p: usize, lo: f64, grid: usize) -> DMatrix<f64> {
    let xs: Vec<f64> = (0..grid).map(|i| lo + (0.5 - lo) * (i as f64 + 0.5) / grid as f64).collect();
    DMatrix::from_fn(p, p, |i, j| {
        let d = i as f64 - j as f64;
        0.5 * xs.iter().map(|x| (2.0 * PI * x * d).cos()).sum::<f64>() / grid as f64
    })
}

fn winding_ok(h: &DVector<f64>) -> bool {
    matches!(winding_zero_count(WaveletFilter::from_dvector(h).seq(), WINDING_RADIUS, WINDING_N_QUAD), Ok(0))
}

/// Damped Newton descent on stopband energy in graph coordinates until the winding
/// count vanishes.
fn polish(sys: &QmfSystem, h0: DVector<f64>, opts: &QmfSearch) -> Option<DVector<f64>> {
    let q = stopband_gram(sys.p_tilde(), opts.stopband, 64);
    let energy = |h: &DVector<f64>| h.dot(&(&q * h));
    let mut h = h0;
    for _ in 0..opts.polish_steps {
        if winding_ok(&h) {
            return Some(h);
        }
        let chart = chart_at(sys, &h, DEFAULT_KAPPA_MAX, 1e-9).ok()?;
        let t = chart.tangent_basis();
        let grad = chart_partials(&chart, &(&q * &h * 2.0));
        let mut hess = t.transpose() * &q * &t * 2.0;
        let mu = 1e-6 * hess.trace().max(1e-12);
        for i in 0..hess.nrows() {
            hess[(i, i)] += mu;
        }
        let delta = hess.cholesky()?.solve(&grad);
        let e0 = energy(&h);
        let mut rate = opts.polish_rate;
        let mut next = None;
        for _ in 0..20 {
            let beta = step_first_order(&chart.beta_star, &delta, rate);
            if let Ok(t) = retract(sys, &chart, &beta, opts.tol.max(1e-15), 50) {
                if energy(&t) < e0 {
                    next = Some(t);
                    break;
                }
            }
            rate *= 0.5;
        }
        h = next?;
    }
    winding_ok(&h).then_some(h)
}

/// Damped Gauss–Newton from random starts onto the zero set of `F_M`, followed by a
/// geodesic descent on stopband energy until the winding count is zero.
pub fn find_qmf<R: Rng + ?Sized>(order: usize, rng: &mut R, opts: &QmfSearch) -> Result<WaveletFilter> {
    let sys = QmfSystem::new(order);
    let p = sys.p_tilde();
    let mut best = f64::INFINITY;
    for _ in 0..opts.attempts {
        let mut h = DVector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));
        let mut f = sys.eval_f(&h);
        for _ in 0..opts.max_iter {
            if max_abs(&f) <= opts.tol {
                break;
            }
            let j = sys.eval_df(&h);
            let mut a = &j * j.transpose();
            let mu = 1e-14 * a.trace().max(1.0);
            for i in 0..a.nrows() {
                a[(i, i)] += mu;
            }
            let Some(y) = a.lu().solve(&f) else { break };
            let delta = j.transpose() * y;
            let r0 = f.norm();
            let mut t = 1.0;
            loop {
                let h_try = &h - &delta * t;
                let f_try = sys.eval_f(&h_try);
                if f_try.norm() < r0 || t < 1e-3 {
                    h = h_try;
                    f = f_try;
                    break;
                }
                t *= 0.5;
            }
        }
        let r = sys.residual(&h);
        best = best.min(r);
        if r > 1e3 * opts.tol {
            continue;
        }
        if let Some(h) = polish(&sys, h, opts) {
            let filt = WaveletFilter::from_dvector(&h);
            if filt.residual() <= 1e3 * opts.tol {
                return Ok(filt);
            }
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, residual: best })
}

/// Embeds each filter at order `order` keeping its index positions.
pub fn reembed(h: &WaveletFilter, order: usize) -> WaveletFilter {
    let mut out = vec![0.0; 2 * order - 1];
    for k in h.seq().indices() {
        let i = k + order as i64 - 1;
        if i >= 0 && (i as usize) < out.len() {
            out[i as usize] = h.get(k);
        }
    }
    WaveletFilter::from_values(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mra::mask_eval;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_residual_zero() {
        let h = WaveletFilter::embed(3, 0, &[SQRT_2 / 2.0, SQRT_2 / 2.0]);
        assert!(h.residual() <= 1e-15);
    }

    #[test]
    fn zero_filter_residual() {
        let r = qmf_residual(&[0.0; 5]);
        assert_eq!(r.as_slice(), &[-1.0, 0.0, 0.0, -SQRT_2]);
    }

    #[test]
    fn d4_closed_form() {
        let s3 = 3f64.sqrt();
        let d = 4.0 * SQRT_2;
        let taps = [(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d];
        let h = WaveletFilter::embed(4, -1, &taps);
        assert!(h.residual() <= 1e-14);
        for (a, b) in taps.iter().zip(WaveletFilter::daubechies_taps(2)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn daubechies_tables_are_qmf() {
        for m in 2..=10 {
            assert!(WaveletFilter::daubechies(m).residual() < 2e-15, "M={m}");
        }
    }

    #[test]
    fn jacobian_rows_and_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in 3..=6 {
            let h: Vec<f64> = (0..2 * m - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let j = qmf_jacobian(&h);
            for i in 0..h.len() {
                assert_eq!(j[(0, i)], 2.0 * h[i]);
                assert_eq!(j[(m, i)], 1.0);
            }
            let eps = 1e-6;
            for c in 0..h.len() {
                let mut hp = h.clone();
                let mut hm = h.clone();
                hp[c] += eps;
                hm[c] -= eps;
                let fd = (qmf_residual(&hp) - qmf_residual(&hm)) / (2.0 * eps);
                assert!((fd - j.column(c)).amax() <= 1e-8);
            }
        }
    }

    #[test]
    fn d2_is_constant_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let (h1, h2, s1, s2) = (r(&mut rng), r(&mut rng), r(&mut rng), r(&mut rng));
        assert_eq!(qmf_d2_apply(&h1, &s1, &s2), qmf_d2_apply(&h2, &s1, &s2));
        let a = qmf_d2_apply(&h1, &s1, &s2);
        let b = qmf_d2_apply(&h1, &s2, &s1);
        assert!((&a - &b).amax() <= 1e-12 * (1.0 + a.amax()));
    }

    #[test]
    fn regularized_system_matches_zero_set() {
        let sys = QmfSystem::new(5);
        let h = WaveletFilter::daubechies(5).to_dvector();
        assert!(max_abs(&sys.eval_f(&h)) < 1e-15);
        let j = qmf_jacobian(h.as_slice());
        assert!(j.rank(1e-9) < 6);
        assert_eq!(sys.eval_df(&h).rank(1e-9), 6);
    }

    #[test]
    fn manifold_dimension_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for m in 3..=8 {
            let sys = QmfSystem::new(m);
            let h = WaveletFilter::perturbed_daubechies(m, 0.05, &mut rng).unwrap();
            assert!(h.residual() < 1e-12);
            let ch = chart_at(&sys, &h.to_dvector(), 1e8, 1e-12).unwrap();
            assert_eq!(ch.dim(), m - 2);
        }
    }

    #[test]
    fn qmf_identity_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for m in [3usize, 5, 8] {
            let h = WaveletFilter::perturbed_daubechies(m, 0.1, &mut rng).unwrap();
            for i in 0..256 {
                let xi = i as f64 / 256.0;
                let v = mask_eval(h.seq(), xi).norm_sqr() + mask_eval(h.seq(), xi + 0.5).norm_sqr();
                assert!((v - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn find_qmf_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in 3..=6 {
            let h = find_qmf(m, &mut rng, &QmfSearch::default()).unwrap();
            assert!(h.residual() <= 1e-10);
            assert_eq!(winding_zero_count(h.seq(), WINDING_RADIUS, WINDING_N_QUAD), Ok(0));
        }
    }

    #[test]
    fn reembed_keeps_positions() {
        let h = WaveletFilter::daubechies(3);
        let big = reembed(&h, 5);
        assert_eq!(big.order(), 5);
        for k in -2..=2 {
            assert_eq!(big.get(k), h.get(k));
        }
        assert!(big.residual() < 1e-15);
    }
}
