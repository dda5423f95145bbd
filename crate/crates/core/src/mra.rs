//! Refinement masks, the periodic pyramid algorithm and scaling-function evaluation.
//!
//! Periodic signals of length `P` store index `k` at position `k mod P`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};
use num_complex::Complex64;

use crate::dft_conv::{circular_conv_real, TwoSidedSeq};
use crate::error::{Error, Result};
use crate::fft;

/// `H(ξ) = (1/√2) Σ h_k e^{-2πiξk}`.
pub fn mask_eval(h: &TwoSidedSeq<f64>, xi: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in h.indices() {
        let c = h.get(k);
        if c != 0.0 {
            acc += Complex64::from_polar(c, -2.0 * PI * xi * k as f64);
        }
    }
    acc * FRAC_1_SQRT_2
}

/// The mask continued to complex `z`.
pub fn mask_eval_complex(h: &TwoSidedSeq<f64>, z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in h.indices() {
        let c = h.get(k);
        if c != 0.0 {
            acc += (Complex64::new(0.0, -2.0 * PI * k as f64) * z).exp() * c;
        }
    }
    acc * FRAC_1_SQRT_2
}

/// `dH/dz` at complex `z`.
pub fn mask_derivative_complex(h: &TwoSidedSeq<f64>, z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in h.indices() {
        let c = h.get(k);
        if c != 0.0 {
            let w = Complex64::new(0.0, -2.0 * PI * k as f64);
            acc += (w * z).exp() * w * c;
        }
    }
    acc * FRAC_1_SQRT_2
}

/// `g_k = (-1)^{k-1} h_{1-k}`; order grows by one to hold the shifted support.
pub fn highpass_from_lowpass(h: &TwoSidedSeq<f64>) -> TwoSidedSeq<f64> {
    let mut g = TwoSidedSeq::zeros(h.order() + 1);
    for k in g.indices() {
        let sign = if (k - 1).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        g.set(k, sign * h.get(1 - k));
    }
    g
}

fn check_even(n: usize) -> Result<()> {
    if n == 0 || n % 2 == 1 {
        Err(Error::OddLength(n))
    } else {
        Ok(())
    }
}

/// One analysis step: `a = ↓(x ⊛ h̃)`, `d = ↓(x ⊛ g̃)` with `h̃_k = h_{-k}`.
pub fn dwt_level_periodic(a_next: &[f64], h: &TwoSidedSeq<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    check_even(a_next.len())?;
    let g = highpass_from_lowpass(h);
    let lo = circular_conv_real(a_next, &h.reversed());
    let hi = circular_conv_real(a_next, &g.reversed());
    let a = lo.iter().step_by(2).copied().collect();
    let d = hi.iter().step_by(2).copied().collect();
    Ok((a, d))
}

fn upsample(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * x.len()];
    for (i, &v) in x.iter().enumerate() {
        out[2 * i] = v;
    }
    out
}

/// One synthesis step: `x = ↑a ⊛ h + ↑d ⊛ g`.
pub fn idwt_level_periodic(a: &[f64], d: &[f64], h: &TwoSidedSeq<f64>) -> Result<Vec<f64>> {
    if a.len() != d.len() {
        return Err(Error::LengthMismatch { expected: a.len(), found: d.len() });
    }
    if a.is_empty() {
        return Err(Error::OddLength(0));
    }
    let g = highpass_from_lowpass(h);
    let lo = circular_conv_real(&upsample(a), h);
    let hi = circular_conv_real(&upsample(d), &g);
    Ok(lo.iter().zip(hi.iter()).map(|(x, y)| x + y).collect())
}

/// Approximation coefficients at `j0` and details for `j0..j1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiresDecomp {
    pub j0: u32,
    pub j1: u32,
    pub j2: u32,
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
}

impl MultiresDecomp {
    pub fn zeros(j0: u32, j1: u32, j2: u32) -> Self {
        MultiresDecomp {
            j0,
            j1,
            j2,
            approx: vec![0.0; 1 << j0],
            details: (j0..j1).map(|j| vec![0.0; 1 << j]).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.j0 <= self.j1 && self.j1 <= self.j2) {
            return Err(Error::InvalidLevels);
        }
        if self.approx.len() != 1 << self.j0 {
            return Err(Error::LengthMismatch { expected: 1 << self.j0, found: self.approx.len() });
        }
        if self.details.len() != (self.j1 - self.j0) as usize {
            return Err(Error::LengthMismatch { expected: (self.j1 - self.j0) as usize, found: self.details.len() });
        }
        for (i, d) in self.details.iter().enumerate() {
            let want = 1usize << (self.j0 + i as u32);
            if d.len() != want {
                return Err(Error::LengthMismatch { expected: want, found: d.len() });
            }
        }
        Ok(())
    }

    /// Total coefficient count, `2^{j1}`.
    pub fn len(&self) -> usize {
        self.approx.len() + self.details.iter().map(|d| d.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coefficients concatenated as `approx, details[0], details[1], …`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.approx.clone();
        for d in &self.details {
            out.extend_from_slice(d);
        }
        out
    }

    pub fn from_flat(j0: u32, j1: u32, j2: u32, flat: &[f64]) -> Result<Self> {
        if flat.len() != 1 << j1 {
            return Err(Error::LengthMismatch { expected: 1 << j1, found: flat.len() });
        }
        let mut d = Self::zeros(j0, j1, j2);
        let mut pos = 1usize << j0;
        d.approx.copy_from_slice(&flat[..pos]);
        for det in d.details.iter_mut() {
            let n = det.len();
            det.copy_from_slice(&flat[pos..pos + n]);
            pos += n;
        }
        Ok(d)
    }
}

/// Pyramid synthesis from level `j0` to `j2`; details above `j1` are zero.
pub fn waverec(decomp: &MultiresDecomp, h: &TwoSidedSeq<f64>) -> Result<Vec<f64>> {
    decomp.validate()?;
    let mut a = decomp.approx.clone();
    for j in decomp.j0..decomp.j2 {
        a = if j < decomp.j1 {
            idwt_level_periodic(&a, &decomp.details[(j - decomp.j0) as usize], h)?
        } else {
            idwt_level_periodic(&a, &vec![0.0; a.len()], h)?
        };
    }
    Ok(a)
}

/// Pyramid analysis of a length-`2^{j2}` signal down to `j0`, keeping details below `j1`.
pub fn wavedec(a_j2: &[f64], h: &TwoSidedSeq<f64>, j0: u32, j1: u32) -> Result<MultiresDecomp> {
    let n = a_j2.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::LengthMismatch { expected: n.next_power_of_two(), found: n });
    }
    let j2 = n.trailing_zeros();
    if !(j0 <= j1 && j1 <= j2) {
        return Err(Error::InvalidLevels);
    }
    let mut a = a_j2.to_vec();
    let mut details = Vec::new();
    for j in (j0..j2).rev() {
        let (lo, hi) = dwt_level_periodic(&a, h)?;
        if j < j1 {
            details.push(hi);
        }
        a = lo;
    }
    details.reverse();
    Ok(MultiresDecomp { j0, j1, j2, approx: a, details })
}

/// Samples of `φ` on `t_i = t_start + i·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFunction {
    pub t_start: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl ScalingFunction {
    pub fn t(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }

    /// Riemann sum of `φ`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dt
    }

    /// `∫ φ(t) φ(t - s) dt` for an integer number of grid steps `s`.
    pub fn shifted_inner(&self, steps: usize) -> f64 {
        let v = &self.values;
        (steps..v.len()).map(|i| v[i] * v[i - steps]).sum::<f64>() * self.dt
    }

    /// Fraction of `∫|φ|` lying outside `[lo, hi]`.
    pub fn mass_outside(&self, lo: f64, hi: f64) -> f64 {
        let total: f64 = self.values.iter().map(|x| x.abs()).sum();
        let out: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let t = self.t(*i);
                t < lo || t > hi
            })
            .map(|(_, x)| x.abs())
            .sum();
        out / total
    }
}

/// `∏_{j=1..depth} H(ξ/2^j)`.
pub fn phi_hat(h: &TwoSidedSeq<f64>, xi: f64, depth: u32) -> Complex64 {
    let mut p = Complex64::new(1.0, 0.0);
    let mut x = xi;
    for _ in 0..depth {
        x *= 0.5;
        p *= mask_eval(h, x);
    }
    p
}

/// Time window used by [`cascade_phi`]: a power of two covering `[1-M, M-1]` twice over.
pub fn cascade_window(order: usize) -> f64 {
    (4 * (order.max(2) - 1)).next_power_of_two().max(4) as f64
}

/// `φ` on a grid of `grid` points over `[-T/2, T/2)` by inverse DFT of the truncated product.
pub fn cascade_phi(h: &TwoSidedSeq<f64>, depth: u32, grid: usize) -> ScalingFunction {
    let t_len = cascade_window(h.order());
    let n = grid;
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    let half = (n / 2) as i64;
    for m in -half..half {
        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        spec[m.rem_euclid(n as i64) as usize] = phi_hat(h, m as f64 / t_len, depth) * sign;
    }
    let dt = t_len / n as f64;
    let values = fft::idft(&spec).iter().map(|z| z.re / dt).collect();
    ScalingFunction { t_start: -t_len / 2.0, dt, values }
}

/// Coefficients `a_{jk}` for `k = k_min, k_min + 1, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxCoeffs {
    pub k_min: i64,
    pub values: Vec<Complex64>,
}

impl ApproxCoeffs {
    pub fn get(&self, k: i64) -> Option<Complex64> {
        let i = k - self.k_min;
        if i < 0 {
            None
        } else {
            self.values.get(i as usize).copied()
        }
    }

    pub fn k_max(&self) -> i64 {
        self.k_min + self.values.len() as i64 - 1
    }
}

/// Exact projection coefficients `⟨γ, φ_{jk}⟩` of a `τ`-periodic curve with Fourier
/// coefficients `γ_m` (`γ(t) = Σ γ_m e^{iωmt}`, `ω = 2π/τ`).
pub fn init_coeffs_from_fourier(
    gamma: &TwoSidedSeq<Complex64>,
    tau: f64,
    h: &TwoSidedSeq<f64>,
    j: u32,
    depth: u32,
) -> Result<ApproxCoeffs> {
    let r = h.order() as f64 - 1.0;
    let scale = (1u64 << j) as f64;
    let k_lo = (r - scale * tau).ceil() as i64;
    let k_hi = (scale * tau - r).floor() as i64;
    if k_lo > k_hi {
        return Err(Error::RangeEmpty);
    }
    let omega = 2.0 * PI / tau;
    let weights: Vec<(i64, Complex64)> = gamma
        .indices()
        .filter(|&m| gamma.get(m) != Complex64::new(0.0, 0.0))
        .map(|m| (m, gamma.get(m) * phi_hat(h, -(m as f64) / (tau * scale), depth)))
        .collect();
    let norm = scale.sqrt().recip();
    let values = (k_lo..=k_hi)
        .map(|k| {
            weights.iter().fold(Complex64::new(0.0, 0.0), |acc, &(m, w)| {
                acc + w * Complex64::from_polar(1.0, omega * m as f64 * k as f64 / scale)
            }) * norm
        })
        .collect();
    Ok(ApproxCoeffs { k_min: k_lo, values })
}

fn ceil_log2(x: usize) -> u32 {
    if x <= 1 {
        0
    } else {
        usize::BITS - (x - 1).leading_zeros()
    }
}

/// Smallest admissible `j1` for the sample shortcut at order `M`.
pub fn min_level(order: usize) -> u32 {
    let r = order.saturating_sub(1);
    let a = ceil_log2(r + 1) + 1;
    let b = if r >= 2 { ceil_log2(r - 1) + 1 } else { 0 };
    a.max(b)
}

/// `a_{j1,k} ≈ 2^{-j1/2} γ*(k 2^{-j1})` for `k = -2^{j1-1}..2^{j1-1}-1`, stored at `k mod 2^{j1}`.
pub fn init_coeffs_from_samples<F: Fn(f64) -> f64>(sampler: F, j1: u32, order: usize) -> Result<Vec<f64>> {
    let min = min_level(order);
    if j1 < min {
        return Err(Error::JTooSmall { j: j1, min });
    }
    let p = 1usize << j1;
    let norm = (p as f64).sqrt().recip();
    Ok((0..p)
        .map(|i| {
            let k = if i < p / 2 { i as i64 } else { i as i64 - p as i64 };
            norm * sampler(k as f64 / p as f64)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint_zoo::WaveletFilter;
    use core::f64::consts::SQRT_2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn haar() -> TwoSidedSeq<f64> {
        WaveletFilter::embed(2, 0, &WaveletFilter::daubechies_taps(1)).seq().clone()
    }

    fn d4() -> TwoSidedSeq<f64> {
        WaveletFilter::embed(3, -1, &WaveletFilter::daubechies_taps(2)).seq().clone()
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn mask_examples() {
        assert!((mask_eval(&haar(), 0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(mask_eval(&haar(), 0.5).norm() < 1e-15);
        let v = mask_eval(&d4(), 0.3).norm_sqr() + mask_eval(&d4(), 0.8).norm_sqr();
        assert!((v - 1.0).abs() < 1e-12);
        let z = Complex64::new(0.3, 0.0);
        assert!((mask_eval_complex(&d4(), z) - mask_eval(&d4(), 0.3)).norm() < 1e-14);
    }

    #[test]
    fn mask_derivative_matches_fd() {
        let z = Complex64::new(0.1, 0.05);
        let e = 1e-6;
        let fd = (mask_eval_complex(&d4(), z + e) - mask_eval_complex(&d4(), z - e)) / (2.0 * e);
        assert!((fd - mask_derivative_complex(&d4(), z)).norm() < 1e-7);
    }

    #[test]
    fn highpass_examples() {
        let g = highpass_from_lowpass(&haar());
        assert!((g.get(0) + 1.0 / SQRT_2).abs() < 1e-15);
        assert!((g.get(1) - 1.0 / SQRT_2).abs() < 1e-15);
        let h = d4();
        let g = highpass_from_lowpass(&h);
        let ip: f64 = g.indices().map(|k| g.get(k) * h.get(k)).sum();
        assert!(ip.abs() < 1e-15);
        let n: f64 = g.values().iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dwt_examples() {
        let (a, d) = dwt_level_periodic(&[3.0; 8], &haar()).unwrap();
        assert!(a.iter().all(|x| (x - 3.0 * SQRT_2).abs() < 1e-14));
        assert!(d.iter().all(|x| x.abs() < 1e-14));
        let alt: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let (a, d) = dwt_level_periodic(&alt, &haar()).unwrap();
        assert!(a.iter().all(|x| x.abs() < 1e-14));
        assert!(d.iter().all(|x| (x.abs() - SQRT_2).abs() < 1e-14));
        assert_eq!(dwt_level_periodic(&[1.0; 7], &haar()), Err(Error::OddLength(7)));
    }

    #[test]
    fn idwt_examples() {
        let x = idwt_level_periodic(&[2.0, 0.0, 0.0, 0.0], &[0.0; 4], &haar()).unwrap();
        let want = [SQRT_2, SQRT_2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (a, b) in x.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(idwt_level_periodic(&[0.0; 4], &[0.0; 4], &d4()).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(idwt_level_periodic(&[0.0; 4], &[0.0; 2], &d4()), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn perfect_reconstruction_and_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for m in [3usize, 5, 8] {
            let h = WaveletFilter::perturbed_daubechies(m, 0.1, &mut rng).unwrap();
            for n in [2usize, 4, 8, 16, 128] {
                let x = random(n, n as u64 + m as u64);
                let (a, d) = dwt_level_periodic(&x, h.seq()).unwrap();
                let e0: f64 = x.iter().map(|v| v * v).sum();
                let e1: f64 = a.iter().chain(d.iter()).map(|v| v * v).sum();
                assert!((e0 - e1).abs() <= 1e-10 * e0);
                let y = idwt_level_periodic(&a, &d, h.seq()).unwrap();
                for (u, v) in x.iter().zip(y.iter()) {
                    assert!((u - v).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn pyramid_round_trips() {
        let h = d4();
        let x = random(64, 3);
        let dec = wavedec(&x, &h, 2, 6).unwrap();
        assert_eq!(dec.len(), 64);
        let y = waverec(&dec, &h).unwrap();
        for (u, v) in x.iter().zip(y.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
        let dec2 = wavedec(&y, &h, 2, 6).unwrap();
        for (u, v) in dec.flatten().iter().zip(dec2.flatten().iter()) {
            assert!((u - v).abs() < 1e-12);
        }
        let short = wavedec(&x, &h, 2, 4).unwrap();
        assert_eq!(short.len(), 16);
        let back = waverec(&short, &h).unwrap();
        assert_eq!(back.len(), 64);
        let again = wavedec(&back, &h, 2, 4).unwrap();
        for (u, v) in short.flatten().iter().zip(again.flatten().iter()) {
            assert!((u - v).abs() < 1e-12);
        }
        assert_eq!(wavedec(&x, &h, 4, 3), Err(Error::InvalidLevels));
        assert!(matches!(wavedec(&x[..48], &h, 2, 4), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn flat_layout_round_trip() {
        let d = wavedec(&random(32, 5), &d4(), 2, 5).unwrap();
        assert_eq!(MultiresDecomp::from_flat(2, 5, 5, &d.flatten()).unwrap(), d);
    }

    #[test]
    fn haar_cascade_is_box() {
        let phi = cascade_phi(&haar(), 14, 1 << 14);
        assert!((phi.integral() - 1.0).abs() < 1e-6);
        for (i, &v) in phi.values.iter().enumerate() {
            let t = phi.t(i);
            if t.abs() < 0.05 || (t - 1.0).abs() < 0.05 {
                continue;
            }
            let want = if (0.0..1.0).contains(&t) { 1.0 } else { 0.0 };
            assert!((v - want).abs() <= 5e-3, "t={t}, v={v}");
        }
    }

    #[test]
    fn d4_cascade_orthonormal_translates() {
        let phi = cascade_phi(&d4(), 14, 1 << 14);
        let steps = (1.0 / phi.dt).round() as usize;
        assert!(phi.shifted_inner(steps).abs() < 1e-3);
        assert!((phi.shifted_inner(0) - 1.0).abs() < 1e-2);
        assert!(phi.mass_outside(-2.0, 2.0) <= 1e-3);
    }

    #[test]
    fn constant_curve_coefficients() {
        let gamma = TwoSidedSeq::from_taps(1, 0, &[Complex64::new(2.5, 0.0)]);
        let a = init_coeffs_from_fourier(&gamma, 1.0, &d4(), 5, 30).unwrap();
        for v in &a.values {
            assert!((v - Complex64::new(2.5 / (32f64).sqrt(), 0.0)).norm() < 1e-14);
        }
        let s = init_coeffs_from_samples(|_| 2.5, 5, 3).unwrap();
        assert!(s.iter().all(|v| (v - 2.5 / (32f64).sqrt()).abs() < 1e-14));
    }

    #[test]
    fn level_bounds() {
        assert_eq!(min_level(8), 4);
        assert_eq!(min_level(3), 3);
        assert_eq!(init_coeffs_from_samples(|t| t, 3, 8), Err(Error::JTooSmall { j: 3, min: 4 }));
        let gamma = TwoSidedSeq::from_taps(1, 0, &[Complex64::new(1.0, 0.0)]);
        assert_eq!(init_coeffs_from_fourier(&gamma, 0.01, &d4(), 2, 30), Err(Error::RangeEmpty));
    }

    #[test]
    fn sample_shortcut_round_trip() {
        let gamma = |t: f64| 1.0 + (2.0 * PI * t).cos() + 0.3 * (6.0 * PI * t).sin();
        let a = init_coeffs_from_samples(gamma, 12, 3).unwrap();
        let dec = wavedec(&a, &d4(), 4, 12).unwrap();
        let back = waverec(&dec, &d4()).unwrap();
        let scale = (4096f64).sqrt();
        for (i, v) in back.iter().enumerate() {
            let k = if i < 2048 { i as f64 } else { i as f64 - 4096.0 };
            assert!((v * scale - gamma(k / 4096.0)).abs() < 1e-3);
        }
    }
}
