//! Two-sided and periodic convolution of finite sequences through the DFT.
//!
//! A two-sided sequence of order `M` has entries indexed `1-M..=M-1`.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fft;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSidedSeq<T> {
    order: usize,
    values: Vec<T>,
}

impl<T: Copy + Zero> TwoSidedSeq<T> {
    /// Wraps `values` (length `2M-1`, index `1-M` first).
    ///
    /// # Panics
    /// If the length is even or zero.
    pub fn new(values: Vec<T>) -> Self {
        assert!(values.len() % 2 == 1, "two-sided sequence needs odd length");
        TwoSidedSeq { order: (values.len() + 1) / 2, values }
    }

    pub fn zeros(order: usize) -> Self {
        assert!(order >= 1);
        TwoSidedSeq { order, values: vec![T::zero(); 2 * order - 1] }
    }

    /// Places `taps` so that `taps[0]` sits at index `first`.
    pub fn from_taps(order: usize, first: i64, taps: &[T]) -> Self {
        let mut s = Self::zeros(order);
        for (i, &t) in taps.iter().enumerate() {
            s.set(first + i as i64, t);
        }
        s
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_index(&self) -> i64 {
        1 - self.order as i64
    }

    pub fn max_index(&self) -> i64 {
        self.order as i64 - 1
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Entry at index `k`; zero outside the support.
    pub fn get(&self, k: i64) -> T {
        let i = k + self.order as i64 - 1;
        if i < 0 || i as usize >= self.values.len() {
            T::zero()
        } else {
            self.values[i as usize]
        }
    }

    /// # Panics
    /// If `k` lies outside `1-M..=M-1`.
    pub fn set(&mut self, k: i64, v: T) {
        let i = k + self.order as i64 - 1;
        assert!(i >= 0 && (i as usize) < self.values.len(), "index {k} out of range");
        self.values[i as usize] = v;
    }

    pub fn indices(&self) -> core::ops::RangeInclusive<i64> {
        self.min_index()..=self.max_index()
    }

    /// The sequence `k -> a_{-k}`.
    pub fn reversed(&self) -> Self {
        let mut v = self.values.clone();
        v.reverse();
        TwoSidedSeq { order: self.order, values: v }
    }

    pub fn map<U: Copy + Zero, F: Fn(T) -> U>(&self, f: F) -> TwoSidedSeq<U> {
        TwoSidedSeq { order: self.order, values: self.values.iter().map(|&x| f(x)).collect() }
    }
}

impl<T: Copy + Zero + One> TwoSidedSeq<T> {
    /// The unit impulse at index 0.
    pub fn delta(order: usize) -> Self {
        let mut s = Self::zeros(order);
        s.values[order - 1] = T::one();
        s
    }
}

impl TwoSidedSeq<f64> {
    pub fn to_complex(&self) -> TwoSidedSeq<Complex64> {
        self.map(|x| Complex64::new(x, 0.0))
    }
}

impl TwoSidedSeq<Complex64> {
    pub fn re(&self) -> TwoSidedSeq<f64> {
        self.map(|z| z.re)
    }
}

/// One-sided layout of length `2M-1`: index `k >= 0` at position `k`, index `k < 0` at `k + 2M - 1`.
pub fn fft_shift<T: Copy + Zero>(a: &TwoSidedSeq<T>) -> Vec<T> {
    shift_into(a, a.len())
}

/// Inverse of [`fft_shift`].
pub fn fft_unshift<T: Copy + Zero>(s: &[T]) -> TwoSidedSeq<T> {
    assert!(s.len() % 2 == 1, "shifted sequence needs odd length");
    let m = (s.len() + 1) / 2;
    let mut out = TwoSidedSeq::zeros(m);
    for k in out.indices() {
        out.set(k, s[k.rem_euclid(s.len() as i64) as usize]);
    }
    out
}

fn shift_into<T: Copy + Zero>(a: &TwoSidedSeq<T>, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for k in a.indices() {
        out[k.rem_euclid(n as i64) as usize] = a.get(k);
    }
    out
}

/// Zero-extends `a` to order `j`.
pub fn pad<T: Copy + Zero>(a: &TwoSidedSeq<T>, j: usize) -> Result<TwoSidedSeq<T>> {
    if j < a.order() {
        return Err(Error::BadOrder { from: a.order(), to: j });
    }
    let mut out = TwoSidedSeq::zeros(j);
    for k in a.indices() {
        out.set(k, a.get(k));
    }
    Ok(out)
}

/// `(a*b)_k = Σ_{m+n=k} a_m b_n`, an order `M+N-1` sequence.
///
/// Both inputs are padded to order `K = M+N-1`, shifted, transformed, multiplied and
/// transformed back. The transform length is the next power of two `>= 2K-1`; the
/// product has no aliasing at that length so the result is exact.
pub fn two_sided_conv(a: &TwoSidedSeq<Complex64>, b: &TwoSidedSeq<Complex64>) -> TwoSidedSeq<Complex64> {
    let k = a.order() + b.order() - 1;
    let n = (2 * k - 1).next_power_of_two();
    let fa = fft::dft(&shift_into(a, n));
    let fb = fft::dft(&shift_into(b, n));
    let prod: Vec<Complex64> = fa.iter().zip(fb.iter()).map(|(x, y)| x * y).collect();
    let c = fft::idft(&prod);
    let mut out = TwoSidedSeq::zeros(k);
    for i in out.indices() {
        out.set(i, c[i.rem_euclid(n as i64) as usize]);
    }
    out
}

pub fn two_sided_conv_real(a: &TwoSidedSeq<f64>, b: &TwoSidedSeq<f64>) -> TwoSidedSeq<f64> {
    two_sided_conv(&a.to_complex(), &b.to_complex()).re()
}

/// Convolution of the `(2M-1)`-periodic extension of `a` with `b`, restricted to `|k| <= M-1`.
///
/// `a` is extended periodically to order `M+N-1`, convolved with `b` through
/// [`two_sided_conv`] (order `M+2(N-1)`), and cut back to order `M`.
pub fn periodic_conv(a: &TwoSidedSeq<Complex64>, b: &TwoSidedSeq<Complex64>) -> TwoSidedSeq<Complex64> {
    let m = a.order() as i64;
    let period = 2 * m - 1;
    let mut ext = TwoSidedSeq::zeros(a.order() + b.order() - 1);
    for k in ext.indices() {
        ext.set(k, a.get((k + m - 1).rem_euclid(period) - (m - 1)));
    }
    let full = two_sided_conv(&ext, b);
    let mut out = TwoSidedSeq::zeros(a.order());
    for k in out.indices() {
        out.set(k, full.get(k));
    }
    out
}

pub fn periodic_conv_real(a: &TwoSidedSeq<f64>, b: &TwoSidedSeq<f64>) -> TwoSidedSeq<f64> {
    periodic_conv(&a.to_complex(), &b.to_complex()).re()
}

/// Circular convolution `y_k = Σ_n x_{(k-n) mod P} b_n` of a length-`P` periodic signal
/// stored with index `k` at position `k mod P`.
///
/// The filter is folded modulo `P` and the product is formed with a length-`P` DFT.
pub fn circular_conv(x: &[Complex64], b: &TwoSidedSeq<Complex64>) -> Vec<Complex64> {
    let p = x.len();
    if p == 0 {
        return Vec::new();
    }
    let mut folded = vec![Complex64::new(0.0, 0.0); p];
    for k in b.indices() {
        folded[k.rem_euclid(p as i64) as usize] += b.get(k);
    }
    let fx = fft::dft(x);
    let fb = fft::dft(&folded);
    let prod: Vec<Complex64> = fx.iter().zip(fb.iter()).map(|(u, v)| u * v).collect();
    fft::idft(&prod)
}

pub fn circular_conv_real(x: &[f64], b: &TwoSidedSeq<f64>) -> Vec<f64> {
    let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    circular_conv(&xc, &b.to_complex()).iter().map(|z| z.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn brute(a: &TwoSidedSeq<Complex64>, b: &TwoSidedSeq<Complex64>) -> TwoSidedSeq<Complex64> {
        let mut out = TwoSidedSeq::zeros(a.order() + b.order() - 1);
        for m in a.indices() {
            for n in b.indices() {
                let v = out.get(m + n) + a.get(m) * b.get(n);
                out.set(m + n, v);
            }
        }
        out
    }

    fn seq(order: usize, seed: f64) -> TwoSidedSeq<Complex64> {
        TwoSidedSeq::new(
            (0..2 * order - 1)
                .map(|i| c((seed + i as f64 * 0.71).sin(), (seed * 2.0 + i as f64 * 0.39).cos()))
                .collect(),
        )
    }

    fn max_diff(a: &TwoSidedSeq<Complex64>, b: &TwoSidedSeq<Complex64>) -> f64 {
        assert_eq!(a.order(), b.order());
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn delta_is_identity() {
        let b = seq(4, 0.3);
        let d = TwoSidedSeq::<Complex64>::delta(1);
        assert!(max_diff(&two_sided_conv(&d, &b), &b) < 1e-15);
    }

    #[test]
    fn ones_times_ones() {
        let a = TwoSidedSeq::new(vec![1.0, 1.0, 1.0]);
        let out = two_sided_conv_real(&a, &a);
        let want = [1.0, 2.0, 3.0, 2.0, 1.0];
        for (x, y) in out.values().iter().zip(want.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn random_against_brute_force() {
        let a = seq(7, 0.1);
        let b = seq(5, 1.7);
        assert!(max_diff(&two_sided_conv(&a, &b), &brute(&a, &b)) < 1e-12);
    }

    #[test]
    fn shift_examples() {
        let a = TwoSidedSeq::new(vec![-1.0, 0.0, 1.0]);
        assert_eq!(fft_shift(&a), vec![0.0, 1.0, -1.0]);
        let d = TwoSidedSeq::<f64>::delta(4);
        let s = fft_shift(&d);
        assert_eq!(s[0], 1.0);
        assert!(s[1..].iter().all(|&x| x == 0.0));
        assert_eq!(fft_unshift(&fft_shift(&seq(6, 0.2))), seq(6, 0.2));
    }

    #[test]
    fn pad_examples() {
        let d = pad(&TwoSidedSeq::<f64>::delta(1), 5).unwrap();
        assert_eq!(d.len(), 9);
        assert_eq!(d.values().iter().filter(|&&x| x != 0.0).count(), 1);
        let a = seq(3, 0.5);
        assert_eq!(pad(&a, 3).unwrap(), a);
        assert_eq!(pad(&a, 2), Err(Error::BadOrder { from: 3, to: 2 }));
        let b = seq(2, 0.9);
        let lhs = two_sided_conv(&pad(&a, 6).unwrap(), &b);
        let rhs = pad(&two_sided_conv(&a, &b), 7).unwrap();
        assert!(max_diff(&lhs, &rhs) < 1e-12);
    }

    fn periodic_brute(a: &TwoSidedSeq<Complex64>, b: &TwoSidedSeq<Complex64>) -> TwoSidedSeq<Complex64> {
        let m = a.order() as i64;
        let p = 2 * m - 1;
        let mut out = TwoSidedSeq::zeros(a.order());
        for k in out.indices() {
            let mut s = c(0.0, 0.0);
            for n in b.indices() {
                s += a.get((k - n + m - 1).rem_euclid(p) - (m - 1)) * b.get(n);
            }
            out.set(k, s);
        }
        out
    }

    #[test]
    fn periodic_examples() {
        let a = seq(8, 0.4);
        assert!(max_diff(&periodic_conv(&a, &TwoSidedSeq::delta(3)), &a) < 1e-14);
        let b = seq(4, 2.2);
        assert!(max_diff(&periodic_conv(&a, &b), &periodic_brute(&a, &b)) < 1e-12);
        let konst = TwoSidedSeq::new(vec![c(2.5, 0.0); 9]);
        let sum: Complex64 = b.values().iter().sum();
        let out = periodic_conv(&konst, &b);
        for v in out.values() {
            assert!((v - sum * 2.5).norm() < 1e-12);
        }
    }

    #[test]
    fn circular_matches_periodic_for_odd_periods() {
        let a = seq(6, 0.8);
        let b = seq(3, 0.1);
        let direct = fft_unshift(&circular_conv(&fft_shift(&a), &b));
        assert!(max_diff(&direct, &periodic_conv(&a, &b)) < 1e-12);
    }

    #[test]
    fn circular_handles_filters_longer_than_period() {
        let x = [1.0, -2.0, 0.5, 3.0];
        let b = TwoSidedSeq::new((0..11).map(|i| (i as f64 * 0.3).cos()).collect());
        let y = circular_conv_real(&x, &b);
        for k in 0..4i64 {
            let mut s = 0.0;
            for n in b.indices() {
                s += x[(k - n).rem_euclid(4) as usize] * b.get(n);
            }
            assert!((y[k as usize] - s).abs() < 1e-12);
        }
    }

    fn arb_seq(max_order: usize) -> impl Strategy<Value = TwoSidedSeq<Complex64>> {
        (1..=max_order).prop_flat_map(|m| {
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * m - 1)
                .prop_map(|v| TwoSidedSeq::new(v.into_iter().map(|(r, i)| c(r, i)).collect()))
        })
    }

    proptest! {
        #[test]
        fn conv_commutes(a in arb_seq(9), b in arb_seq(9)) {
            prop_assert!(max_diff(&two_sided_conv(&a, &b), &two_sided_conv(&b, &a)) < 1e-12);
        }

        #[test]
        fn conv_associates(a in arb_seq(6), b in arb_seq(6), d in arb_seq(6)) {
            let l = two_sided_conv(&two_sided_conv(&a, &b), &d);
            let r = two_sided_conv(&a, &two_sided_conv(&b, &d));
            prop_assert!(max_diff(&l, &r) < 1e-10);
        }

        #[test]
        fn conv_is_linear(a in arb_seq(5), b in arb_seq(5), s in -2.0f64..2.0) {
            let a2 = a.map(|x| x * s);
            let l = two_sided_conv(&a2, &b);
            let r = two_sided_conv(&a, &b).map(|x| x * s);
            prop_assert!(max_diff(&l, &r) < 1e-12);
        }

        #[test]
        fn shift_round_trip(a in arb_seq(12)) {
            prop_assert_eq!(fft_unshift(&fft_shift(&a)), a);
        }

        #[test]
        fn periodic_is_shift_equivariant(a in arb_seq(7), b in arb_seq(4), s in 0i64..13) {
            let m = a.order() as i64;
            let p = 2 * m - 1;
            let rot = |x: &TwoSidedSeq<Complex64>| {
                let mut out = TwoSidedSeq::zeros(x.order());
                for k in x.indices() {
                    out.set(k, x.get((k - s + m - 1).rem_euclid(p) - (m - 1)));
                }
                out
            };
            let l = periodic_conv(&rot(&a), &b);
            let r = rot(&periodic_conv(&a, &b));
            prop_assert!(max_diff(&l, &r) < 1e-12);
        }

        #[test]
        fn real_inputs_give_real_outputs(v in prop::collection::vec(-1.0f64..1.0, 1..20), w in prop::collection::vec(-1.0f64..1.0, 1..10)) {
            let a = TwoSidedSeq::new(if v.len() % 2 == 1 { v.clone() } else { v[1..].to_vec() });
            let b = TwoSidedSeq::new(if w.len() % 2 == 1 { w.clone() } else { w[1..].to_vec() });
            let out = two_sided_conv(&a.to_complex(), &b.to_complex());
            prop_assert!(out.values().iter().all(|z| z.im.abs() < 1e-13));
        }
    }
}
