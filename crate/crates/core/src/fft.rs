//! In-place radix-2 FFT with a Bluestein fallback for other lengths.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

fn twiddles(n: usize, sign: f64) -> Vec<Complex64> {
    (0..n / 2)
        .map(|k| {
            let a = sign * 2.0 * PI * (k as f64) / (n as f64);
            Complex64::new(a.cos(), a.sin())
        })
        .collect()
}

fn radix2(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    if n <= 1 {
        return;
    }
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let tw = twiddles(n, if inverse { 1.0 } else { -1.0 });
    let mut len = 2;
    while len <= n {
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let w = tw[k * stride];
                let u = buf[start + k];
                let v = buf[start + k + len / 2] * w;
                buf[start + k] = u + v;
                buf[start + k + len / 2] = u - v;
            }
        }
        len <<= 1;
    }
}

fn bluestein(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = input.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let m = (2 * n - 1).next_power_of_two();
    // k^2 reduced mod 2n keeps the chirp angle small and exact
    let chirp: Vec<Complex64> = (0..n)
        .map(|k| {
            let r = ((k as u128 * k as u128) % (2 * n as u128)) as f64;
            let a = sign * PI * r / n as f64;
            Complex64::new(a.cos(), a.sin())
        })
        .collect();
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..n {
        a[k] = input[k] * chirp[k];
    }
    let mut b = vec![Complex64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    radix2(&mut a, false);
    radix2(&mut b, false);
    for (x, y) in a.iter_mut().zip(b.iter()) {
        *x *= *y;
    }
    radix2(&mut a, true);
    let scale = 1.0 / m as f64;
    (0..n).map(|k| a[k] * scale * chirp[k]).collect()
}

/// Unnormalized forward DFT (kernel e^{-2πi jk/n}) of arbitrary length.
pub fn dft(input: &[Complex64]) -> Vec<Complex64> {
    transform(input, false)
}

/// Inverse DFT including the 1/n factor.
pub fn idft(input: &[Complex64]) -> Vec<Complex64> {
    let n = input.len();
    let mut out = transform(input, true);
    let s = 1.0 / n as f64;
    for x in out.iter_mut() {
        *x *= s;
    }
    out
}

fn transform(input: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let n = input.len();
    if n <= 1 {
        return input.to_vec();
    }
    if n.is_power_of_two() {
        let mut buf = input.to_vec();
        radix2(&mut buf, inverse);
        buf
    } else {
        bluestein(input, inverse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[Complex64], sign: f64) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (j, v)| {
                    let a = sign * 2.0 * PI * ((j * k) % n) as f64 / n as f64;
                    acc + v * Complex64::new(a.cos(), a.sin())
                })
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos() - 0.2))
            .collect()
    }

    #[test]
    fn matches_naive_for_many_lengths() {
        for n in [1usize, 2, 3, 5, 8, 12, 17, 31, 64, 100, 127] {
            let x = signal(n);
            let fast = dft(&x);
            let slow = naive(&x, -1.0);
            for (a, b) in fast.iter().zip(slow.iter()) {
                assert!((a - b).norm() < 1e-11 * n as f64, "n={n}");
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        for n in [7usize, 16, 45] {
            let x = signal(n);
            let back = idft(&dft(&x));
            for (a, b) in back.iter().zip(x.iter()) {
                assert!((a - b).norm() < 1e-13);
            }
        }
    }
}
