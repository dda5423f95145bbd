//! Counts zeros of the refinement mask inside an ellipse around `[0, 1/4]`.

use core::f64::consts::PI;
use num_complex::Complex64;

use crate::dft_conv::TwoSidedSeq;
use crate::error::{Error, Result};
use crate::mra::{mask_derivative_complex, mask_eval_complex};

pub const WINDING_RADIUS: f64 = 0.3;
pub const WINDING_N_QUAD: usize = 512;
pub const WINDING_THRESHOLD: f64 = 1e-6;

/// `(1/2πi) ∮ H'/H dz` over the ellipse with foci `0` and `1/4` whose semi-axes sum to `r`.
///
/// The integrand is periodic and analytic in the parameter, so the trapezoid rule
/// with `n_quad` nodes converges geometrically.
pub fn winding_zero_count(h: &TwoSidedSeq<f64>, r: f64, n_quad: usize) -> Result<usize> {
    let f = 0.125;
    assert!(r > f, "axis sum must exceed the focal distance");
    let a = 0.5 * (r + f * f / r);
    let b = 0.5 * (r - f * f / r);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut min_abs = f64::INFINITY;
    for j in 0..n_quad {
        let t = 2.0 * PI * j as f64 / n_quad as f64;
        let z = Complex64::new(f + a * t.cos(), b * t.sin());
        let dz = Complex64::new(-a * t.sin(), b * t.cos());
        let hv = mask_eval_complex(h, z);
        min_abs = min_abs.min(hv.norm());
        acc += mask_derivative_complex(h, z) / hv * dz;
    }
    if !(min_abs >= WINDING_THRESHOLD) {
        return Err(Error::ZeroOnContour { min_abs });
    }
    let count = (acc / (n_quad as f64) / Complex64::new(0.0, 1.0)).re;
    Ok(count.round().max(0.0) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint_zoo::WaveletFilter;
    use core::f64::consts::SQRT_2;

    #[test]
    fn haar_and_d4_have_no_zeros() {
        for f in [WaveletFilter::haar(3), WaveletFilter::daubechies(3), WaveletFilter::embed(4, 0, &WaveletFilter::daubechies_taps(2))] {
            assert_eq!(winding_zero_count(f.seq(), 0.3, 512), Ok(0));
        }
    }

    #[test]
    fn constant_mask() {
        let h = TwoSidedSeq::from_taps(2, 0, &[SQRT_2]);
        assert_eq!(winding_zero_count(&h, 0.3, 512), Ok(0));
    }

    #[test]
    fn planted_root_is_counted() {
        let h = TwoSidedSeq::from_taps(3, 0, &[1.0, -SQRT_2, 1.0]);
        assert!(winding_zero_count(&h, 0.3, 512).unwrap() >= 1);
        assert_eq!(winding_zero_count(&h, 0.3, 512), winding_zero_count(&h, 0.3, 512));
    }

    #[test]
    fn zero_on_contour_detected() {
        // H vanishes at ξ = 1/8 + a, the right end of the major axis
        let f: f64 = 0.125;
        let r: f64 = 0.3;
        let xi = f + 0.5 * (r + f * f / r);
        let hc = TwoSidedSeq::from_taps(3, 0, &[1.0, -2.0 * (2.0 * PI * xi).cos(), 1.0]);
        assert!(matches!(winding_zero_count(&hc, r, 512), Err(Error::ZeroOnContour { .. })));
    }
}
