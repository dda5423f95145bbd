//! Synthetic ellipse and star outlines with wavelet-coefficient targets.

use std::f64::consts::{PI, TAU};

use anyhow::{anyhow, Result};
use cerm_core::contour::{canonical_start, contour_from_points, eval_contour, is_simple, truncate_fourier, Point};
use cerm_core::mra::init_coeffs_from_samples;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// `[R, c2, s2, c3, s3, …, c7, s7, cx, cy]`.
pub const LATENT_DIM: usize = 15;
pub const MIN_LOBES: usize = 2;
pub const MAX_LOBES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ellipse,
    Star,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FamilyChoice {
    Ellipse,
    Star,
    #[default]
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeParams {
    pub n_points: usize,
    pub n_fourier: usize,
    pub truncate: bool,
    pub delta_n: f64,
    pub radius: [f64; 2],
    pub ellipse_eccentricity: [f64; 2],
    pub star_amplitude: [f64; 2],
    pub center: f64,
}

impl Default for ShapeParams {
    fn default() -> Self {
        ShapeParams {
            n_points: 256,
            n_fourier: 64,
            truncate: true,
            delta_n: 0.1,
            radius: [0.8, 1.2],
            ellipse_eccentricity: [0.05, 0.3],
            star_amplitude: [0.05, 0.15],
            center: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSample {
    pub family: Family,
    pub latent: Vec<f64>,
    pub points: Vec<Point>,
    /// Top-level approximation coefficients per coordinate, length `2^{j2}`.
    pub target: [Vec<f64>; 2],
}

fn lobe_slot(l: usize) -> usize {
    1 + 2 * (l - MIN_LOBES)
}

fn draw_latent<R: Rng>(rng: &mut R, family: Family, p: &ShapeParams) -> Vec<f64> {
    let mut z = vec![0.0; LATENT_DIM];
    z[0] = rng.gen_range(p.radius[0]..p.radius[1]);
    match family {
        Family::Ellipse => {
            let e = rng.gen_range(p.ellipse_eccentricity[0]..p.ellipse_eccentricity[1]);
            let phi = rng.gen_range(0.0..PI);
            z[1] = e * (2.0 * phi).cos();
            z[2] = e * (2.0 * phi).sin();
        }
        Family::Star => {
            let l = rng.gen_range(3..=MAX_LOBES);
            let eps = rng.gen_range(p.star_amplitude[0]..p.star_amplitude[1]);
            let phi = rng.gen_range(0.0..TAU / l as f64);
            z[lobe_slot(l)] = eps * (l as f64 * phi).cos();
            z[lobe_slot(l) + 1] = eps * (l as f64 * phi).sin();
        }
    }
    z[13] = rng.gen_range(-p.center..p.center);
    z[14] = rng.gen_range(-p.center..p.center);
    z
}

/// Outline points, anticlockwise.
pub fn outline(family: Family, z: &[f64], n: usize) -> Vec<Point> {
    let (cx, cy) = (z[13], z[14]);
    (0..n)
        .map(|i| {
            let t = TAU * i as f64 / n as f64;
            match family {
                Family::Ellipse => {
                    let e = z[1].hypot(z[2]);
                    let phi = 0.5 * z[2].atan2(z[1]);
                    let (a, b) = (z[0] * (1.0 + e), z[0] * (1.0 - e));
                    let (x, y) = (a * t.cos(), b * t.sin());
                    [cx + x * phi.cos() - y * phi.sin(), cy + x * phi.sin() + y * phi.cos()]
                }
                Family::Star => {
                    let mut r = 1.0;
                    for l in MIN_LOBES..=MAX_LOBES {
                        let s = lobe_slot(l);
                        r += z[s] * (l as f64 * t).cos() + z[s + 1] * (l as f64 * t).sin();
                    }
                    r *= z[0];
                    [cx + r * t.cos(), cy + r * t.sin()]
                }
            }
        })
        .collect()
}

/// Contour, canonical start, optional truncation, then the sample-value coefficients.
pub fn target_from_points(points: &[Point], j2: u32, order: usize, p: &ShapeParams) -> Result<[Vec<f64>; 2]> {
    let first = contour_from_points(points, p.n_fourier).map_err(|e| anyhow!("{e}"))?;
    let reordered = canonical_start(points, first.midpoint);
    let mut c = contour_from_points(&reordered, p.n_fourier).map_err(|e| anyhow!("{e}"))?;
    if p.truncate {
        c = truncate_fourier(&c, p.delta_n).0;
    }
    let mut out = [Vec::new(), Vec::new()];
    for (s, o) in out.iter_mut().enumerate() {
        *o = init_coeffs_from_samples(|t| eval_contour(&c, t)[s], j2, order).map_err(|e| anyhow!("{e}"))?;
    }
    Ok(out)
}

/// Curve points encoded by top-level coefficients.
pub fn coeffs_to_points(c: &[Vec<f64>; 2]) -> Vec<Point> {
    let scale = (c[0].len() as f64).sqrt();
    c[0].iter().zip(c[1].iter()).map(|(x, y)| [x * scale, y * scale]).collect()
}

/// Deterministic per seed. Samples whose target curve self-intersects are redrawn.
pub fn synthesize_shapes(
    seed: u64,
    count: usize,
    family: FamilyChoice,
    j2: u32,
    order: usize,
    p: &ShapeParams,
) -> Result<Vec<ShapeSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut redraws = 0;
    while out.len() < count {
        let fam = match family {
            FamilyChoice::Ellipse => Family::Ellipse,
            FamilyChoice::Star => Family::Star,
            FamilyChoice::Mixed => {
                if rng.gen_bool(0.5) {
                    Family::Ellipse
                } else {
                    Family::Star
                }
            }
        };
        let latent = draw_latent(&mut rng, fam, p);
        let points = outline(fam, &latent, p.n_points);
        let target = target_from_points(&points, j2, order, p)?;
        if !is_simple(&points) || !is_simple(&coeffs_to_points(&target)) {
            redraws += 1;
            if redraws > 100 * count {
                return Err(anyhow!("could not draw simple shapes"));
            }
            continue;
        }
        out.push(ShapeSample { family: fam, latent, points, target });
    }
    Ok(out)
}
