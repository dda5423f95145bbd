//! Closed curves as truncated Fourier series in normalized time.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::dft_conv::{two_sided_conv, TwoSidedSeq};
use crate::error::{Error, Result};
use crate::fft;

pub type Point = [f64; 2];

/// One-sided Fourier coefficients `η_m`, `m = 0..N-1`, for each coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicContour {
    pub fourier: [Vec<Complex64>; 2],
    pub tau: f64,
    pub midpoint: Point,
}

impl PeriodicContour {
    /// Builds a contour from coefficients and fills in the midpoint.
    pub fn from_coefficients(fourier: [Vec<Complex64>; 2], tau: f64) -> Result<Self> {
        let mut c = PeriodicContour { fourier, tau, midpoint: [0.0, 0.0] };
        c.midpoint = midpoint_green(&c)?;
        Ok(c)
    }

    pub fn n_coeffs(&self) -> usize {
        self.fourier[0].len()
    }

    /// Coefficients of coordinate `s` as a two-sided sequence `η_{-m} = conj(η_m)`.
    pub fn two_sided(&self, s: usize) -> TwoSidedSeq<Complex64> {
        let eta = &self.fourier[s];
        let n = eta.len();
        let mut out = TwoSidedSeq::zeros(n);
        for (m, &c) in eta.iter().enumerate() {
            out.set(m as i64, c);
            if m > 0 {
                out.set(-(m as i64), c.conj());
            }
        }
        out
    }

    /// Signed area enclosed by the Fourier curve.
    pub fn area(&self) -> f64 {
        let x = self.two_sided(0);
        let dy = derivative(&self.two_sided(1));
        zeroth2(&x, &dy).re
    }

    pub fn translated(&self, a: f64, b: f64) -> Self {
        let mut c = self.clone();
        c.fourier[0][0] += a;
        c.fourier[1][0] += b;
        c.midpoint = [self.midpoint[0] + a, self.midpoint[1] + b];
        c
    }
}

fn derivative(a: &TwoSidedSeq<Complex64>) -> TwoSidedSeq<Complex64> {
    let mut out = a.clone();
    for k in a.indices() {
        out.set(k, a.get(k) * Complex64::new(0.0, 2.0 * PI * k as f64));
    }
    out
}

/// `(a ∗ b)_0`.
fn zeroth2(a: &TwoSidedSeq<Complex64>, b: &TwoSidedSeq<Complex64>) -> Complex64 {
    a.indices().map(|k| a.get(k) * b.get(-k)).sum()
}

/// Signed shoelace area; positive for anticlockwise order.
pub fn signed_area(points: &[Point]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let p = points[i];
            let q = points[(i + 1) % n];
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Centroid of the polygon region.
pub fn shoelace_centroid(points: &[Point]) -> Result<Point> {
    let a = signed_area(points);
    if a == 0.0 || !a.is_finite() {
        return Err(Error::ZeroArea);
    }
    let n = points.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        let cr = p[0] * q[1] - q[0] * p[1];
        cx += (p[0] + q[0]) * cr;
        cy += (p[1] + q[1]) * cr;
    }
    Ok([cx / (6.0 * a), cy / (6.0 * a)])
}

pub fn perimeter(points: &[Point]) -> f64 {
    let n = points.len();
    (0..n).map(|i| dist(points[i], points[(i + 1) % n])).sum()
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Point, q: Point, r: Point, o: f64| {
        o == 0.0 && r[0] >= p[0].min(q[0]) && r[0] <= p[0].max(q[0]) && r[1] >= p[1].min(q[1]) && r[1] <= p[1].max(q[1])
    };
    on(c, d, a, d1) || on(c, d, b, d2) || on(a, b, c, d3) || on(a, b, d, d4)
}

/// True when no two non-adjacent edges of the closed polygon meet.
pub fn is_simple(points: &[Point]) -> bool {
    let n = points.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (points[i], points[(i + 1) % n]);
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (points[j], points[(j + 1) % n]);
            if segments_cross(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Arc-length resampling at `2N-1` equispaced normalized times followed by a DFT.
///
/// Clockwise input is reversed first.
pub fn contour_from_points(points: &[Point], n: usize) -> Result<PeriodicContour> {
    if points.len() < 3 || n == 0 {
        return Err(Error::DegeneratePolygon);
    }
    let mut pts = points.to_vec();
    let area = signed_area(&pts);
    if area < 0.0 {
        pts.reverse();
    }
    let tau = perimeter(&pts);
    if !(tau > 0.0) || !(area.abs() > 1e-14 * tau * tau) {
        return Err(Error::DegeneratePolygon);
    }
    let samples = resample(&pts, tau, 2 * n - 1);
    let len = samples.len() as f64;
    let mut fourier = [Vec::new(), Vec::new()];
    for (s, f) in fourier.iter_mut().enumerate() {
        let x: Vec<Complex64> = samples.iter().map(|p| Complex64::new(p[s], 0.0)).collect();
        *f = fft::dft(&x).into_iter().take(n).map(|c| c / len).collect();
    }
    PeriodicContour::from_coefficients(fourier, tau)
}

fn resample(pts: &[Point], tau: f64, count: usize) -> Vec<Point> {
    let n = pts.len();
    let mut out = Vec::with_capacity(count);
    let mut edge = 0;
    let mut start = 0.0;
    let mut edge_len = dist(pts[0], pts[1 % n]);
    for l in 0..count {
        let s = tau * l as f64 / count as f64;
        while s > start + edge_len && edge < n - 1 {
            start += edge_len;
            edge += 1;
            edge_len = dist(pts[edge], pts[(edge + 1) % n]);
        }
        let a = pts[edge];
        let b = pts[(edge + 1) % n];
        let w = if edge_len > 0.0 { ((s - start) / edge_len).clamp(0.0, 1.0) } else { 0.0 };
        out.push([a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]);
    }
    out
}

/// `x(t) = Re η_0 + 2 Re Σ_{m≥1} η_m e^{2πimt}` for each coordinate.
pub fn eval_contour(c: &PeriodicContour, t: f64) -> Point {
    let mut out = [0.0; 2];
    let frac = t - t.floor();
    for (s, o) in out.iter_mut().enumerate() {
        let eta = &c.fourier[s];
        let mut v = eta.first().map_or(0.0, |z| z.re);
        for (m, z) in eta.iter().enumerate().skip(1) {
            v += 2.0 * (z * Complex64::from_polar(1.0, 2.0 * PI * m as f64 * frac)).re;
        }
        *o = v;
    }
    out
}

/// `count` points at `t = i/count`.
pub fn sample_contour(c: &PeriodicContour, count: usize) -> Vec<Point> {
    (0..count).map(|i| eval_contour(c, i as f64 / count as f64)).collect()
}

/// Relative RMS residual of the least-squares line through `(x_i, y_i)`.
fn line_fit_residual(ys: &[f64], x0: usize) -> f64 {
    let n = ys.len() as f64;
    let xs: Vec<f64> = (0..ys.len()).map(|i| (x0 + i) as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if syy <= 0.0 {
        return 0.0;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - my - slope * (x - mx);
            r * r
        })
        .sum();
    (rss / syy).sqrt()
}

/// Cut-off index for one coordinate: the first `m₀ ≥ 1` whose tail cumulative sums
/// are fit by a line with relative residual below `delta`.
pub fn truncation_index(eta: &[Complex64], delta: f64) -> usize {
    let n = eta.len();
    if n < 4 {
        return n.saturating_sub(1);
    }
    for m0 in 1..n - 2 {
        let mut acc = 0.0;
        let sums: Vec<f64> = eta[m0..]
            .iter()
            .map(|z| {
                acc += z.norm();
                acc
            })
            .collect();
        if line_fit_residual(&sums, m0) < delta {
            return m0;
        }
    }
    n - 1
}

/// Zeros every coefficient above the per-coordinate cut-off. Returns the cut-offs too.
pub fn truncate_fourier(c: &PeriodicContour, delta: f64) -> (PeriodicContour, [usize; 2]) {
    let mut out = c.clone();
    let mut cut = [0; 2];
    for s in 0..2 {
        cut[s] = truncation_index(&c.fourier[s], delta);
        for z in out.fourier[s].iter_mut().skip(cut[s] + 1) {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    if let Ok(m) = midpoint_green(&out) {
        out.midpoint = m;
    }
    (out, cut)
}

/// Region centroid by Green's theorem:
/// `c₁ = -(x∗y∗x′)₀ / (x∗y′)₀`, `c₂ = (x∗y∗y′)₀ / (x∗y′)₀`.
pub fn midpoint_green(c: &PeriodicContour) -> Result<Point> {
    let x = c.two_sided(0);
    let y = c.two_sided(1);
    let dx = derivative(&x);
    let dy = derivative(&y);
    let area = zeroth2(&x, &dy).re;
    let scale = x.indices().map(|k| x.get(k).norm_sqr() + y.get(k).norm_sqr()).sum::<f64>();
    if !(area.abs() > 1e-14 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::ZeroArea);
    }
    let xy = two_sided_conv(&x, &y);
    let c1 = -zeroth2(&xy, &dx).re / area;
    let c2 = zeroth2(&xy, &dy).re / area;
    Ok([c1, c2])
}

/// Cyclic shift so the point with the smallest angle to the positive `x` axis seen
/// from `c` comes first. Ties prefer the upper half plane, then the lower index.
pub fn canonical_start(points: &[Point], c: Point) -> Vec<Point> {
    if points.is_empty() {
        return Vec::new();
    }
    let key = |p: &Point| {
        let dx = p[0] - c[0];
        let dy = p[1] - c[1];
        let r = dx.hypot(dy);
        let ang = if r > 0.0 { (dx / r).clamp(-1.0, 1.0).acos() } else { f64::INFINITY };
        (ang, dy < 0.0)
    };
    let mut best = 0;
    let mut best_key = key(&points[0]);
    for (i, p) in points.iter().enumerate().skip(1) {
        let k = key(p);
        if k.0 < best_key.0 || (k.0 == best_key.0 && !k.1 && best_key.1) {
            best = i;
            best_key = k;
        }
    }
    let mut out = points[best..].to_vec();
    out.extend_from_slice(&points[..best]);
    out
}

/// Even-odd fill of a polygon on a `grid × grid` lattice of pixel centers.
fn rasterize(poly: &[Point], lo: Point, step: Point, grid: usize) -> Vec<bool> {
    let mut mask = vec![false; grid * grid];
    let n = poly.len();
    let mut xs = Vec::new();
    for row in 0..grid {
        let y = lo[1] + (row as f64 + 0.5) * step[1];
        xs.clear();
        for i in 0..n {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            if (a[1] <= y) != (b[1] <= y) {
                xs.push(a[0] + (y - a[1]) / (b[1] - a[1]) * (b[0] - a[0]));
            }
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        for pair in xs.chunks_exact(2) {
            let c0 = ((pair[0] - lo[0]) / step[0] - 0.5).ceil().max(0.0) as usize;
            let c1 = ((pair[1] - lo[0]) / step[0] - 0.5).floor();
            if c1 < 0.0 {
                continue;
            }
            let c1 = (c1 as usize).min(grid - 1);
            for col in c0..=c1 {
                mask[row * grid + col] ^= true;
            }
        }
    }
    mask
}

/// `2|A∩B| / (|A|+|B|)` for two polygons rasterized over their joint bounding box.
/// A degenerate polygon against a proper one scores 0; two degenerate ones are an error.
pub fn rasterized_dice_polygons(a: &[Point], b: &[Point], grid: usize) -> Result<f64> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in a.iter().chain(b.iter()) {
        for s in 0..2 {
            lo[s] = lo[s].min(p[s]);
            hi[s] = hi[s].max(p[s]);
        }
    }
    let step = [(hi[0] - lo[0]) / grid as f64, (hi[1] - lo[1]) / grid as f64];
    if !(step[0] > 0.0 && step[1] > 0.0) {
        return Err(Error::EmptyMask);
    }
    let ma = rasterize(a, lo, step, grid);
    let mb = rasterize(b, lo, step, grid);
    let na = ma.iter().filter(|&&v| v).count();
    let nb = mb.iter().filter(|&&v| v).count();
    if na + nb == 0 {
        return Err(Error::EmptyMask);
    }
    let both = ma.iter().zip(mb.iter()).filter(|(&x, &y)| x && y).count();
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

/// Number of points used to turn a contour into a polygon for rasterization.
pub const DICE_SAMPLES: usize = 1024;

pub fn rasterized_dice(a: &PeriodicContour, b: &PeriodicContour, grid: usize) -> Result<f64> {
    rasterized_dice_polygons(&sample_contour(a, DICE_SAMPLES), &sample_contour(b, DICE_SAMPLES), grid)
}
