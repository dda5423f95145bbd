//! Linear coefficient head on polynomial latent features, decoded by a wavelet pyramid
//! with one learned filter per coordinate.

use anyhow::{anyhow, ensure, Result};
use cerm_core::constraint_zoo::{QmfSystem, WaveletFilter};
use cerm_core::dft_conv::TwoSidedSeq;
use cerm_core::implicit_manifold::{ConstraintSystem, ProductSystem};
use cerm_core::mra::{dwt_level_periodic, idwt_level_periodic};
use cerm_core::riemannian_sgd::{Objective, ProductPoint};
use cerm_core::{DMatrix, DVector};
use nalgebra::DMatrixView;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Levels {
    pub j0: u32,
    pub j1: u32,
    pub j2: u32,
}

impl Levels {
    pub fn new(j0: u32, j1: u32, j2: u32) -> Result<Self> {
        ensure!(j0 <= j1 && j1 <= j2, "levels must satisfy j0 <= j1 <= j2, got {j0}, {j1}, {j2}");
        Ok(Levels { j0, j1, j2 })
    }

    /// Head outputs per coordinate: `2^{j0}` approximations plus details `j0..j1`.
    pub fn coeffs_per_component(&self) -> usize {
        1 << self.j1
    }

    pub fn top_len(&self) -> usize {
        1 << self.j2
    }
}

/// `[1, z_i, z_i z_j (i <= j)]`.
pub fn poly_features(z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut out = Vec::with_capacity(1 + n + n * (n + 1) / 2);
    out.push(1.0);
    out.extend_from_slice(z);
    for i in 0..n {
        for j in i..n {
            out.push(z[i] * z[j]);
        }
    }
    out
}

/// Per-feature standardization fitted on training data. The constant feature is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let f = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; f];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; f];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m) / n;
            }
        }
        let mut scale: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
        for (i, s) in scale.iter_mut().enumerate() {
            if *s < 1e-12 {
                *s = 1.0;
                if i > 0 {
                    mean[i] = 0.0;
                }
            }
        }
        mean[0] = 0.0;
        scale[0] = 1.0;
        FeatureScaler { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s).collect()
    }
}

/// Approximations at each level `j0..=j2` of one coordinate's synthesis.
#[derive(Debug, Clone)]
pub struct SynthesisCache {
    pub approx: Vec<Vec<f64>>,
    pub details: Vec<Vec<f64>>,
}

/// Pyramid synthesis from a flat coefficient vector `[approx, details j0.., ]`.
pub fn synthesize(coeffs: &[f64], h: &TwoSidedSeq<f64>, lv: Levels) -> Result<SynthesisCache> {
    let mut approx = vec![coeffs[..1 << lv.j0].to_vec()];
    let mut details = Vec::new();
    let mut pos = 1 << lv.j0;
    for j in lv.j0..lv.j2 {
        let n = 1usize << j;
        let d = if j < lv.j1 {
            let d = coeffs[pos..pos + n].to_vec();
            pos += n;
            d
        } else {
            vec![0.0; n]
        };
        let next = idwt_level_periodic(approx.last().unwrap(), &d, h).map_err(|e| anyhow!("{e}"))?;
        details.push(d);
        approx.push(next);
    }
    Ok(SynthesisCache { approx, details })
}

/// Adjoint of [`synthesize`]: gradients with respect to the flat coefficients and the
/// filter taps, given the upstream gradient on the top level.
pub fn synthesize_backward(
    cache: &SynthesisCache,
    upstream: &[f64],
    h: &TwoSidedSeq<f64>,
    lv: Levels,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut gh = vec![0.0; h.len()];
    let mut r = upstream.to_vec();
    let mut detail_grads: Vec<Vec<f64>> = Vec::new();
    for j in (lv.j0..lv.j2).rev() {
        let level = (j - lv.j0) as usize;
        let a = &cache.approx[level];
        let d = &cache.details[level];
        let p = r.len() as i64;
        for (slot, k) in h.indices().enumerate() {
            let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let mut s = 0.0;
            for i in 0..a.len() {
                let two_i = 2 * i as i64;
                s += a[i] * r[(two_i + k).rem_euclid(p) as usize];
                if d[i] != 0.0 {
                    s += sign * d[i] * r[(two_i + 1 - k).rem_euclid(p) as usize];
                }
            }
            gh[slot] += s;
        }
        let (ra, rd) = dwt_level_periodic(&r, h).map_err(|e| anyhow!("{e}"))?;
        if j < lv.j1 {
            detail_grads.push(rd);
        }
        r = ra;
    }
    detail_grads.reverse();
    let mut gc = r;
    for d in detail_grads {
        gc.extend(d);
    }
    Ok((gc, gh))
}

/// `‖v₁−a₁‖ + ‖v₂−a₂‖` and its partials in `v`; the subgradient at a zero residual is 0.
pub fn curve_loss(pred: &[Vec<f64>; 2], target: &[Vec<f64>; 2]) -> (f64, [Vec<f64>; 2]) {
    let mut loss = 0.0;
    let mut grads = [Vec::new(), Vec::new()];
    for s in 0..2 {
        assert_eq!(pred[s].len(), target[s].len(), "prediction and target lengths differ");
        let r: Vec<f64> = pred[s].iter().zip(&target[s]).map(|(p, t)| p - t).collect();
        let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        loss += n;
        grads[s] = if n > 0.0 { r.iter().map(|x| x / n).collect() } else { vec![0.0; r.len()] };
    }
    (loss, grads)
}

/// Weights `W` of shape `(2·2^{j1}) × F` (rows: coordinate 0 block, then coordinate 1)
/// and one filter per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffHeadModel {
    pub levels: Levels,
    pub weights: DMatrix<f64>,
    pub filters: [WaveletFilter; 2],
}

pub struct ForwardCache {
    pub coeffs: [Vec<f64>; 2],
    pub synth: [SynthesisCache; 2],
}

pub struct Gradients {
    pub weights: DMatrix<f64>,
    pub filters: [Vec<f64>; 2],
}

fn head(weights: DMatrixView<f64>, phi: &[f64], n: usize) -> [Vec<f64>; 2] {
    let out = weights * DVector::from_column_slice(phi);
    [out.as_slice()[..n].to_vec(), out.as_slice()[n..].to_vec()]
}

fn forward_raw(
    weights: DMatrixView<f64>,
    filters: [&TwoSidedSeq<f64>; 2],
    lv: Levels,
    phi: &[f64],
) -> Result<ForwardCache> {
    let coeffs = head(weights, phi, lv.coeffs_per_component());
    let synth = [synthesize(&coeffs[0], filters[0], lv)?, synthesize(&coeffs[1], filters[1], lv)?];
    Ok(ForwardCache { coeffs, synth })
}

fn top(cache: &ForwardCache) -> [Vec<f64>; 2] {
    [cache.synth[0].approx.last().unwrap().clone(), cache.synth[1].approx.last().unwrap().clone()]
}

fn backward_raw(
    filters: [&TwoSidedSeq<f64>; 2],
    lv: Levels,
    cache: &ForwardCache,
    upstream: &[Vec<f64>; 2],
) -> Result<(DVector<f64>, [Vec<f64>; 2])> {
    let n = lv.coeffs_per_component();
    let mut gc = DVector::zeros(2 * n);
    let mut gf = [Vec::new(), Vec::new()];
    for s in 0..2 {
        let (c, h) = synthesize_backward(&cache.synth[s], &upstream[s], filters[s], lv)?;
        gc.rows_mut(s * n, n).copy_from_slice(&c);
        gf[s] = h;
    }
    Ok((gc, gf))
}

impl CoeffHeadModel {
    pub fn zeros(levels: Levels, n_features: usize, filters: [WaveletFilter; 2]) -> Self {
        let rows = 2 * levels.coeffs_per_component();
        CoeffHeadModel { levels, weights: DMatrix::zeros(rows, n_features), filters }
    }

    pub fn order(&self) -> usize {
        self.filters[0].order()
    }

    pub fn forward(&self, phi: &[f64]) -> Result<ForwardCache> {
        forward_raw(self.weights.as_view(), [self.filters[0].seq(), self.filters[1].seq()], self.levels, phi)
    }

    pub fn predict(&self, phi: &[f64]) -> Result<[Vec<f64>; 2]> {
        Ok(top(&self.forward(phi)?))
    }

    pub fn backward(&self, phi: &[f64], cache: &ForwardCache, upstream: &[Vec<f64>; 2]) -> Result<Gradients> {
        let (gc, gf) = backward_raw([self.filters[0].seq(), self.filters[1].seq()], self.levels, cache, upstream)?;
        Ok(Gradients { weights: gc * DVector::from_column_slice(phi).transpose(), filters: gf })
    }

    /// `α` is `W` in column-major order, `θ` is both filters stacked.
    pub fn to_point(&self) -> ProductPoint {
        let theta: Vec<f64> = self.filters[0].values().iter().chain(self.filters[1].values()).copied().collect();
        ProductPoint::new(DVector::from_column_slice(self.weights.as_slice()), DVector::from_vec(theta))
    }

    pub fn from_point(levels: Levels, n_features: usize, x: &ProductPoint) -> Self {
        let rows = 2 * levels.coeffs_per_component();
        let p = x.theta.len() / 2;
        CoeffHeadModel {
            levels,
            weights: DMatrix::from_column_slice(rows, n_features, x.alpha.as_slice()),
            filters: [
                WaveletFilter::from_values(x.theta.as_slice()[..p].to_vec()),
                WaveletFilter::from_values(x.theta.as_slice()[p..].to_vec()),
            ],
        }
    }
}

/// Constraint on `θ`: each filter satisfies the QMF conditions of order `M`.
pub fn filter_constraint(order: usize) -> ProductSystem {
    let blocks: Vec<Box<dyn ConstraintSystem>> = vec![Box::new(QmfSystem::new(order)), Box::new(QmfSystem::new(order))];
    ProductSystem::new(blocks)
}

/// Mean curve loss over fixed mini-batches of (features, target) pairs.
pub struct WaveletFitObjective {
    pub levels: Levels,
    pub n_features: usize,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<[Vec<f64>; 2]>,
    pub batches: Vec<Vec<usize>>,
}

impl WaveletFitObjective {
    pub fn new(levels: Levels, features: Vec<Vec<f64>>, targets: Vec<[Vec<f64>; 2]>, batches: Vec<Vec<usize>>) -> Self {
        let n_features = features[0].len();
        WaveletFitObjective { levels, n_features, features, targets, batches }
    }

    fn split<'a>(&self, x: &'a ProductPoint) -> (DMatrixView<'a, f64>, [TwoSidedSeq<f64>; 2]) {
        let rows = 2 * self.levels.coeffs_per_component();
        let w = DMatrixView::from_slice(x.alpha.as_slice(), rows, self.n_features);
        let p = x.theta.len() / 2;
        let f = [
            TwoSidedSeq::new(x.theta.as_slice()[..p].to_vec()),
            TwoSidedSeq::new(x.theta.as_slice()[p..].to_vec()),
        ];
        (w, f)
    }

    pub fn sample_loss(&self, x: &ProductPoint, i: usize) -> f64 {
        let (w, f) = self.split(x);
        let cache = forward_raw(w, [&f[0], &f[1]], self.levels, &self.features[i]).expect("valid levels");
        curve_loss(&top(&cache), &self.targets[i]).0
    }

    pub fn mean_loss(&self, x: &ProductPoint, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.sample_loss(x, i)).sum::<f64>() / idx.len() as f64
    }

    /// Mean loss over every sample.
    pub fn dataset_loss(&self, x: &ProductPoint) -> f64 {
        let all: Vec<usize> = (0..self.features.len()).collect();
        self.mean_loss(x, &all)
    }

    pub fn predict(&self, x: &ProductPoint, phi: &[f64]) -> [Vec<f64>; 2] {
        let (w, f) = self.split(x);
        top(&forward_raw(w, [&f[0], &f[1]], self.levels, phi).expect("valid levels"))
    }
}

impl Objective for WaveletFitObjective {
    fn num_batches(&self) -> usize {
        self.batches.len()
    }

    fn eval(&self, x: &ProductPoint, batch: usize) -> f64 {
        self.mean_loss(x, &self.batches[batch])
    }

    fn eval_partials(&self, x: &ProductPoint, batch: usize) -> (DVector<f64>, DVector<f64>) {
        let (_, a, t) = self.eval_with_partials(x, batch);
        (a, t)
    }

    fn eval_with_partials(&self, x: &ProductPoint, batch: usize) -> (f64, DVector<f64>, DVector<f64>) {
        let (w, f) = self.split(x);
        let idx = &self.batches[batch];
        let scale = 1.0 / idx.len() as f64;
        let rows = w.nrows();
        let p = f[0].len();
        let mut gw = DMatrix::zeros(rows, self.n_features);
        let mut gt = DVector::zeros(2 * p);
        let mut loss = 0.0;
        for &i in idx {
            let phi = &self.features[i];
            let cache = forward_raw(w, [&f[0], &f[1]], self.levels, phi).expect("valid levels");
            let (l, up) = curve_loss(&top(&cache), &self.targets[i]);
            loss += l * scale;
            let (gc, gf) = backward_raw([&f[0], &f[1]], self.levels, &cache, &up).expect("valid levels");
            gw.ger(scale, &gc, &DVector::from_column_slice(phi), 1.0);
            for s in 0..2 {
                for (k, v) in gf[s].iter().enumerate() {
                    gt[s * p + k] += scale * v;
                }
            }
        }
        (loss, DVector::from_column_slice(gw.as_slice()), gt)
    }

    fn full_loss(&self, x: &ProductPoint) -> f64 {
        self.dataset_loss(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cerm_core::mra::{waverec, wavedec, MultiresDecomp};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn loss_examples() {
        let a = [vec![1.0, 2.0], vec![3.0, 4.0]];
        let (l, g) = curve_loss(&a, &a);
        assert_eq!(l, 0.0);
        assert!(g.iter().flatten().all(|&x| x == 0.0));
        let b = [vec![2.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(curve_loss(&b, &a).0, 1.0);
    }

    #[test]
    fn loss_partials_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let p = [rand_vec(8, &mut rng), rand_vec(8, &mut rng)];
            let t = [rand_vec(8, &mut rng), rand_vec(8, &mut rng)];
            let (_, g) = curve_loss(&p, &t);
            let eps = 1e-6;
            for s in 0..2 {
                for i in 0..8 {
                    let mut q = p.clone();
                    q[s][i] += eps;
                    let lp = curve_loss(&q, &t).0;
                    q[s][i] -= 2.0 * eps;
                    let lm = curve_loss(&q, &t).0;
                    assert!(((lp - lm) / (2.0 * eps) - g[s][i]).abs() <= 1e-7);
                }
            }
        }
    }

    #[test]
    fn synthesis_matches_waverec() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = WaveletFilter::daubechies(5);
        for lv in [Levels::new(4, 7, 7).unwrap(), Levels::new(3, 5, 7).unwrap()] {
            let c = rand_vec(1 << lv.j1, &mut rng);
            let ours = synthesize(&c, h.seq(), lv).unwrap();
            let d = MultiresDecomp::from_flat(lv.j0, lv.j1, lv.j2, &c).unwrap();
            let theirs = waverec(&d, h.seq()).unwrap();
            assert_eq!(ours.approx.last().unwrap(), &theirs);
        }
    }

    #[test]
    fn zero_weights_give_zero_curve() {
        let lv = Levels::new(4, 7, 7).unwrap();
        let f = WaveletFilter::daubechies(5);
        let m = CoeffHeadModel::zeros(lv, 6, [f.clone(), f]);
        let y = m.predict(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!(y.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn injected_target_gives_zero_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lv = Levels::new(4, 7, 7).unwrap();
        let f = WaveletFilter::daubechies(5);
        let target = [rand_vec(128, &mut rng), rand_vec(128, &mut rng)];
        let mut m = CoeffHeadModel::zeros(lv, 1, [f.clone(), f.clone()]);
        for s in 0..2 {
            let c = wavedec(&target[s], f.seq(), 4, 7).unwrap().flatten();
            for (i, v) in c.iter().enumerate() {
                m.weights[(s * 128 + i, 0)] = *v;
            }
        }
        let (l, _) = curve_loss(&m.predict(&[1.0]).unwrap(), &target);
        assert!(l < 1e-12);
    }

    #[test]
    fn equal_outputs_imply_equal_heads() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let lv = Levels::new(4, 7, 7).unwrap();
        let f = WaveletFilter::daubechies(5);
        let c = rand_vec(128, &mut rng);
        let y = synthesize(&c, f.seq(), lv).unwrap().approx.pop().unwrap();
        let back = wavedec(&y, f.seq(), 4, 7).unwrap().flatten();
        let err = c.iter().zip(&back).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12);
    }

    #[test]
    fn backward_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for lv in [Levels::new(4, 7, 7).unwrap(), Levels::new(2, 3, 5).unwrap()] {
            let h = WaveletFilter::perturbed_daubechies(5, 0.3, &mut rng).unwrap();
            let c = rand_vec(1 << lv.j1, &mut rng);
            let r = rand_vec(1 << lv.j2, &mut rng);
            let f = |c: &[f64], h: &TwoSidedSeq<f64>| -> f64 {
                let y = synthesize(c, h, lv).unwrap().approx.pop().unwrap();
                y.iter().zip(&r).map(|(a, b)| a * b).sum()
            };
            let cache = synthesize(&c, h.seq(), lv).unwrap();
            let (gc, gh) = synthesize_backward(&cache, &r, h.seq(), lv).unwrap();
            let eps = 1e-6;
            for k in 0..h.values().len() {
                let mut hp = h.values().to_vec();
                hp[k] += eps;
                let lp = f(&c, &TwoSidedSeq::new(hp.clone()));
                hp[k] -= 2.0 * eps;
                let lm = f(&c, &TwoSidedSeq::new(hp));
                let fd = (lp - lm) / (2.0 * eps);
                assert!((fd - gh[k]).abs() <= 1e-6 * gh[k].abs().max(1.0), "tap {k}: {fd} vs {}", gh[k]);
            }
            for i in (0..c.len()).step_by(7) {
                let mut cp = c.clone();
                cp[i] += eps;
                let lp = f(&cp, h.seq());
                cp[i] -= 2.0 * eps;
                let lm = f(&cp, h.seq());
                assert!(((lp - lm) / (2.0 * eps) - gc[i]).abs() <= 1e-7);
            }
        }
    }

    #[test]
    fn backward_is_linear_and_zero_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let lv = Levels::new(4, 7, 7).unwrap();
        let h = WaveletFilter::daubechies(5);
        let c = rand_vec(128, &mut rng);
        let cache = synthesize(&c, h.seq(), lv).unwrap();
        let (g0, h0) = synthesize_backward(&cache, &[0.0; 128], h.seq(), lv).unwrap();
        assert!(g0.iter().chain(&h0).all(|&v| v == 0.0));
        let r1 = rand_vec(128, &mut rng);
        let r2 = rand_vec(128, &mut rng);
        let r12: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| a + b).collect();
        let (a1, b1) = synthesize_backward(&cache, &r1, h.seq(), lv).unwrap();
        let (a2, b2) = synthesize_backward(&cache, &r2, h.seq(), lv).unwrap();
        let (a3, b3) = synthesize_backward(&cache, &r12, h.seq(), lv).unwrap();
        for i in 0..a3.len() {
            assert!((a1[i] + a2[i] - a3[i]).abs() < 1e-12);
        }
        for i in 0..b3.len() {
            assert!((b1[i] + b2[i] - b3[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn point_round_trip() {
        let lv = Levels::new(3, 4, 5).unwrap();
        let f = WaveletFilter::daubechies(4);
        let mut m = CoeffHeadModel::zeros(lv, 3, [f.clone(), WaveletFilter::haar(4)]);
        m.weights[(5, 2)] = 1.5;
        let x = m.to_point();
        assert_eq!(CoeffHeadModel::from_point(lv, 3, &x), m);
        assert!(filter_constraint(4).residual(&x.theta) < 1e-14);
    }

    #[test]
    fn scaler_guards_constant_columns() {
        let rows = vec![vec![1.0, 2.0, 0.0], vec![1.0, 4.0, 0.0]];
        let s = FeatureScaler::fit(&rows);
        assert_eq!(s.apply(&rows[0]), vec![1.0, -1.0, 0.0]);
        assert_eq!(poly_features(&[2.0, 3.0]), vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);
    }
}
