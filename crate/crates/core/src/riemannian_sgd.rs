//! Pullback metric, gradients and Christoffel symbols in graph coordinates, and
//! geodesic SGD on `ℝ^{p-p̃} × M`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::implicit_manifold::{chart_at, ConstraintSystem, GraphChart, DEFAULT_KAPPA_MAX};

/// A point `(α, θ)` of the product manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPoint {
    pub alpha: DVector<f64>,
    pub theta: DVector<f64>,
}

impl ProductPoint {
    pub fn new(alpha: DVector<f64>, theta: DVector<f64>) -> Self {
        ProductPoint { alpha, theta }
    }

    pub fn manifold_only(theta: DVector<f64>) -> Self {
        ProductPoint { alpha: DVector::zeros(0), theta }
    }

    pub fn flat_only(alpha: DVector<f64>) -> Self {
        ProductPoint { alpha, theta: DVector::zeros(0) }
    }
}

/// A loss with Euclidean partials in the ambient coordinates.
pub trait Objective {
    fn num_batches(&self) -> usize {
        1
    }

    fn eval(&self, x: &ProductPoint, batch: usize) -> f64;

    /// `(∂L/∂α, ∂L/∂θ)`.
    fn eval_partials(&self, x: &ProductPoint, batch: usize) -> (DVector<f64>, DVector<f64>);

    fn eval_with_partials(&self, x: &ProductPoint, batch: usize) -> (f64, DVector<f64>, DVector<f64>) {
        let (a, t) = self.eval_partials(x, batch);
        (self.eval(x, batch), a, t)
    }

    /// Mean loss over all batches.
    fn full_loss(&self, x: &ProductPoint) -> f64 {
        let n = self.num_batches();
        (0..n).map(|b| self.eval(x, b)).sum::<f64>() / n as f64
    }
}

/// `g = I + Dζ̃ᵀ Dζ̃`.
pub fn metric_at(chart: &GraphChart) -> DMatrix<f64> {
    let dz = &chart.d_zeta_tilde;
    let n = chart.dim();
    DMatrix::identity(n, n) + dz.transpose() * dz
}

/// Chart partials `∂L/∂λ_i = ∂L/∂θ_{β_i} + Σ_k ∂L/∂θ_{v_k} ∂ζ̃_k/∂β_i`.
pub fn chart_partials(chart: &GraphChart, dl_dtheta: &DVector<f64>) -> DVector<f64> {
    let n = chart.dim();
    DVector::from_fn(n, |i, _| {
        let mut s = dl_dtheta[chart.complement[i]];
        for (k, &p) in chart.pivots.iter().enumerate() {
            s += dl_dtheta[p] * chart.d_zeta_tilde[(k, i)];
        }
        s
    })
}

/// Gradient components `(c_flat, c_man)`; `c_man` solves `g c = ∂L/∂λ`.
pub fn gradient_at(
    chart: &GraphChart,
    dl_dtheta: &DVector<f64>,
    dl_dalpha: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let rhs = chart_partials(chart, dl_dtheta);
    let c = metric_at(chart).cholesky().ok_or(Error::SingularMetric)?.solve(&rhs);
    Ok((dl_dalpha.clone(), c))
}

/// `Γ^k_ij` for the manifold block, symmetric in `i, j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelTensor {
    n: usize,
    data: Vec<f64>,
}

impl ChristoffelTensor {
    pub fn zeros(n: usize) -> Self {
        ChristoffelTensor { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    pub fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.data[(i * self.n + j) * self.n + k] = v;
    }

    /// `Σ_ij c_i c_j Γ_ij`.
    pub fn contract(&self, c: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let w = c[i] * c[j];
                if w == 0.0 {
                    continue;
                }
                for k in 0..n {
                    out[k] += w * self.get(k, i, j);
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(other.data.iter()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn from_metric_derivatives(g: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Result<Self> {
        let n = g.nrows();
        let chol = g.clone().cholesky().ok_or(Error::SingularMetric)?;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let w = DVector::from_fn(n, |l, _| 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]));
                let gamma = chol.solve(&w);
                for k in 0..n {
                    out.set(k, i, j, gamma[k]);
                    out.set(k, j, i, gamma[k]);
                }
            }
        }
        Ok(out)
    }
}

/// `∂g_ij/∂β_l`, indexed `[l][(i, j)]`. Requires `D²ζ̃`.
pub fn metric_derivatives(chart: &GraphChart) -> Vec<DMatrix<f64>> {
    let n = chart.dim();
    let dz = &chart.d_zeta_tilde;
    let q = dz.nrows();
    let d2 = chart.d2_zeta_tilde.as_ref().expect("chart lacks second derivatives");
    (0..n)
        .map(|l| {
            DMatrix::from_fn(n, n, |i, j| {
                (0..q).map(|k| dz[(k, i)] * d2.get(k, l, j) + dz[(k, j)] * d2.get(k, l, i)).sum()
            })
        })
        .collect()
}

/// Christoffel symbols from `Dζ̃` and `D²ζ̃`. The chart must carry second derivatives.
pub fn christoffel_at(chart: &GraphChart) -> Result<ChristoffelTensor> {
    ChristoffelTensor::from_metric_derivatives(&metric_at(chart), &metric_derivatives(chart))
}

/// Christoffel symbols from central differences of the metric along the chart.
pub fn christoffel_by_differences<C: ConstraintSystem + ?Sized>(
    sys: &C,
    chart: &GraphChart,
    eps: f64,
    tol: f64,
) -> Result<ChristoffelTensor> {
    let n = chart.dim();
    let metric_at_beta = |beta: &DVector<f64>| -> Result<DMatrix<f64>> {
        let theta = chart.embed(sys, beta, tol, 50)?;
        let c = GraphChart::with_pivots(sys, &theta, &chart.pivots, tol.max(1e-9))?;
        Ok(metric_at(&c))
    };
    let mut dg = Vec::with_capacity(n);
    for l in 0..n {
        let mut bp = chart.beta_star.clone();
        let mut bm = chart.beta_star.clone();
        bp[l] += eps;
        bm[l] -= eps;
        dg.push((metric_at_beta(&bp)? - metric_at_beta(&bm)?) / (2.0 * eps));
    }
    ChristoffelTensor::from_metric_derivatives(&metric_at(chart), &dg)
}

/// `β* - h c`.
pub fn step_first_order(beta_star: &DVector<f64>, c: &DVector<f64>, h: f64) -> DVector<f64> {
    beta_star - c * h
}

/// `β* - h c - ½h² Γ(c, c)`.
pub fn step_second_order(beta_star: &DVector<f64>, c: &DVector<f64>, gamma: &ChristoffelTensor, h: f64) -> DVector<f64> {
    beta_star - c * h - gamma.contract(c) * (0.5 * h * h)
}

/// `ν(ζ̃(β_new), β_new)` by Newton from the chart's Taylor seed.
pub fn retract<C: ConstraintSystem + ?Sized>(
    sys: &C,
    chart: &GraphChart,
    beta_new: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    chart.embed(sys, beta_new, tol, max_iter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepOrder {
    #[default]
    First,
    Second,
}

/// Linear ramp from `start` to `end` over `warmup_epochs`, then constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub start: f64,
    pub end: f64,
    pub warmup_epochs: usize,
}

impl Schedule {
    pub fn constant(h: f64) -> Self {
        Schedule { start: h, end: h, warmup_epochs: 0 }
    }

    pub fn rate(&self, epoch: usize) -> f64 {
        if epoch >= self.warmup_epochs {
            self.end
        } else {
            self.start + (self.end - self.start) * epoch as f64 / self.warmup_epochs as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlatOptimizer {
    Sgd,
    /// Adam after warmup, plain SGD during warmup.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl FlatOptimizer {
    pub fn adam() -> Self {
        FlatOptimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub order: StepOrder,
    pub manifold_rate: Schedule,
    pub flat_rate: Schedule,
    pub retraction_tol: f64,
    pub max_newton_iters: usize,
    pub max_halvings: usize,
    pub seed: u64,
    pub kappa_max: f64,
    /// Residual accepted when charting an iterate.
    pub chart_tol: f64,
    pub epochs: usize,
    pub flat_optimizer: FlatOptimizer,
    pub record_points: bool,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            order: StepOrder::First,
            manifold_rate: Schedule { start: 1e-4, end: 1e-2, warmup_epochs: 8 },
            flat_rate: Schedule { start: 1e-5, end: 2e-4, warmup_epochs: 8 },
            retraction_tol: 1e-11,
            max_newton_iters: 25,
            max_halvings: 10,
            seed: 0,
            kappa_max: DEFAULT_KAPPA_MAX,
            chart_tol: 1e-9,
            epochs: 1,
            flat_optimizer: FlatOptimizer::Sgd,
            record_points: false,
        }
    }
}

impl SgdConfig {
    pub fn with_constant_rates(mut self, manifold: f64, flat: f64) -> Self {
        self.manifold_rate = Schedule::constant(manifold);
        self.flat_rate = Schedule::constant(flat);
        self
    }
}

/// One logged step: loss before the step, residual and manifold step size after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub iter: usize,
    pub epoch: usize,
    pub batch: usize,
    pub loss: f64,
    pub constraint_residual: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub points: Vec<ProductPoint>,
    pub final_point: ProductPoint,
    pub final_loss: f64,
    pub final_residual: f64,
}

impl Trajectory {
    pub fn max_residual(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.constraint_residual))
    }
}

struct AdamState {
    m: DVector<f64>,
    v: DVector<f64>,
    t: i32,
}

/// Stateful geodesic SGD. The manifold block moves by chart steps followed by Newton
/// retraction; the flat block by SGD or Adam.
pub struct GeodesicSgd<'a> {
    constraint: Option<&'a dyn ConstraintSystem>,
    pub config: SgdConfig,
    pub point: ProductPoint,
    rng: ChaCha8Rng,
    pub epoch: usize,
    pub iter: usize,
    decay: f64,
    adam: Option<AdamState>,
}

impl<'a> GeodesicSgd<'a> {
    pub fn new(constraint: Option<&'a dyn ConstraintSystem>, x0: ProductPoint, config: SgdConfig) -> Result<Self> {
        if let Some(sys) = constraint {
            let residual = sys.residual(&x0.theta);
            if !(residual <= config.chart_tol) {
                return Err(Error::NotOnManifold { residual });
            }
        }
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(GeodesicSgd { constraint, config, point: x0, rng, epoch: 0, iter: 0, decay: 1.0, adam: None })
    }

    pub fn constraint_residual(&self) -> f64 {
        self.constraint.map_or(0.0, |s| s.residual(&self.point.theta))
    }

    /// Multiplies both step sizes by `factor` from now on.
    pub fn decay_rates(&mut self, factor: f64) {
        self.decay *= factor;
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn manifold_rate(&self) -> f64 {
        self.config.manifold_rate.rate(self.epoch) * self.decay
    }

    pub fn flat_rate(&self) -> f64 {
        self.config.flat_rate.rate(self.epoch) * self.decay
    }

    fn flat_update(&mut self, grad: &DVector<f64>) {
        let h = self.flat_rate();
        let warm = self.epoch < self.config.flat_rate.warmup_epochs;
        match self.config.flat_optimizer {
            FlatOptimizer::Adam { beta1, beta2, eps } if !warm => {
                let st = self.adam.get_or_insert_with(|| AdamState {
                    m: DVector::zeros(grad.len()),
                    v: DVector::zeros(grad.len()),
                    t: 0,
                });
                st.t += 1;
                let c1 = 1.0 - beta1.powi(st.t);
                let c2 = 1.0 - beta2.powi(st.t);
                for i in 0..grad.len() {
                    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * grad[i];
                    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    self.point.alpha[i] -= h * (st.m[i] / c1) / ((st.v[i] / c2).sqrt() + eps);
                }
            }
            _ => {
                self.point.alpha -= grad * h;
            }
        }
    }

    /// Chart step with step halving; returns the new `θ` and the step size used.
    fn manifold_update(&self, sys: &dyn ConstraintSystem, dl_dtheta: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let cfg = &self.config;
        let mut chart = chart_at(sys, &self.point.theta, cfg.kappa_max, cfg.chart_tol)?;
        let gamma = if cfg.order == StepOrder::Second {
            chart = chart.with_second_order(sys)?;
            Some(christoffel_at(&chart)?)
        } else {
            None
        };
        let (_, c) = gradient_at(&chart, dl_dtheta, &DVector::zeros(0))?;
        let mut h = self.manifold_rate();
        for _ in 0..=cfg.max_halvings {
            let beta = match &gamma {
                Some(g) => step_second_order(&chart.beta_star, &c, g, h),
                None => step_first_order(&chart.beta_star, &c, h),
            };
            if let Ok(theta) = retract(sys, &chart, &beta, cfg.retraction_tol, cfg.max_newton_iters) {
                return Ok((theta, h));
            }
            h *= 0.5;
        }
        Err(Error::StepRejected { halvings: cfg.max_halvings })
    }

    /// One step on `batch`.
    pub fn step<O: Objective + ?Sized>(&mut self, obj: &O, batch: usize) -> Result<StepRecord> {
        let (loss, da, dt) = obj.eval_with_partials(&self.point, batch);
        let mut step_size = self.flat_rate();
        let new_theta = match self.constraint {
            Some(sys) if !self.point.theta.is_empty() => {
                let (theta, h) = self.manifold_update(sys, &dt)?;
                step_size = h;
                Some(theta)
            }
            _ => None,
        };
        if !self.point.alpha.is_empty() {
            self.flat_update(&da);
        }
        if let Some(theta) = new_theta {
            self.point.theta = theta;
        }
        let rec = StepRecord {
            iter: self.iter,
            epoch: self.epoch,
            batch,
            loss,
            constraint_residual: self.constraint_residual(),
            step_size,
        };
        self.iter += 1;
        Ok(rec)
    }

    /// One pass over all batches in a seeded random order.
    pub fn run_epoch<O: Objective + ?Sized>(&mut self, obj: &O) -> Result<Vec<StepRecord>> {
        let mut order: Vec<usize> = (0..obj.num_batches()).collect();
        order.shuffle(&mut self.rng);
        let mut out = Vec::with_capacity(order.len());
        for b in order {
            out.push(self.step(obj, b)?);
        }
        self.epoch += 1;
        Ok(out)
    }
}

/// Runs `config.epochs` epochs from `x0`.
pub fn sgd_run<O: Objective + ?Sized>(
    obj: &O,
    constraint: Option<&dyn ConstraintSystem>,
    x0: ProductPoint,
    config: SgdConfig,
) -> Result<Trajectory> {
    let record_points = config.record_points;
    let epochs = config.epochs;
    let mut opt = GeodesicSgd::new(constraint, x0, config)?;
    let mut records = Vec::new();
    let mut points = Vec::new();
    if record_points {
        points.push(opt.point.clone());
    }
    for _ in 0..epochs {
        let mut order: Vec<usize> = (0..obj.num_batches()).collect();
        order.shuffle(&mut opt.rng);
        for b in order {
            records.push(opt.step(obj, b)?);
            if record_points {
                points.push(opt.point.clone());
            }
        }
        opt.epoch += 1;
    }
    Ok(Trajectory {
        final_loss: obj.full_loss(&opt.point),
        final_residual: opt.constraint_residual(),
        final_point: opt.point,
        records,
        points,
    })
}

/// Largest relative deviation between the analytic gradient on batch 0 and central
/// differences of `L ∘ Φ⁻¹` in chart coordinates and of `L` in `α`.
pub fn fd_gradient_check<O: Objective + ?Sized>(
    obj: &O,
    constraint: Option<&dyn ConstraintSystem>,
    point: &ProductPoint,
    eps: f64,
) -> Result<f64> {
    let (da, dt) = obj.eval_partials(point, 0);
    let mut analytic = da.iter().copied().collect::<Vec<f64>>();
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..point.alpha.len() {
        let mut p = point.clone();
        p.alpha[i] += eps;
        let lp = obj.eval(&p, 0);
        p.alpha[i] -= 2.0 * eps;
        let lm = obj.eval(&p, 0);
        numeric.push((lp - lm) / (2.0 * eps));
    }
    if let Some(sys) = constraint {
        if !point.theta.is_empty() {
            let chart = chart_at(sys, &point.theta, DEFAULT_KAPPA_MAX, 1e-9)?;
            let (_, c) = gradient_at(&chart, &dt, &da)?;
            let n = chart.dim();
            let mut cov = DVector::zeros(n);
            for i in 0..n {
                let mut l = [0.0; 2];
                for (s, sign) in [1.0, -1.0].iter().enumerate() {
                    let mut beta = chart.beta_star.clone();
                    beta[i] += sign * eps;
                    let theta = chart
                        .embed(sys, &beta, 1e-14, 50)
                        .or_else(|_| chart.embed(sys, &beta, 1e-12, 50))?;
                    l[s] = obj.eval(&ProductPoint::new(point.alpha.clone(), theta), 0);
                }
                cov[i] = (l[0] - l[1]) / (2.0 * eps);
            }
            let c_fd = metric_at(&chart).cholesky().ok_or(Error::SingularMetric)?.solve(&cov);
            analytic.extend(c.iter());
            numeric.extend(c_fd.iter());
        }
    }
    let scale = analytic.iter().chain(numeric.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let diff = analytic.iter().zip(numeric.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(diff / scale)
}
