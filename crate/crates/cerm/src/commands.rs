//! The five experiments. Each writes its artifacts plus `metrics.json` into the output
//! directory and reports whether its assertions held.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use cerm_core::constraint_zoo::{
    find_qmf, winding_zero_count, QmfSearch, SphereSystem, WaveletFilter, WINDING_N_QUAD, WINDING_RADIUS,
};
use cerm_core::contour::{contour_from_points, eval_contour, rasterized_dice_polygons};
use cerm_core::dft_conv::TwoSidedSeq;
use cerm_core::implicit_manifold::ConstraintSystem;
use cerm_core::mra::{dwt_level_periodic, idwt_level_periodic, init_coeffs_from_samples, waverec, wavedec};
use cerm_core::riemannian_sgd::{fd_gradient_check, sgd_run, GeodesicSgd, Objective, ProductPoint, SgdConfig};
use cerm_core::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{ContourFitConfig, DwtRoundtripConfig, GradCheckConfig, QmfFindConfig, SphereDemoConfig};
use crate::io::{write_json, write_trajectory_csv, ContourJson, DecompositionJson, FilterJson};
use crate::io::read_points_csv;
use crate::model::{filter_constraint, poly_features, FeatureScaler, Levels, WaveletFitObjective};
use crate::shapes::{coeffs_to_points, synthesize_shapes, FamilyChoice, ShapeParams, ShapeSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SphereDemo,
    QmfFind,
    DwtRoundtrip,
    GradCheck,
    ContourFit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SphereDemo => "sphere-demo",
            Command::QmfFind => "qmf-find",
            Command::DwtRoundtrip => "dwt-roundtrip",
            Command::GradCheck => "grad-check",
            Command::ContourFit => "contour-fit",
        }
    }
}

/// Named quantities plus the list of failed assertions.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub metrics: Map<String, Value>,
    pub failures: Vec<String>,
}

impl Report {
    pub fn set<T: Serialize>(&mut self, key: &str, value: T) {
        self.metrics.insert(key.to_string(), serde_json::to_value(value).expect("serializable metric"));
    }

    pub fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> Value {
        let mut m = self.metrics.clone();
        m.insert("passed".into(), Value::Bool(self.passed()));
        m.insert("failures".into(), json!(self.failures));
        Value::Object(m)
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).and_then(Value::as_f64)
    }
}

fn load<T: for<'de> serde::Deserialize<'de> + Default>(config: Option<&Path>) -> Result<T> {
    match config {
        Some(p) => crate::io::read_json(p),
        None => Ok(T::default()),
    }
}

/// Loads the config, applies the seed override, runs, and writes `metrics.json`.
pub fn run(cmd: Command, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<Report> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let start = Instant::now();
    let mut report = match cmd {
        Command::SphereDemo => {
            let mut c: SphereDemoConfig = load(config)?;
            c.seed = seed.unwrap_or(c.seed);
            sphere_demo(&c, out)?
        }
        Command::QmfFind => {
            let mut c: QmfFindConfig = load(config)?;
            c.seed = seed.unwrap_or(c.seed);
            qmf_find(&c, out)?
        }
        Command::DwtRoundtrip => {
            let mut c: DwtRoundtripConfig = load(config)?;
            c.seed = seed.unwrap_or(c.seed);
            dwt_roundtrip(&c, out)?
        }
        Command::GradCheck => {
            let mut c: GradCheckConfig = load(config)?;
            c.seed = seed.unwrap_or(c.seed);
            grad_check(&c, out)?
        }
        Command::ContourFit => {
            let mut c: ContourFitConfig = load(config)?;
            c.seed = seed.unwrap_or(c.seed);
            contour_fit(&c, out)?
        }
    };
    report.set("command", cmd.name());
    report.set("runtime_s", start.elapsed().as_secs_f64());
    write_json(&out.join("metrics.json"), &report.to_json())?;
    Ok(report)
}

/// Failure record written when a run aborts with an error.
pub fn write_failure(cmd: Command, out: &Path, err: &anyhow::Error) -> Result<PathBuf> {
    let path = out.join("failure.json");
    let chain: Vec<String> = err.chain().map(|e| e.to_string()).collect();
    write_json(&path, &json!({ "command": cmd.name(), "passed": false, "error": err.to_string(), "causes": chain }))?;
    Ok(path)
}

fn core_err(e: cerm_core::Error) -> anyhow::Error {
    anyhow!("{e}")
}

fn winding(h: &TwoSidedSeq<f64>) -> Result<usize> {
    winding_zero_count(h, WINDING_RADIUS, WINDING_N_QUAD).map_err(core_err)
}

fn sub_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct SphereTarget(DVector<f64>);

impl Objective for SphereTarget {
    fn eval(&self, x: &ProductPoint, _: usize) -> f64 {
        (&x.theta - &self.0).norm_squared()
    }

    fn eval_partials(&self, x: &ProductPoint, _: usize) -> (DVector<f64>, DVector<f64>) {
        (DVector::zeros(0), (&x.theta - &self.0) * 2.0)
    }
}

/// `‖θ − target‖²` on the unit sphere in `ℝ³`.
pub fn sphere_demo(c: &SphereDemoConfig, out: &Path) -> Result<Report> {
    let target = DVector::from_column_slice(&c.target).normalize();
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let start = match c.start {
        Some(s) => DVector::from_column_slice(&s),
        None => loop {
            let v = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let n = v.norm();
            if n > 0.1 && n <= 1.0 && v.dot(&target) / n > -0.9 {
                break v;
            }
        },
    };
    let start = start.normalize();
    let sys = SphereSystem::new(3);
    let cfg = SgdConfig { epochs: c.steps, order: c.order.into(), seed: c.seed, ..SgdConfig::default() }
        .with_constant_rates(c.rate, 0.0);
    let traj = sgd_run(&SphereTarget(target), Some(&sys), ProductPoint::manifold_only(start.clone()), cfg)
        .map_err(core_err)?;
    write_trajectory_csv(&out.join("trajectory.csv"), &traj.records)?;
    let mut r = Report::default();
    r.set("seed", c.seed);
    r.set("start", start.as_slice());
    r.set("final_point", traj.final_point.theta.as_slice());
    r.set("final_loss", traj.final_loss);
    r.set("max_constraint_residual", traj.max_residual());
    r.set("steps", traj.records.len());
    r.check(traj.final_loss <= c.max_final_loss, format!("final loss {:e} > {:e}", traj.final_loss, c.max_final_loss));
    r.check(
        traj.max_residual() <= c.max_residual,
        format!("constraint residual {:e} > {:e}", traj.max_residual(), c.max_residual),
    );
    Ok(r)
}

/// Random-start search for a QMF filter of the configured order.
pub fn qmf_find(c: &QmfFindConfig, out: &Path) -> Result<Report> {
    c.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let opts = QmfSearch {
        tol: c.tol,
        max_iter: c.max_iter,
        attempts: c.attempts,
        stopband: c.stopband,
        polish_steps: c.polish_steps,
        ..QmfSearch::default()
    };
    let f = find_qmf(c.order, &mut rng, &opts).map_err(core_err)?;
    write_json(&out.join("filters.json"), &FilterJson::from_filter(&f))?;
    let w = winding(f.seq())?;
    let mut r = Report::default();
    r.set("seed", c.seed);
    r.set("order", c.order);
    r.set("residual", f.residual());
    r.set("winding", w);
    r.set("sum_h", f.values().iter().sum::<f64>());
    r.set("norm_h", f.values().iter().map(|x| x * x).sum::<f64>().sqrt());
    r.check(f.residual() <= c.max_residual, format!("residual {:e} > {:e}", f.residual(), c.max_residual));
    r.check(w == 0, format!("winding count {w}"));
    Ok(r)
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Known and searched filters used by the round-trip checks.
pub fn roundtrip_filters(c: &DwtRoundtripConfig) -> Result<Vec<(String, WaveletFilter)>> {
    let mut out: Vec<(String, WaveletFilter)> =
        c.known_orders.iter().map(|&m| (format!("daubechies-{m}"), WaveletFilter::daubechies(m))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(c.seed, 1));
    for &m in &c.searched_orders {
        let f = find_qmf(m, &mut rng, &QmfSearch::default()).map_err(core_err)?;
        out.push((format!("searched-{m}"), f));
    }
    Ok(out)
}

/// One-level and full-pyramid reconstruction plus energy conservation on random signals.
pub fn dwt_roundtrip(c: &DwtRoundtripConfig, out: &Path) -> Result<Report> {
    c.validate()?;
    let filters = roundtrip_filters(c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let signals: Vec<Vec<f64>> =
        (0..c.signals).map(|_| (0..c.length).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let j2 = c.length.trailing_zeros();
    let (mut level_err, mut pyramid_err, mut energy_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut per_filter = Vec::new();
    for (name, f) in &filters {
        let h = f.seq();
        let (mut fl, mut fp, mut fe) = (0.0f64, 0.0f64, 0.0f64);
        for x in &signals {
            let (a, d) = dwt_level_periodic(x, h).map_err(core_err)?;
            let y = idwt_level_periodic(&a, &d, h).map_err(core_err)?;
            fl = fl.max(max_abs_diff(x, &y));
            let mut approx = x.clone();
            for _ in c.j0..j2 {
                let (a, d) = dwt_level_periodic(&approx, h).map_err(core_err)?;
                let e = energy(&approx);
                fe = fe.max((energy(&a) + energy(&d) - e).abs() / e);
                approx = a;
            }
            let dec = wavedec(x, h, c.j0, j2).map_err(core_err)?;
            let y = waverec(&dec, h).map_err(core_err)?;
            fp = fp.max(max_abs_diff(x, &y));
        }
        per_filter.push(json!({
            "filter": name,
            "order": f.order(),
            "qmf_residual": f.residual(),
            "level_error": fl,
            "pyramid_error": fp,
            "energy_error": fe,
        }));
        level_err = level_err.max(fl);
        pyramid_err = pyramid_err.max(fp);
        energy_err = energy_err.max(fe);
    }
    if let (Some(x), Some((_, f))) = (signals.first(), filters.first()) {
        let dec = wavedec(x, f.seq(), c.j0, j2).map_err(core_err)?;
        write_json(&out.join("decomposition.json"), &DecompositionJson::from(&dec))?;
    }
    let mut r = Report::default();
    r.set("seed", c.seed);
    r.set("signals", c.signals);
    r.set("length", c.length);
    r.set("filters", filters.len());
    r.set("max_roundtrip_error", level_err);
    r.set("max_pyramid_error", pyramid_err);
    r.set("max_energy_error", energy_err);
    r.set("per_filter", per_filter);
    r.check(level_err <= c.tol, format!("one-level reconstruction error {level_err:e} > {:e}", c.tol));
    r.check(pyramid_err <= c.tol, format!("pyramid reconstruction error {pyramid_err:e} > {:e}", c.tol));
    r.check(energy_err <= c.tol, format!("relative energy error {energy_err:e} > {:e}", c.tol));
    if let Some(p) = &c.points_csv {
        let curve_err = decompose_points(c, Path::new(p), out)?;
        r.set("curve_roundtrip_error", curve_err);
        r.check(curve_err <= c.tol, format!("curve reconstruction error {curve_err:e} > {:e}", c.tol));
    }
    Ok(r)
}

/// Writes the contour of a point list and the pyramid of each coordinate.
fn decompose_points(c: &DwtRoundtripConfig, path: &Path, out: &Path) -> Result<f64> {
    let pts = read_points_csv(path)?;
    let contour = contour_from_points(&pts, c.n_fourier).map_err(core_err)?;
    write_json(&out.join("contour.json"), &ContourJson::from_contour(&contour))?;
    let h = WaveletFilter::daubechies(c.curve_order);
    let j0 = c.j0.min(c.curve_level);
    let mut err = 0.0f64;
    for (s, name) in ["x", "y"].iter().enumerate() {
        let a = init_coeffs_from_samples(|t| eval_contour(&contour, t)[s], c.curve_level, c.curve_order)
            .map_err(core_err)?;
        let dec = wavedec(&a, h.seq(), j0, c.curve_level).map_err(core_err)?;
        err = err.max(max_abs_diff(&a, &waverec(&dec, h.seq()).map_err(core_err)?));
        write_json(&out.join(format!("decomposition_{name}.json")), &DecompositionJson::from(&dec))?;
    }
    Ok(err)
}

/// Standardized polynomial features of each sample's latent vector.
pub fn featurize(scaler: Option<&FeatureScaler>, samples: &[ShapeSample]) -> (FeatureScaler, Vec<Vec<f64>>) {
    let raw: Vec<Vec<f64>> = samples.iter().map(|s| poly_features(&s.latent)).collect();
    let scaler = scaler.cloned().unwrap_or_else(|| FeatureScaler::fit(&raw));
    let feats = raw.iter().map(|r| scaler.apply(r)).collect();
    (scaler, feats)
}

fn feasible_filter<R: Rng>(order: usize, noise: f64, rng: &mut R) -> Result<WaveletFilter> {
    for _ in 0..20 {
        let f = WaveletFilter::perturbed_daubechies(order, noise, rng).map_err(core_err)?;
        if winding(f.seq())? == 0 {
            return Ok(f);
        }
    }
    Ok(WaveletFilter::daubechies(order))
}

/// Finite-difference checks of the wavelet-fit gradient at random feasible points.
pub fn grad_check(c: &GradCheckConfig, _out: &Path) -> Result<Report> {
    c.validate()?;
    let lv = Levels::new(c.j0, c.j1, c.j2)?;
    let shapes = synthesize_shapes(c.seed, c.samples, FamilyChoice::Mixed, c.j2, c.order, &ShapeParams::default())?;
    let (_, feats) = featurize(None, &shapes);
    let targets = shapes.iter().map(|s| s.target.clone()).collect();
    let obj = WaveletFitObjective::new(lv, feats, targets, vec![(0..c.samples).collect()]);
    let sys = filter_constraint(c.order);
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(c.seed, 1));
    let rows = 2 * lv.coeffs_per_component();
    let (mut worst, mut worst_filter) = (0.0f64, 0.0f64);
    let mut chart_errors = Vec::new();
    let mut filter_errors = Vec::new();
    for _ in 0..c.points {
        let f1 = feasible_filter(c.order, c.filter_noise, &mut rng)?;
        let f2 = feasible_filter(c.order, c.filter_noise, &mut rng)?;
        let alpha = DVector::from_fn(rows * obj.n_features, |_, _| rng.gen_range(-0.1..0.1));
        let theta: Vec<f64> = f1.values().iter().chain(f2.values()).copied().collect();
        let x = ProductPoint::new(alpha, DVector::from_vec(theta));
        let e = fd_gradient_check(&obj, Some(&sys as &dyn ConstraintSystem), &x, c.eps).map_err(core_err)?;
        chart_errors.push(e);
        worst = worst.max(e);
        let fe = filter_fd_error(&obj, &x);
        filter_errors.push(fe);
        worst_filter = worst_filter.max(fe);
    }
    let mut r = Report::default();
    r.set("seed", c.seed);
    r.set("points", c.points);
    r.set("max_rel_error", worst);
    r.set("max_filter_rel_error", worst_filter);
    r.set("rel_errors", chart_errors);
    r.set("filter_rel_errors", filter_errors);
    r.check(worst <= c.max_rel_error, format!("chart gradient error {worst:e} > {:e}", c.max_rel_error));
    r.check(
        worst_filter <= c.max_filter_rel_error,
        format!("filter gradient error {worst_filter:e} > {:e}", c.max_filter_rel_error),
    );
    Ok(r)
}

/// Relative error of the Euclidean filter partials against central differences in each tap.
pub fn filter_fd_error(obj: &WaveletFitObjective, x: &ProductPoint) -> f64 {
    let (_, analytic) = obj.eval_partials(x, 0);
    let eps = 1e-6;
    let mut numeric = Vec::with_capacity(analytic.len());
    for k in 0..x.theta.len() {
        let mut p = x.clone();
        p.theta[k] += eps;
        let lp = obj.eval(&p, 0);
        p.theta[k] -= 2.0 * eps;
        let lm = obj.eval(&p, 0);
        numeric.push((lp - lm) / (2.0 * eps));
    }
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    analytic.iter().zip(&numeric).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

#[derive(Serialize)]
struct EpochRow {
    epoch: usize,
    train_loss: f64,
    val_loss: f64,
    manifold_rate: f64,
    flat_rate: f64,
    max_residual: f64,
    winding: usize,
}

/// Fits the coefficient head and both filters to synthetic shapes.
pub fn contour_fit(c: &ContourFitConfig, out: &Path) -> Result<Report> {
    c.validate()?;
    let lv = Levels::new(c.j0, c.j1, c.j2)?;
    let draw = |k: u64, n: usize| synthesize_shapes(sub_seed(c.seed, k), n, c.family, c.j2, c.order, &c.shapes);
    let (train, val, test) = (draw(1, c.n_train)?, draw(2, c.n_val)?, draw(3, c.n_test)?);
    let (scaler, train_feats) = featurize(None, &train);
    let (_, val_feats) = featurize(Some(&scaler), &val);
    let (_, test_feats) = featurize(Some(&scaler), &test);

    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(c.seed, 4));
    let mut idx: Vec<usize> = (0..c.n_train).collect();
    idx.shuffle(&mut rng);
    let batches: Vec<Vec<usize>> = idx.chunks(c.batch_size).map(|b| b.to_vec()).collect();
    let targets = |s: &[ShapeSample]| s.iter().map(|x| x.target.clone()).collect::<Vec<_>>();
    let obj = WaveletFitObjective::new(lv, train_feats, targets(&train), batches);
    let val_obj = WaveletFitObjective::new(lv, val_feats, targets(&val), vec![(0..c.n_val).collect()]);

    let filters = [feasible_filter(c.order, c.filter_noise, &mut rng)?, feasible_filter(c.order, c.filter_noise, &mut rng)?];
    let theta: Vec<f64> = filters[0].values().iter().chain(filters[1].values()).copied().collect();
    let x0 = ProductPoint::new(DVector::zeros(2 * lv.coeffs_per_component() * obj.n_features), DVector::from_vec(theta));
    let sys = filter_constraint(c.order);
    let p = 2 * c.order - 1;
    let cfg = SgdConfig {
        order: c.step_order.into(),
        manifold_rate: c.manifold_rate.into(),
        flat_rate: c.flat_rate.into(),
        seed: sub_seed(c.seed, 5),
        epochs: c.epochs,
        flat_optimizer: c.optimizer.into(),
        ..SgdConfig::default()
    };
    let initial_loss = obj.dataset_loss(&x0);
    let mut opt = GeodesicSgd::new(Some(&sys), x0, cfg).map_err(core_err)?;

    let mut records = Vec::new();
    let mut epochs = Vec::new();
    let (mut best_val, mut stall, mut decays) = (f64::INFINITY, 0usize, 0usize);
    let (mut winding_violations, mut loss_increases) = (0usize, 0usize);
    let mut prev_train = initial_loss;
    for _ in 0..c.epochs {
        let (manifold_rate, flat_rate) = (opt.manifold_rate(), opt.flat_rate());
        let recs = opt.run_epoch(&obj).map_err(core_err)?;
        let max_residual = recs.iter().fold(0.0f64, |m, r| m.max(r.constraint_residual));
        records.extend(recs);
        let th = opt.point.theta.as_slice();
        let w = winding(&TwoSidedSeq::new(th[..p].to_vec()))? + winding(&TwoSidedSeq::new(th[p..].to_vec()))?;
        if w != 0 {
            winding_violations += 1;
        }
        let train_loss = obj.dataset_loss(&opt.point);
        if train_loss > prev_train {
            loss_increases += 1;
        }
        prev_train = train_loss;
        let val_loss = val_obj.dataset_loss(&opt.point);
        if val_loss < best_val {
            best_val = val_loss;
            stall = 0;
        } else {
            stall += 1;
            if stall >= c.patience {
                opt.decay_rates(c.decay_factor);
                decays += 1;
                stall = 0;
            }
        }
        epochs.push(EpochRow {
            epoch: opt.epoch,
            train_loss,
            val_loss,
            manifold_rate,
            flat_rate,
            max_residual,
            winding: w,
        });
    }
    let x = opt.point.clone();
    let final_loss = obj.dataset_loss(&x);

    let mut dice = Vec::with_capacity(test.len());
    let mut test_loss = 0.0;
    for (i, (s, phi)) in test.iter().zip(&test_feats).enumerate() {
        let pred = obj.predict(&x, phi);
        test_loss += crate::model::curve_loss(&pred, &s.target).0 / test.len() as f64;
        let (pp, tp) = (coeffs_to_points(&pred), coeffs_to_points(&s.target));
        dice.push(rasterized_dice_polygons(&tp, &pp, c.dice_grid).map_err(core_err)?);
        if i < c.save_contours {
            let n = pp.len() / 2;
            let pc = contour_from_points(&pp, n).map_err(core_err)?;
            let tc = contour_from_points(&tp, n).map_err(core_err)?;
            write_json(&out.join(format!("contours/test_{i:03}_pred.json")), &ContourJson::from_contour(&pc))?;
            write_json(&out.join(format!("contours/test_{i:03}_target.json")), &ContourJson::from_contour(&tc))?;
        }
    }
    let mean_dice = dice.iter().sum::<f64>() / dice.len() as f64;
    let min_dice = dice.iter().copied().fold(f64::INFINITY, f64::min);
    let max_residual = records.iter().fold(0.0f64, |m, r| m.max(r.constraint_residual));
    let th = x.theta.as_slice();
    let learned = [WaveletFilter::from_values(th[..p].to_vec()), WaveletFilter::from_values(th[p..].to_vec())];

    write_trajectory_csv(&out.join("trajectory.csv"), &records)?;
    let mut w = csv::Writer::from_path(out.join("epochs.csv"))?;
    for e in &epochs {
        w.serialize(e)?;
    }
    w.flush()?;
    write_json(&out.join("filters.json"), &learned.iter().map(FilterJson::from_filter).collect::<Vec<_>>())?;

    let ratio = initial_loss / final_loss;
    let mut r = Report::default();
    r.set("seed", c.seed);
    r.set("epochs", c.epochs);
    r.set("steps", records.len());
    r.set("initial_loss", initial_loss);
    r.set("final_loss", final_loss);
    r.set("loss_ratio", ratio);
    r.set("best_val_loss", best_val);
    r.set("test_loss", test_loss);
    r.set("mean_dice", mean_dice);
    r.set("min_dice", min_dice);
    r.set("max_constraint_residual", max_residual);
    r.set("final_filter_residuals", [learned[0].residual(), learned[1].residual()]);
    r.set("winding_violations", winding_violations);
    r.set("train_loss_increases", loss_increases);
    r.set("rate_decays", decays);
    r.check(ratio >= c.min_loss_ratio, format!("loss ratio {ratio:.2} < {}", c.min_loss_ratio));
    r.check(mean_dice >= c.min_mean_dice, format!("mean dice {mean_dice:.4} < {}", c.min_mean_dice));
    r.check(max_residual <= c.max_residual, format!("constraint residual {max_residual:e} > {:e}", c.max_residual));
    r.check(winding_violations == 0, format!("{winding_violations} checkpoints with mask zeros"));
    Ok(r)
}
