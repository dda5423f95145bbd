//! On-disk formats: trajectories, filters, contours, decompositions and point lists.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cerm_core::constraint_zoo::WaveletFilter;
use cerm_core::contour::{PeriodicContour, Point};
use cerm_core::mra::MultiresDecomp;
use cerm_core::riemannian_sgd::StepRecord;
use cerm_core::Complex64;
use serde::{Deserialize, Serialize};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    iter: usize,
    loss: f64,
    constraint_residual: f64,
    step_size: f64,
}

pub fn write_trajectory_csv(path: &Path, records: &[StepRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in records {
        w.serialize(TrajectoryRow {
            iter: r.iter,
            loss: r.loss,
            constraint_residual: r.constraint_residual,
            step_size: r.step_size,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// `(iter, loss, constraint_residual, step_size)` rows.
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<(usize, f64, f64, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize::<TrajectoryRow>()
        .map(|row| {
            let row = row?;
            Ok((row.iter, row.loss, row.constraint_residual, row.step_size))
        })
        .collect()
}

/// A filter as `{order, h}` with `h` indexed `1-M..M-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterJson {
    pub order: usize,
    pub h: Vec<f64>,
}

impl FilterJson {
    pub fn from_filter(f: &WaveletFilter) -> Self {
        FilterJson { order: f.order(), h: f.values().to_vec() }
    }

    pub fn to_filter(&self) -> Result<WaveletFilter> {
        if self.h.len() != 2 * self.order - 1 {
            bail!("filter of order {} needs {} taps, found {}", self.order, 2 * self.order - 1, self.h.len());
        }
        Ok(WaveletFilter::from_values(self.h.clone()))
    }
}

/// `{tau, midpoint, fourier}` with `fourier[s]` a list of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourJson {
    pub tau: f64,
    pub midpoint: [f64; 2],
    pub fourier: [Vec<[f64; 2]>; 2],
}

impl ContourJson {
    pub fn from_contour(c: &PeriodicContour) -> Self {
        let pairs = |v: &Vec<Complex64>| v.iter().map(|z| [z.re, z.im]).collect();
        ContourJson { tau: c.tau, midpoint: c.midpoint, fourier: [pairs(&c.fourier[0]), pairs(&c.fourier[1])] }
    }

    pub fn to_contour(&self) -> PeriodicContour {
        let cplx = |v: &Vec<[f64; 2]>| v.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        PeriodicContour { fourier: [cplx(&self.fourier[0]), cplx(&self.fourier[1])], tau: self.tau, midpoint: self.midpoint }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionJson {
    pub j0: u32,
    pub j1: u32,
    pub j2: u32,
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
}

impl From<&MultiresDecomp> for DecompositionJson {
    fn from(d: &MultiresDecomp) -> Self {
        DecompositionJson { j0: d.j0, j1: d.j1, j2: d.j2, approx: d.approx.clone(), details: d.details.clone() }
    }
}

impl DecompositionJson {
    pub fn to_decomp(&self) -> Result<MultiresDecomp> {
        let d = MultiresDecomp {
            j0: self.j0,
            j1: self.j1,
            j2: self.j2,
            approx: self.approx.clone(),
            details: self.details.clone(),
        };
        d.validate().map_err(|e| anyhow::anyhow!("invalid decomposition: {e}"))?;
        Ok(d)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PointRow {
    x: f64,
    y: f64,
}

/// Reads `x,y` rows; a header line is optional.
pub fn read_points_csv(path: &Path) -> Result<Vec<Point>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_points_csv(&text)
}

pub fn parse_points_csv(text: &str) -> Result<Vec<Point>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            bail!("line {}: expected 2 fields, found {}", i + 1, rec.len());
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => out.push([x, y]),
            _ if i == 0 => continue,
            _ => bail!("line {}: not a number pair", i + 1),
        }
    }
    Ok(out)
}

pub fn write_points_csv(path: &Path, points: &[Point]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(PointRow { x: p[0], y: p[1] })?;
    }
    w.flush()?;
    Ok(())
}
