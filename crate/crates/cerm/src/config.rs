//! JSON configuration per subcommand. Every field has a default, so `{}` is a valid config.

use anyhow::{ensure, Result};
use cerm_core::riemannian_sgd::{FlatOptimizer, Schedule, StepOrder};
use serde::{Deserialize, Serialize};

use crate::shapes::{FamilyChoice, ShapeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub start: f64,
    pub end: f64,
    pub warmup_epochs: usize,
}

impl From<ScheduleConfig> for Schedule {
    fn from(s: ScheduleConfig) -> Self {
        Schedule { start: s.start, end: s.end, warmup_epochs: s.warmup_epochs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OrderChoice {
    #[default]
    First,
    Second,
}

impl From<OrderChoice> for StepOrder {
    fn from(o: OrderChoice) -> Self {
        match o {
            OrderChoice::First => StepOrder::First,
            OrderChoice::Second => StepOrder::Second,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerChoice {
    Sgd,
    #[default]
    Adam,
}

impl From<OptimizerChoice> for FlatOptimizer {
    fn from(o: OptimizerChoice) -> Self {
        match o {
            OptimizerChoice::Sgd => FlatOptimizer::Sgd,
            OptimizerChoice::Adam => FlatOptimizer::adam(),
        }
    }
}

fn check_order(order: usize) -> Result<()> {
    ensure!((3..=8).contains(&order), "wavelet order must lie in 3..=8, got {order}");
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SphereDemoConfig {
    pub seed: u64,
    pub steps: usize,
    pub rate: f64,
    pub order: OrderChoice,
    /// Random start when absent.
    pub start: Option<[f64; 3]>,
    pub target: [f64; 3],
    pub max_final_loss: f64,
    pub max_residual: f64,
}

impl Default for SphereDemoConfig {
    fn default() -> Self {
        SphereDemoConfig {
            seed: 0,
            steps: 500,
            rate: 0.1,
            order: OrderChoice::First,
            start: None,
            target: [0.0, 0.0, 1.0],
            max_final_loss: 1e-6,
            max_residual: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QmfFindConfig {
    pub seed: u64,
    pub order: usize,
    pub attempts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub stopband: f64,
    pub polish_steps: usize,
    pub max_residual: f64,
}

impl Default for QmfFindConfig {
    fn default() -> Self {
        QmfFindConfig {
            seed: 0,
            order: 6,
            attempts: 50,
            tol: 1e-13,
            max_iter: 200,
            stopband: 0.45,
            polish_steps: 200,
            max_residual: 1e-10,
        }
    }
}

impl QmfFindConfig {
    pub fn validate(&self) -> Result<()> {
        check_order(self.order)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DwtRoundtripConfig {
    pub seed: u64,
    pub signals: usize,
    /// Signal length, a power of two.
    pub length: usize,
    /// Orders of the Daubechies filters in the test set.
    pub known_orders: Vec<usize>,
    /// Orders of filters found by random search.
    pub searched_orders: Vec<usize>,
    pub j0: u32,
    pub tol: f64,
    /// Optional `x,y` point list decomposed as a contour.
    pub points_csv: Option<String>,
    pub n_fourier: usize,
    pub curve_level: u32,
    pub curve_order: usize,
}

impl Default for DwtRoundtripConfig {
    fn default() -> Self {
        DwtRoundtripConfig {
            seed: 0,
            signals: 50,
            length: 128,
            known_orders: vec![3, 4, 5, 6, 7, 8],
            searched_orders: vec![3, 4, 5, 6],
            j0: 3,
            tol: 1e-10,
            points_csv: None,
            n_fourier: 64,
            curve_level: 7,
            curve_order: 5,
        }
    }
}

impl DwtRoundtripConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.length.is_power_of_two() && self.length >= 2, "length must be a power of two");
        ensure!(1usize << self.j0 <= self.length, "j0 too large for the signal length");
        for &o in self.known_orders.iter().chain(&self.searched_orders) {
            check_order(o)?;
        }
        check_order(self.curve_order)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub seed: u64,
    pub points: usize,
    pub order: usize,
    pub j0: u32,
    pub j1: u32,
    pub j2: u32,
    pub samples: usize,
    pub filter_noise: f64,
    pub eps: f64,
    pub max_rel_error: f64,
    pub max_filter_rel_error: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            seed: 0,
            points: 10,
            order: 5,
            j0: 3,
            j1: 4,
            j2: 4,
            samples: 4,
            filter_noise: 0.3,
            eps: 1e-5,
            max_rel_error: 1e-4,
            max_filter_rel_error: 1e-6,
        }
    }
}

impl GradCheckConfig {
    pub fn validate(&self) -> Result<()> {
        check_order(self.order)?;
        ensure!(self.j0 <= self.j1 && self.j1 <= self.j2, "levels must satisfy j0 <= j1 <= j2");
        ensure!(self.j2 >= cerm_core::mra::min_level(self.order), "j2 below the minimum level for this order");
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourFitConfig {
    pub seed: u64,
    pub order: usize,
    pub j0: u32,
    pub j1: u32,
    pub j2: u32,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub family: FamilyChoice,
    pub shapes: ShapeParams,
    pub epochs: usize,
    pub batch_size: usize,
    pub manifold_rate: ScheduleConfig,
    pub flat_rate: ScheduleConfig,
    pub optimizer: OptimizerChoice,
    pub step_order: OrderChoice,
    /// Rate factor applied when validation loss stalls for `patience` epochs.
    pub decay_factor: f64,
    pub patience: usize,
    /// Chart-coordinate perturbation of the initial Daubechies filters.
    pub filter_noise: f64,
    pub dice_grid: usize,
    /// Held-out predictions written to `contours/`.
    pub save_contours: usize,
    pub min_loss_ratio: f64,
    pub min_mean_dice: f64,
    pub max_residual: f64,
}

impl Default for ContourFitConfig {
    fn default() -> Self {
        ContourFitConfig {
            seed: 0,
            order: 5,
            j0: 4,
            j1: 7,
            j2: 7,
            n_train: 200,
            n_val: 25,
            n_test: 50,
            family: FamilyChoice::Mixed,
            shapes: ShapeParams::default(),
            epochs: 200,
            batch_size: 10,
            manifold_rate: ScheduleConfig { start: 1e-4, end: 1e-3, warmup_epochs: 8 },
            flat_rate: ScheduleConfig { start: 1e-5, end: 3e-4, warmup_epochs: 8 },
            optimizer: OptimizerChoice::Adam,
            step_order: OrderChoice::First,
            decay_factor: 0.85,
            patience: 10,
            filter_noise: 0.05,
            dice_grid: 512,
            save_contours: 10,
            min_loss_ratio: 50.0,
            min_mean_dice: 0.95,
            max_residual: 1e-9,
        }
    }
}

impl ContourFitConfig {
    pub fn validate(&self) -> Result<()> {
        check_order(self.order)?;
        ensure!(self.j0 <= self.j1 && self.j1 <= self.j2, "levels must satisfy j0 <= j1 <= j2");
        ensure!(self.j2 >= cerm_core::mra::min_level(self.order), "j2 below the minimum level for this order");
        ensure!(self.n_train >= 1 && self.n_val >= 1 && self.n_test >= 1, "dataset sizes must be positive");
        ensure!(self.batch_size >= 1, "batch size must be positive");
        Ok(())
    }
}
