//! Reference optimizers: constant-step SGD, scale-free adaptive SGD and a
//! learning-rate grid search that pays one full pass per candidate.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optimizer::{run_one_pass, GradientOracle, OnlineOptimizer, SanitizedGradient};
use crate::vecops::{all_finite, axpy, norm_sq};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `w ← w + η ĝ`
    Constant { eta: f64 },
    /// `w ← w + D ĝ_t / √(Σ_{s≤t} ‖ĝ_s‖²)`
    ScaleFree { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub schedule: StepSchedule,
    pub dim: usize,
    pub horizon: u64,
}

impl SgdConfig {
    pub fn constant(eta: f64, dim: usize, horizon: u64) -> Self {
        SgdConfig {
            schedule: StepSchedule::Constant { eta },
            dim,
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        match self.schedule {
            StepSchedule::Constant { eta } if !(eta > 0.0) || !eta.is_finite() => {
                Err(invalid(format!("learning rate must be positive, got {eta}")))
            }
            StepSchedule::ScaleFree { radius } if !(radius > 0.0) || !radius.is_finite() => {
                Err(invalid(format!("radius must be positive, got {radius}")))
            }
            _ => Ok(()),
        }
    }
}

/// One SGD step along the negative subgradient `g_hat`: `w + η ĝ`.
pub fn sgd_step(w: &[f64], g_hat: &[f64], eta: f64) -> Result<Vec<f64>> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(invalid(format!("learning rate must be positive, got {eta}")));
    }
    if w.len() != g_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: g_hat.len(),
        });
    }
    let out: Vec<f64> = w.iter().zip(g_hat).map(|(wi, gi)| wi + eta * gi).collect();
    if !all_finite(&out) {
        return Err(Error::NonFinite("sgd iterate"));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Sgd {
    schedule: StepSchedule,
    w: Vec<f64>,
    w_sum: Vec<f64>,
    grad_norm_sq_sum: f64,
    step: u64,
}

impl Sgd {
    pub fn new(schedule: StepSchedule, dim: usize) -> Result<Self> {
        SgdConfig {
            schedule,
            dim,
            horizon: 1,
        }
        .validate()?;
        Ok(Sgd {
            schedule,
            w: vec![0.0; dim],
            w_sum: vec![0.0; dim],
            grad_norm_sq_sum: 0.0,
            step: 0,
        })
    }

    pub fn schedule(&self) -> StepSchedule {
        self.schedule
    }
}

impl OnlineOptimizer for Sgd {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn iterate(&self) -> &[f64] {
        &self.w
    }

    fn observe(&mut self, g_hat: &SanitizedGradient) -> Result<()> {
        let g = &g_hat.vec;
        if g.len() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                got: g.len(),
            });
        }
        if !all_finite(g) {
            return Err(Error::NonFinite("sanitized gradient"));
        }
        for (acc, wi) in self.w_sum.iter_mut().zip(&self.w) {
            *acc += wi;
        }
        self.grad_norm_sq_sum += norm_sq(g);
        let rate = match self.schedule {
            StepSchedule::Constant { eta } => eta,
            StepSchedule::ScaleFree { radius } if self.grad_norm_sq_sum > 0.0 => radius / self.grad_norm_sq_sum.sqrt(),
            StepSchedule::ScaleFree { .. } => 0.0,
        };
        axpy(rate, g, &mut self.w);
        self.step += 1;
        Ok(())
    }

    fn steps(&self) -> u64 {
        self.step
    }

    fn average(&self) -> Vec<f64> {
        if self.step == 0 {
            return vec![0.0; self.w.len()];
        }
        let inv = 1.0 / self.step as f64;
        self.w_sum.iter().map(|v| v * inv).collect()
    }
}

/// One pass of SGD; returns the average iterate.
pub fn sgd_run<G: GradientOracle + ?Sized>(config: &SgdConfig, oracle: &mut G) -> Result<Vec<f64>> {
    config.validate()?;
    let mut sgd = Sgd::new(config.schedule, config.dim)?;
    run_one_pass(&mut sgd, oracle, config.horizon, |_, _| {})?;
    Ok(sgd.average())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTuneResult {
    pub grid: Vec<f64>,
    /// Held-out risk estimate of the final average, one per grid entry.
    pub per_eta_risk: Vec<f64>,
    pub best_eta: f64,
    pub best_index: usize,
    pub best_average: Vec<f64>,
    pub total_requests: u64,
}

/// Runs constant-step SGD once per learning rate in `grid`, each on a fresh
/// one-pass oracle from `oracle_factory(index, eta)`, and keeps the rate
/// whose final average has the smallest `evaluate` score.
///
/// The factory's oracles are where privacy is paid: each request they serve
/// is one charge, so a grid of size `k` costs `k · horizon` requests.
pub fn grid_tune<G, F, E>(grid: &[f64], dim: usize, horizon: u64, oracle_factory: F, evaluate: E) -> Result<GridTuneResult>
where
    G: GradientOracle,
    F: FnMut(usize, f64) -> Result<G>,
    E: FnMut(&[f64]) -> f64,
{
    grid_tune_observed(grid, dim, horizon, oracle_factory, evaluate, |_, _, _| {})
}

/// [`grid_tune`] with a hook called after every step of every grid run.
pub fn grid_tune_observed<G, F, E, H>(
    grid: &[f64],
    dim: usize,
    horizon: u64,
    mut oracle_factory: F,
    mut evaluate: E,
    mut after_step: H,
) -> Result<GridTuneResult>
where
    G: GradientOracle,
    F: FnMut(usize, f64) -> Result<G>,
    E: FnMut(&[f64]) -> f64,
    H: FnMut(usize, u64, &Sgd),
{
    if grid.is_empty() {
        return Err(invalid("learning-rate grid is empty"));
    }
    for &eta in grid {
        SgdConfig::constant(eta, dim, horizon).validate()?;
    }
    let mut per_eta_risk = Vec::with_capacity(grid.len());
    let mut averages = Vec::with_capacity(grid.len());
    let mut total_requests = 0u64;
    for (i, &eta) in grid.iter().enumerate() {
        let mut oracle = oracle_factory(i, eta)?;
        let mut counting = |w: &[f64]| {
            total_requests += 1;
            oracle.query(w)
        };
        let mut sgd = Sgd::new(StepSchedule::Constant { eta }, dim)?;
        run_one_pass(&mut sgd, &mut counting, horizon, |t, s| after_step(i, t, s))?;
        let avg = sgd.average();
        per_eta_risk.push(evaluate(&avg));
        averages.push(avg);
    }
    let best_index = per_eta_risk
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("grid is non-empty");
    Ok(GridTuneResult {
        grid: grid.to_vec(),
        per_eta_risk,
        best_eta: grid[best_index],
        best_index,
        best_average: averages.swap_remove(best_index),
        total_requests,
    })
}
