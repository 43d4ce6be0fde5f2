//! The parameter-free optimizer: iterate `w_t = m_t q_t` from a coin-betting
//! magnitude learner and a projected scale-free direction learner, fed one
//! sanitized negative subgradient per step, returning the average iterate.
//!
//! Per step `t` with released gradient `ĝ_t`:
//!
//! 1. coin `s_t = ⟨ĝ_t, q_t⟩` against the direction used to form `w_t`;
//! 2. `m_{t+1}` from the coin sum and `y = t (σ²/2 + G²)`;
//! 3. `q_{t+1}` = projection of `q_t + ĝ_t / √(Σ‖ĝ_s‖²)` onto the unit ball;
//! 4. `w_{t+1} = m_{t+1} q_{t+1}`.
//!
//! `w_1 = q_1 = 0`, and since `s_1 = 0` also `w_2 = 0`.

use serde::{Deserialize, Serialize};

use crate::direction::DirectionState;
use crate::error::{invalid, Error, Result};
use crate::magnitude::BettingState;
use crate::noise::NoiseModel;
use crate::optimizer::{run_one_pass, GradientOracle, OnlineOptimizer, SanitizedGradient};
use crate::vecops::{all_finite, dot, norm};

/// Inputs of one optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dim: usize,
    /// Bound `G` on the norm of the true (noise-free) subgradients.
    pub g_bound: f64,
    pub noise: NoiseModel,
    pub horizon: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if self.noise.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: self.noise.dim,
            });
        }
        if !(self.g_bound > 0.0) || !self.g_bound.is_finite() {
            return Err(invalid(format!("gradient bound must be positive, got {}", self.g_bound)));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        Ok(())
    }
}

/// Per-step record kept when tracing: `ĝ_t`, `m_t`, `q_t` and `s_t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub gradients: Vec<Vec<f64>>,
    pub magnitudes: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    pub coins: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.coins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coins.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Banco {
    betting: BettingState,
    direction: DirectionState,
    w: Vec<f64>,
    w_sum: Vec<f64>,
    step: u64,
    trace: Option<Trace>,
}

impl Banco {
    pub fn new(dim: usize, g_bound: f64, noise: &NoiseModel) -> Result<Self> {
        if noise.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: noise.dim,
            });
        }
        Ok(Banco {
            betting: BettingState::for_noise(g_bound, noise)?,
            direction: DirectionState::new(dim)?,
            w: vec![0.0; dim],
            w_sum: vec![0.0; dim],
            step: 0,
            trace: None,
        })
    }

    pub fn from_config(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        Self::new(config.dim, config.g_bound, &config.noise)
    }

    /// Starts recording a [`Trace`] from the next step on.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Trace::default());
        self
    }

    pub fn magnitude(&self) -> f64 {
        self.betting.magnitude()
    }

    pub fn direction(&self) -> &[f64] {
        self.direction.direction()
    }

    pub fn betting(&self) -> &BettingState {
        &self.betting
    }

    pub fn trace(&self) -> Option<&Trace> {
        self.trace.as_ref()
    }

    pub fn take_trace(&mut self) -> Option<Trace> {
        self.trace.take()
    }

    pub fn step(&mut self, g_hat: &SanitizedGradient) -> Result<()> {
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
        let coin = dot(g, self.direction.direction());
        let mut betting = self.betting.clone();
        let m_next = betting.update(coin)?;
        if !m_next.is_finite() {
            return Err(Error::NonFinite("magnitude"));
        }
        if let Some(trace) = self.trace.as_mut() {
            trace.gradients.push(g.clone());
            trace.magnitudes.push(self.betting.magnitude());
            trace.directions.push(self.direction.direction().to_vec());
            trace.coins.push(coin);
        }
        for (acc, wi) in self.w_sum.iter_mut().zip(&self.w) {
            *acc += wi;
        }
        self.direction.update(g)?;
        self.betting = betting;
        for (wi, qi) in self.w.iter_mut().zip(self.direction.direction()) {
            *wi = m_next * qi;
        }
        self.step += 1;
        Ok(())
    }
}

impl OnlineOptimizer for Banco {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn iterate(&self) -> &[f64] {
        &self.w
    }

    fn observe(&mut self, g_hat: &SanitizedGradient) -> Result<()> {
        self.step(g_hat)
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

#[derive(Debug, Clone)]
pub struct BancoRun {
    pub average: Vec<f64>,
    pub oracle_calls: u64,
    pub trace: Option<Trace>,
}

/// One pass of `config.horizon` oracle calls; returns `(1/T) Σ_{t≤T} w_t`.
pub fn banco_run<G: GradientOracle + ?Sized>(config: &RunConfig, oracle: &mut G, tracing: bool) -> Result<BancoRun> {
    let mut opt = Banco::from_config(config)?;
    if tracing {
        opt = opt.with_trace();
    }
    let mut calls = 0u64;
    let mut counting = |w: &[f64]| {
        calls += 1;
        oracle.query(w)
    };
    run_one_pass(&mut opt, &mut counting, config.horizon, |_, _| {})?;
    Ok(BancoRun {
        average: opt.average(),
        oracle_calls: calls,
        trace: opt.take_trace(),
    })
}

/// The two sides of the regret split for a comparator `u`:
/// `lhs = Σ⟨ĝ_t, u − m_t q_t⟩`, `rhs_m = Σ s_t(‖u‖ − m_t)` and
/// `rhs_d = ‖u‖ Σ⟨ĝ_t, u/‖u‖ − q_t⟩`. Pathwise `lhs = rhs_m + rhs_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub lhs: f64,
    pub rhs_m: f64,
    pub rhs_d: f64,
}

impl Decomposition {
    /// `|lhs − rhs_m − rhs_d| / (1 + |lhs|)`
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs_m - self.rhs_d).abs() / (1.0 + self.lhs.abs())
    }
}

pub fn regret_decomposition_check(
    gradients: &[Vec<f64>],
    magnitudes: &[f64],
    directions: &[Vec<f64>],
    u: &[f64],
) -> Result<Decomposition> {
    let n = gradients.len();
    if magnitudes.len() != n || directions.len() != n {
        return Err(invalid(format!(
            "trace length mismatch: {} gradients, {} magnitudes, {} directions",
            n,
            magnitudes.len(),
            directions.len()
        )));
    }
    let u_norm = norm(u);
    let unit: Vec<f64> = if u_norm == 0.0 {
        vec![0.0; u.len()]
    } else {
        u.iter().map(|v| v / u_norm).collect()
    };
    let (mut lhs, mut rhs_m, mut rhs_d) = (0.0, 0.0, 0.0);
    for ((g, &m), q) in gradients.iter().zip(magnitudes).zip(directions) {
        if g.len() != u.len() || q.len() != u.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                got: if g.len() != u.len() { g.len() } else { q.len() },
            });
        }
        let coin = dot(g, q);
        lhs += dot(g, u) - m * coin;
        rhs_m += coin * (u_norm - m);
        rhs_d += u_norm * (dot(g, &unit) - coin);
    }
    Ok(Decomposition { lhs, rhs_m, rhs_d })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnitude::magnitude_quadrature_oracle;

    fn g(v: &[f64], step: u64) -> SanitizedGradient {
        SanitizedGradient::new(v.to_vec(), step).unwrap()
    }

    #[test]
    fn first_two_iterates_are_zero() {
        let noise = NoiseModel::laplace(1.0, 2).unwrap();
        let mut b = Banco::new(2, 1.0, &noise).unwrap();
        assert_eq!(b.iterate(), &[0.0, 0.0]);
        b.step(&g(&[0.4, -2.0], 1)).unwrap();
        assert_eq!(b.magnitude(), 0.0);
        assert_eq!(b.iterate(), &[0.0, 0.0]);
    }

    #[test]
    fn two_noiseless_steps() {
        let noise = NoiseModel::none(2);
        let mut b = Banco::new(2, 1.0, &noise).unwrap();
        assert_eq!(b.betting().y_per_step(), 1.0);
        b.step(&g(&[1.0, 0.0], 1)).unwrap();
        assert_eq!(b.direction(), &[1.0, 0.0]);
        b.step(&g(&[1.0, 0.0], 2)).unwrap();
        let m3 = magnitude_quadrature_oracle(1.0, 2.0, 0.6838, 1e-13).unwrap();
        assert!(m3 > 0.0);
        assert!(((b.iterate()[0] - m3) / m3).abs() < 1e-10);
        assert_eq!(b.iterate()[1], 0.0);
    }

    #[test]
    fn rejects_mismatched_dimension() {
        let mut b = Banco::new(3, 1.0, &NoiseModel::none(3)).unwrap();
        assert!(matches!(b.step(&g(&[1.0, 0.0], 1)), Err(Error::DimensionMismatch { .. })));
        assert!(Banco::new(3, 1.0, &NoiseModel::none(2)).is_err());
    }

    #[test]
    fn run_of_one_step_returns_origin() {
        let config = RunConfig {
            dim: 2,
            g_bound: 1.0,
            noise: NoiseModel::none(2),
            horizon: 1,
        };
        let mut oracle = |_: &[f64]| SanitizedGradient::new(vec![1.0, 0.0], 1);
        let run = banco_run(&config, &mut oracle, false).unwrap();
        assert_eq!(run.average, vec![0.0, 0.0]);
        assert_eq!(run.oracle_calls, 1);
        let bad = RunConfig { horizon: 0, ..config };
        assert!(banco_run(&bad, &mut oracle, false).is_err());
    }

    #[test]
    fn constant_gradient_moves_only_along_it() {
        let config = RunConfig {
            dim: 3,
            g_bound: 1.0,
            noise: NoiseModel::none(3),
            horizon: 1000,
        };
        let mut oracle = |_: &[f64]| SanitizedGradient::new(vec![1.0, 0.0, 0.0], 0);
        let run = banco_run(&config, &mut oracle, false).unwrap();
        assert!(run.average[0] > 0.0);
        assert_eq!(&run.average[1..], &[0.0, 0.0]);
        assert_eq!(run.oracle_calls, 1000);
    }

    #[test]
    fn decomposition_hand_example() {
        let d = regret_decomposition_check(&[vec![1.0, 0.0]], &[0.0], &[vec![0.0, 0.0]], &[1.0, 0.0]).unwrap();
        assert_eq!((d.lhs, d.rhs_m, d.rhs_d), (1.0, 0.0, 1.0));
    }

    #[test]
    fn decomposition_zero_comparator() {
        let grads = vec![vec![1.0, 2.0], vec![-0.5, 0.3]];
        let mags = vec![0.7, -1.3];
        let dirs = vec![vec![0.6, 0.0], vec![0.0, -1.0]];
        let d = regret_decomposition_check(&grads, &mags, &dirs, &[0.0, 0.0]).unwrap();
        let expected: f64 = -(0.7 * 0.6 + -1.3 * -0.3);
        assert!((d.lhs - expected).abs() < 1e-15);
        assert_eq!(d.lhs, d.rhs_m);
        assert_eq!(d.rhs_d, 0.0);
        assert!(regret_decomposition_check(&grads, &mags[..1], &dirs, &[0.0, 0.0]).is_err());
    }
}
