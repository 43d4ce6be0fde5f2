//! Projected online gradient ascent on the unit L2 ball with the scale-free
//! step `ĝ_t / √(Σ_{s≤t} ‖ĝ_s‖²)`.
//!
//! `ĝ_t` is a (noisy) negative subgradient, so the learner is rewarded by
//! `⟨ĝ_t, q_t⟩` and steps along `ĝ_t`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::vecops::{all_finite, dot, norm, norm_sq};

/// Which way the raw step is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StepSign {
    /// `q + ĝ/√Σ`: ascent on the reward `⟨ĝ, q⟩`.
    #[default]
    Ascent,
    /// `q − ĝ/√Σ`, kept only to compare against the ascent step.
    Descent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionState {
    q: Vec<f64>,
    grad_norm_sq_sum: f64,
    step: u64,
    sign: StepSign,
}

impl DirectionState {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_sign(dim, StepSign::Ascent)
    }

    pub fn with_sign(dim: usize, sign: StepSign) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        Ok(DirectionState {
            q: vec![0.0; dim],
            grad_norm_sq_sum: 0.0,
            step: 0,
            sign,
        })
    }

    pub fn update(&mut self, g_hat: &[f64]) -> Result<()> {
        if g_hat.len() != self.q.len() {
            return Err(Error::DimensionMismatch {
                expected: self.q.len(),
                got: g_hat.len(),
            });
        }
        if !all_finite(g_hat) {
            return Err(Error::NonFinite("direction gradient"));
        }
        self.grad_norm_sq_sum += norm_sq(g_hat);
        self.step += 1;
        if self.grad_norm_sq_sum == 0.0 {
            return Ok(());
        }
        let mut rate = 1.0 / self.grad_norm_sq_sum.sqrt();
        if self.sign == StepSign::Descent {
            rate = -rate;
        }
        for (qi, gi) in self.q.iter_mut().zip(g_hat) {
            *qi += rate * gi;
        }
        let n = norm(&self.q);
        if n > 1.0 {
            let shrink = 1.0 / n;
            self.q.iter_mut().for_each(|v| *v *= shrink);
        }
        Ok(())
    }

    pub fn direction(&self) -> &[f64] {
        &self.q
    }

    pub fn grad_norm_sq_sum(&self) -> f64 {
        self.grad_norm_sq_sum
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// `Σ_t ⟨ĝ_t, u − q_t⟩` for a comparator `u` in the unit ball.
pub fn direction_regret(gradients: &[Vec<f64>], directions: &[Vec<f64>], u: &[f64]) -> Result<f64> {
    if gradients.len() != directions.len() {
        return Err(invalid(format!(
            "trace length mismatch: {} gradients, {} directions",
            gradients.len(),
            directions.len()
        )));
    }
    if norm(u) > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!("comparator norm {} exceeds 1", norm(u))));
    }
    let mut total = 0.0;
    for (g, q) in gradients.iter().zip(directions) {
        if g.len() != u.len() || q.len() != u.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                got: if g.len() != u.len() { g.len() } else { q.len() },
            });
        }
        total += dot(g, u) - dot(g, q);
    }
    Ok(total)
}
