//! Shared interfaces between one-pass optimizers and gradient oracles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::all_finite;

/// A released (sanitized) negative subgradient `ĝ_t` and its 1-based step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SanitizedGradient {
    pub vec: Vec<f64>,
    pub step: u64,
}

impl SanitizedGradient {
    pub fn new(vec: Vec<f64>, step: u64) -> Result<Self> {
        if !all_finite(&vec) {
            return Err(Error::NonFinite("sanitized gradient"));
        }
        Ok(SanitizedGradient { vec, step })
    }
}

/// Source of sanitized negative subgradients at a query point.
pub trait GradientOracle {
    fn query(&mut self, w: &[f64]) -> Result<SanitizedGradient>;
}

impl<F> GradientOracle for F
where
    F: FnMut(&[f64]) -> Result<SanitizedGradient>,
{
    fn query(&mut self, w: &[f64]) -> Result<SanitizedGradient> {
        self(w)
    }
}

/// An online learner fed one sanitized gradient per step.
pub trait OnlineOptimizer {
    fn dim(&self) -> usize;

    /// The point `w_t` at which the next gradient is requested.
    fn iterate(&self) -> &[f64];

    fn observe(&mut self, g_hat: &SanitizedGradient) -> Result<()>;

    /// Number of gradients observed so far.
    fn steps(&self) -> u64;

    /// `(1/t) Σ_{s≤t} w_s` over the iterates at which gradients were
    /// requested; the zero vector before the first step.
    fn average(&self) -> Vec<f64>;
}

/// Drives `optimizer` for `horizon` oracle calls, invoking `after_step`
/// with the step count after each observation.
pub fn run_one_pass<O, G, F>(optimizer: &mut O, oracle: &mut G, horizon: u64, mut after_step: F) -> Result<()>
where
    O: OnlineOptimizer + ?Sized,
    G: GradientOracle + ?Sized,
    F: FnMut(u64, &O),
{
    for _ in 0..horizon {
        let g = oracle.query(optimizer.iterate())?;
        if g.vec.len() != optimizer.dim() {
            return Err(Error::DimensionMismatch {
                expected: optimizer.dim(),
                got: g.vec.len(),
            });
        }
        optimizer.observe(&g)?;
        after_step(optimizer.steps(), optimizer);
    }
    Ok(())
}
