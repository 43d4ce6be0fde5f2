//! Experiment configuration, parsed from JSON.
//!
//! ε, T and d have no defaults: a config that omits them is rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use banco_core::{NoiseModel, ProblemSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Laplace { epsilon: f64 },
    Gaussian { scale: f64 },
    None,
}

impl NoiseSpec {
    pub fn model(&self, dim: usize) -> banco_core::Result<NoiseModel> {
        match *self {
            NoiseSpec::Laplace { epsilon } => NoiseModel::laplace(epsilon, dim),
            NoiseSpec::Gaussian { scale } => NoiseModel::gaussian(scale, dim),
            NoiseSpec::None => Ok(NoiseModel::none(dim)),
        }
    }

    /// The privacy parameter reported in result rows (0 for non-private runs).
    pub fn epsilon(&self) -> f64 {
        match *self {
            NoiseSpec::Laplace { epsilon } => epsilon,
            NoiseSpec::Gaussian { .. } | NoiseSpec::None => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerSpec {
    Banco,
    Sgd { eta: f64 },
    SgdAdaptive { radius: f64 },
    SgdGrid { grid: Vec<f64> },
}

impl OptimizerSpec {
    /// Stable label used in rows and ledger entries.
    pub fn label(&self) -> String {
        match self {
            OptimizerSpec::Banco => "banco".into(),
            OptimizerSpec::Sgd { eta } => format!("sgd(eta={eta:e})"),
            OptimizerSpec::SgdAdaptive { radius } => format!("sgd_adaptive(D={radius:e})"),
            OptimizerSpec::SgdGrid { grid } => format!("sgd_grid({})", grid.len()),
        }
    }

    /// Gradient requests one run of horizon `t` will make.
    pub fn planned_requests(&self, t: u64) -> u64 {
        match self {
            OptimizerSpec::SgdGrid { grid } => grid.len() as u64 * t,
            _ => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub problem: ProblemSpec,
    pub noise: NoiseSpec,
    pub optimizers: Vec<OptimizerSpec>,
    /// One-pass horizons; several give a rate fit.
    pub horizons: Vec<u64>,
    pub n_seeds: u64,
    pub seed_base: u64,
    /// Steps at which the running average is evaluated. Each run uses those
    /// not beyond its horizon and always records its final step.
    pub checkpoints: Vec<u64>,
    /// Size of the frozen evaluation sample for Monte-Carlo risks (ignored
    /// for exact risks).
    pub eval_samples: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Total request budget over the whole experiment.
    #[serde(default)]
    pub budget: Option<u64>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text).context("malformed experiment config")?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let problem = self.problem.build().context("problem spec")?;
        self.noise.model(problem.dim()).context("noise spec")?;
        if self.optimizers.is_empty() {
            bail!("at least one optimizer is required");
        }
        for opt in &self.optimizers {
            match opt {
                OptimizerSpec::Banco => {}
                OptimizerSpec::Sgd { eta } => {
                    if !(*eta > 0.0 && eta.is_finite()) {
                        bail!("sgd learning rate must be positive, got {eta}");
                    }
                }
                OptimizerSpec::SgdAdaptive { radius } => {
                    if !(*radius > 0.0 && radius.is_finite()) {
                        bail!("sgd_adaptive radius must be positive, got {radius}");
                    }
                }
                OptimizerSpec::SgdGrid { grid } => {
                    if grid.is_empty() {
                        bail!("sgd_grid needs a nonempty grid");
                    }
                    if let Some(eta) = grid.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
                        bail!("sgd_grid learning rates must be positive, got {eta}");
                    }
                }
            }
        }
        let labels: std::collections::BTreeSet<String> = self.optimizers.iter().map(|o| o.label()).collect();
        if labels.len() != self.optimizers.len() {
            bail!("optimizers must be distinct");
        }
        if self.horizons.is_empty() {
            bail!("at least one horizon is required");
        }
        if self.horizons.contains(&0) {
            bail!("horizons must be at least 1");
        }
        let mut sorted = self.horizons.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.horizons.len() {
            bail!("horizons must be distinct");
        }
        if self.n_seeds == 0 {
            bail!("n_seeds must be at least 1");
        }
        if self.seed_base.checked_add(self.n_seeds).is_none() {
            bail!("seed range overflows");
        }
        let max_t = *sorted.last().expect("nonempty");
        if let Some(c) = self.checkpoints.iter().find(|&&c| c == 0 || c > max_t) {
            bail!("checkpoint {c} outside [1, {max_t}]");
        }
        if self.eval_samples == 0 {
            bail!("eval_samples must be at least 1");
        }
        Ok(())
    }

    /// Checkpoints of a run with horizon `t`: sorted, deduplicated, ending at `t`.
    pub fn checkpoints_for(&self, t: u64) -> Vec<u64> {
        let mut c: Vec<u64> = self.checkpoints.iter().copied().filter(|&c| c <= t).collect();
        c.push(t);
        c.sort_unstable();
        c.dedup();
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "name": "t",
            "problem": {"kind": "point_mass_abs", "dim": 2, "w_star_norm": 1.0},
            "noise": {"kind": "laplace", "epsilon": 1.0},
            "optimizers": [{"kind": "banco"}, {"kind": "sgd_grid", "grid": [0.1, 0.01]}],
            "horizons": [100],
            "n_seeds": 2,
            "seed_base": 0,
            "checkpoints": [10, 50],
            "eval_samples": 1000
        })
    }

    #[test]
    fn parses_a_complete_config() {
        let spec = ExperimentSpec::from_json(&base().to_string()).unwrap();
        assert_eq!(spec.checkpoints_for(100), vec![10, 50, 100]);
        assert_eq!(spec.optimizers[1].planned_requests(100), 200);
    }

    #[test]
    fn required_fields_have_no_defaults() {
        for key in ["horizons", "noise", "problem"] {
            let mut v = base();
            v.as_object_mut().unwrap().remove(key);
            assert!(ExperimentSpec::from_json(&v.to_string()).is_err(), "{key}");
        }
        let mut v = base();
        v["noise"] = serde_json::json!({"kind": "laplace"});
        assert!(ExperimentSpec::from_json(&v.to_string()).is_err());
        let mut v = base();
        v["problem"] = serde_json::json!({"kind": "point_mass_abs", "w_star_norm": 1.0});
        assert!(ExperimentSpec::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let cases = [
            ("n_seeds", serde_json::json!(0)),
            ("checkpoints", serde_json::json!([0])),
            ("checkpoints", serde_json::json!([101])),
            ("horizons", serde_json::json!([])),
            ("horizons", serde_json::json!([10, 10])),
            ("optimizers", serde_json::json!([])),
            ("optimizers", serde_json::json!([{"kind": "sgd", "eta": 0.0}])),
            ("optimizers", serde_json::json!([{"kind": "sgd_grid", "grid": []}])),
            ("unknown_field", serde_json::json!(1)),
        ];
        for (k, val) in cases {
            let mut v = base();
            v[k] = val;
            assert!(ExperimentSpec::from_json(&v.to_string()).is_err(), "{k}");
        }
    }
}
