//! Local-DP sanitization mechanisms for gradient vectors.
//!
//! The Laplace mechanism adds noise with density `ρ(z) ∝ exp(−(ε/2)‖z‖₂)`
//! on `ℝ^d`. It is sampled exactly by its radial factorization: the radius
//! follows `Gamma(shape = d, rate = ε/2)` and the direction is uniform on
//! the unit sphere.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::vecops::{norm, norm_sq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Laplace,
    Gaussian,
    None,
}

/// Mechanism parameters and the noise constants derived from them.
///
/// `sigma_sq` bounds `E‖ξ‖²`; `(sigma_1d_sq, b)` are the directional
/// sub-exponential parameters, `E exp(β⟨ξ, u⟩) ≤ exp(β² σ²₁D / 2)` for
/// unit `u` and `|β| ≤ 1/b`. `b = 0` means no restriction on `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// ε for Laplace, the per-coordinate scale `s` for Gaussian, 0 for None.
    pub epsilon: f64,
    pub dim: usize,
    pub sigma_sq: f64,
    pub sigma_1d_sq: f64,
    pub b: f64,
}

impl NoiseModel {
    pub fn derive(kind: NoiseKind, epsilon_or_scale: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        let d = dim as f64;
        if kind == NoiseKind::None {
            return Ok(Self::none(dim));
        }
        if !(epsilon_or_scale > 0.0) || !epsilon_or_scale.is_finite() {
            return Err(invalid(format!(
                "noise parameter must be positive and finite, got {epsilon_or_scale}"
            )));
        }
        let p = epsilon_or_scale;
        Ok(match kind {
            NoiseKind::Laplace => NoiseModel {
                kind,
                epsilon: p,
                dim,
                sigma_sq: 4.0 * (d * d + d) / (p * p),
                sigma_1d_sq: 18.0 * d * d / (p * p),
                b: p / 4.0,
            },
            NoiseKind::Gaussian => NoiseModel {
                kind,
                epsilon: p,
                dim,
                sigma_sq: d * p * p,
                sigma_1d_sq: p * p,
                b: 0.0,
            },
            NoiseKind::None => unreachable!(),
        })
    }

    pub fn laplace(epsilon: f64, dim: usize) -> Result<Self> {
        Self::derive(NoiseKind::Laplace, epsilon, dim)
    }

    pub fn gaussian(scale: f64, dim: usize) -> Result<Self> {
        Self::derive(NoiseKind::Gaussian, scale, dim)
    }

    pub fn none(dim: usize) -> Self {
        NoiseModel {
            kind: NoiseKind::None,
            epsilon: 0.0,
            dim,
            sigma_sq: 0.0,
            sigma_1d_sq: 0.0,
            b: 0.0,
        }
    }

    /// Exact second moment `E‖ξ‖²` of the sampler (for Laplace this is
    /// `d(d+1)(2/ε)²`, which coincides with `sigma_sq`).
    pub fn second_moment(&self) -> f64 {
        let d = self.dim as f64;
        match self.kind {
            NoiseKind::Laplace => d * (d + 1.0) * (2.0 / self.epsilon).powi(2),
            NoiseKind::Gaussian => d * self.epsilon * self.epsilon,
            NoiseKind::None => 0.0,
        }
    }

    /// Largest `|β|` for which `E exp(β⟨ξ, u⟩)` is finite (`+inf` if all are).
    pub fn mgf_domain(&self) -> f64 {
        match self.kind {
            NoiseKind::Laplace => self.epsilon / 2.0,
            NoiseKind::Gaussian | NoiseKind::None => f64::INFINITY,
        }
    }
}

/// Reusable sampler for a fixed [`NoiseModel`].
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    model: NoiseModel,
    radius: Option<Gamma<f64>>,
}

impl NoiseSampler {
    pub fn new(model: NoiseModel) -> Result<Self> {
        let radius = match model.kind {
            NoiseKind::Laplace => Some(
                Gamma::new(model.dim as f64, 2.0 / model.epsilon)
                    .map_err(|e| invalid(format!("radial law: {e}")))?,
            ),
            _ => None,
        };
        Ok(NoiseSampler { model, radius })
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    /// Overwrites `out` with a fresh noise vector.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.model.dim);
        match self.model.kind {
            NoiseKind::None => out.fill(0.0),
            NoiseKind::Gaussian => {
                let s = self.model.epsilon;
                for v in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = s * z;
                }
            }
            NoiseKind::Laplace => {
                let gamma = self.radius.as_ref().expect("laplace sampler has a radial law");
                let r = gamma.sample(rng);
                // uniform direction: normalized standard normal, redrawn on the
                // (practically impossible) all-zero draw
                loop {
                    for v in out.iter_mut() {
                        *v = StandardNormal.sample(rng);
                    }
                    let n = norm(out);
                    if n > 0.0 {
                        let scale = r / n;
                        out.iter_mut().for_each(|v| *v *= scale);
                        break;
                    }
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.model.dim];
        self.sample_into(rng, &mut out);
        out
    }
}

/// One draw from the multivariate Laplace mechanism.
pub fn sample_laplace_noise<R: Rng + ?Sized>(model: &NoiseModel, rng: &mut R) -> Result<Vec<f64>> {
    if model.kind != NoiseKind::Laplace {
        return Err(invalid(format!("expected a Laplace model, got {:?}", model.kind)));
    }
    Ok(NoiseSampler::new(*model)?.sample(rng))
}

/// One draw of i.i.d. `N(0, s²)` coordinates.
pub fn sample_gaussian_noise<R: Rng + ?Sized>(model: &NoiseModel, rng: &mut R) -> Result<Vec<f64>> {
    if model.kind != NoiseKind::Gaussian {
        return Err(invalid(format!("expected a Gaussian model, got {:?}", model.kind)));
    }
    Ok(NoiseSampler::new(*model)?.sample(rng))
}

/// `ln` of the normalizing constant `Γ(d)·(2/ε)^d·|S^{d−1}|`, with
/// `|S^{d−1}| = 2π^{d/2}/Γ(d/2)`.
fn laplace_log_normalizer(epsilon: f64, dim: usize) -> f64 {
    let d = dim as f64;
    let ln_sphere = std::f64::consts::LN_2 + 0.5 * d * std::f64::consts::PI.ln() - libm::lgamma(0.5 * d);
    libm::lgamma(d) + d * (2.0 / epsilon).ln() + ln_sphere
}

/// Normalized log-density of the Laplace mechanism at `z`.
pub fn laplace_log_density(model: &NoiseModel, z: &[f64]) -> Result<f64> {
    if model.kind != NoiseKind::Laplace {
        return Err(invalid(format!("expected a Laplace model, got {:?}", model.kind)));
    }
    if z.len() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            got: z.len(),
        });
    }
    Ok(-0.5 * model.epsilon * norm(z) - laplace_log_normalizer(model.epsilon, model.dim))
}

/// Largest absolute log-likelihood ratio between releasing `g` and `g'`,
/// `max_u |ln ρ(u − g) − ln ρ(u − g')|`, over the probe outputs `u`.
///
/// Requires `‖g‖, ‖g'‖ ≤ 1` (the sensitivity the mechanism is calibrated
/// for); under it the ratio never exceeds `(ε/2)‖g − g'‖ ≤ ε`.
pub fn ldp_ratio_check(model: &NoiseModel, g: &[f64], g_prime: &[f64], probes: &[Vec<f64>]) -> Result<f64> {
    const NORM_SLACK: f64 = 1e-12;
    if model.kind != NoiseKind::Laplace {
        return Err(invalid(format!("expected a Laplace model, got {:?}", model.kind)));
    }
    if probes.is_empty() {
        return Err(invalid("at least one probe point is required"));
    }
    for v in [g, g_prime] {
        if v.len() != model.dim {
            return Err(Error::DimensionMismatch {
                expected: model.dim,
                got: v.len(),
            });
        }
        if !(norm_sq(v) <= (1.0 + NORM_SLACK).powi(2)) {
            return Err(Error::Precondition(format!(
                "gradient norm {} exceeds the unit sensitivity bound",
                norm(v)
            )));
        }
    }
    let mut shifted = vec![0.0; model.dim];
    let mut shifted_prime = vec![0.0; model.dim];
    let mut worst: f64 = 0.0;
    for u in probes {
        if u.len() != model.dim {
            return Err(Error::DimensionMismatch {
                expected: model.dim,
                got: u.len(),
            });
        }
        for i in 0..model.dim {
            shifted[i] = u[i] - g[i];
            shifted_prime[i] = u[i] - g_prime[i];
        }
        let r = laplace_log_density(model, &shifted)? - laplace_log_density(model, &shifted_prime)?;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Monte-Carlo estimate of a directional moment generating function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfEstimate {
    pub beta: f64,
    pub mean: f64,
    pub std_error: f64,
    /// `exp(β² σ²₁D / 2)`
    pub bound: f64,
    /// Whether `E exp(β⟨ξ, u⟩)` is finite at this `β`.
    pub finite: bool,
}

impl MgfEstimate {
    /// One-sided check `mean ≤ bound + slack·SE`; only meaningful where the
    /// moment generating function is finite.
    pub fn within_bound(&self, slack_se: f64) -> bool {
        self.mean <= self.bound + slack_se * self.std_error
    }
}

/// Estimates `E exp(β⟨ξ, u⟩)` for the unit direction `u` from `n` draws.
pub fn empirical_mgf<R: Rng + ?Sized>(
    model: &NoiseModel,
    beta: f64,
    direction: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<MgfEstimate> {
    if n < 2 {
        return Err(invalid("need at least two samples"));
    }
    if direction.len() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            got: direction.len(),
        });
    }
    let sampler = NoiseSampler::new(*model)?;
    let mut xi = vec![0.0; model.dim];
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for k in 0..n {
        sampler.sample_into(rng, &mut xi);
        let v = (beta * crate::vecops::dot(&xi, direction)).exp();
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (n - 1) as f64;
    Ok(MgfEstimate {
        beta,
        mean,
        std_error: (var / n as f64).sqrt(),
        bound: (beta * beta * model.sigma_1d_sq / 2.0).exp(),
        finite: beta.abs() < model.mgf_domain(),
    })
}
