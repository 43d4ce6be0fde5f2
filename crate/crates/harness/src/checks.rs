//! Self-checks exposed by the CLI: magnitude closed form against quadrature,
//! and noise moments against their derived constants.

use banco_core::magnitude::{magnitude_closed_form, magnitude_quadrature_oracle, K1};
use banco_core::noise::{empirical_mgf, MgfEstimate};
use banco_core::{NoiseKind, NoiseModel, NoiseSampler};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Relative tolerance of the quadrature reference itself.
const QUADRATURE_TOL: f64 = 1e-12;

/// A 20 × 10 × 10 lattice over x ∈ [−50, 50], y ∈ [1e−3, 200] (log-spaced)
/// and a ∈ (0, K1].
pub fn magnitude_grid() -> Vec<(f64, f64, f64)> {
    let mut pts = Vec::with_capacity(2000);
    for i in 0..20 {
        let x = -50.0 + 100.0 * i as f64 / 19.0;
        for j in 0..10 {
            let y = 1e-3 * (200.0f64 / 1e-3).powf(j as f64 / 9.0);
            for k in 0..10 {
                let a = K1 * (k + 1) as f64 / 10.0;
                pts.push((x, y, a));
            }
        }
    }
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeCheck {
    pub points: usize,
    pub tolerance: f64,
    pub max_rel_err: f64,
    pub worst: (f64, f64, f64),
    pub failures: usize,
}

impl MagnitudeCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Relative error `|m − m_ref| / |m_ref|`, absolute when `m_ref = 0`.
pub fn relative_error(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        ((value - reference) / reference).abs()
    }
}

// negated comparisons so a NaN error counts as a failure
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn check_magnitude(points: &[(f64, f64, f64)], tolerance: f64) -> MagnitudeCheck {
    let mut report = MagnitudeCheck {
        points: points.len(),
        tolerance,
        max_rel_err: 0.0,
        worst: (f64::NAN, f64::NAN, f64::NAN),
        failures: 0,
    };
    for &(x, y, a) in points {
        let err = match (magnitude_closed_form(x, y, a), magnitude_quadrature_oracle(x, y, a, QUADRATURE_TOL)) {
            (Ok(m), Ok(r)) => relative_error(m, r),
            _ => f64::INFINITY,
        };
        if !(err <= tolerance) {
            report.failures += 1;
        }
        if !(err <= report.max_rel_err) {
            report.max_rel_err = err;
            report.worst = (x, y, a);
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCheck {
    pub kind: NoiseKind,
    pub parameter: f64,
    pub dim: usize,
    pub samples: usize,
    pub second_moment: f64,
    pub second_moment_se: f64,
    pub expected_second_moment: f64,
    pub sigma_sq: f64,
    pub rel_err: f64,
    pub moment_ok: bool,
    pub mgf: Vec<MgfEstimate>,
    pub mgf_ok: bool,
}

impl NoiseCheck {
    pub fn passed(&self) -> bool {
        self.moment_ok && self.mgf_ok
    }
}

/// Empirical `E‖ξ‖²` and directional MGF at `β ∈ {¼, ½, 1}/b` (or
/// `{¼, ½, 1}/σ₁D` when `b = 0`), plus half the finite MGF domain when the
/// nominal range overshoots it. The second moment passes within
/// `max(2%, 4 SE)`; the MGF bound is only checked where the MGF is finite.
pub fn check_noise(model: &NoiseModel, samples: usize, seed: u64) -> anyhow::Result<NoiseCheck> {
    anyhow::ensure!(samples >= 2, "need at least two samples");
    let sampler = NoiseSampler::new(*model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xi = vec![0.0; model.dim];
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for k in 0..samples {
        sampler.sample_into(&mut rng, &mut xi);
        let v: f64 = xi.iter().map(|z| z * z).sum();
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let se = (m2 / (samples - 1) as f64 / samples as f64).sqrt();
    let expected = model.second_moment();
    let rel_err = relative_error(mean, expected);
    let moment_ok = match model.kind {
        NoiseKind::None => mean == 0.0,
        _ => (mean - expected).abs() <= (0.02 * expected).max(4.0 * se),
    };

    let mut mgf = Vec::new();
    let mut mgf_ok = true;
    if model.kind != NoiseKind::None {
        let unit = if model.b > 0.0 { 1.0 / model.b } else { 1.0 / model.sigma_1d_sq.sqrt() };
        let mut u = vec![0.0; model.dim];
        u[0] = 1.0;
        let mut betas: Vec<f64> = [0.25, 0.5, 1.0].iter().map(|f| f * unit).collect();
        let domain = model.mgf_domain();
        if domain.is_finite() && domain / 2.0 < unit {
            betas.insert(0, domain / 2.0);
        }
        for beta in betas {
            let est = empirical_mgf(model, beta, &u, samples, &mut rng)?;
            if est.finite && !est.within_bound(4.0) {
                mgf_ok = false;
            }
            mgf.push(est);
        }
    }
    Ok(NoiseCheck {
        kind: model.kind,
        parameter: model.epsilon,
        dim: model.dim,
        samples,
        second_moment: mean,
        second_moment_se: se,
        expected_second_moment: expected,
        sigma_sq: model.sigma_sq,
        rel_err,
        moment_ok,
        mgf,
        mgf_ok,
    })
}
