//! Synthetic stochastic convex risks `R(w) = E_x ℓ(w, x)` with known (or
//! precomputed) minimizers, their subgradient oracles and risk estimates.
//!
//! Every shipped loss is 1-Lipschitz in `w`, so raw subgradients satisfy
//! `‖g‖ ≤ 1`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::banco::Banco;
use crate::error::{invalid, Error, Result};
use crate::ledger::SharedLedger;
use crate::noise::{NoiseModel, NoiseSampler};
use crate::optimizer::{OnlineOptimizer, SanitizedGradient};
use crate::vecops::{all_finite, axpy, dot, norm, norm_sq};

/// Steps of the noiseless run that locates the hinge-loss minimizer.
const HINGE_REFERENCE_STEPS: u64 = 400_000;
const HINGE_REFERENCE_SEED: u64 = 0x5eed_4109;

/// Serializable description of a problem; [`ProblemSpec::build`] turns it
/// into a [`Problem`]. The planted vector is `w_star_norm · 1/√d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `ℓ(w) = ‖w − w*‖`, no randomness.
    PointMassAbs { dim: usize, w_star_norm: f64 },
    /// `ℓ(w, x) = ‖w − x‖` with `x = w* + spread·u`, `u` uniform in the unit
    /// ball. By symmetry the minimizer is `w*`.
    NoisyAbs { dim: usize, w_star_norm: f64, spread: f64 },
    /// `ℓ(w, (x, y)) = max(0, 1 − y⟨w, x⟩)`, `x` uniform on the sphere and
    /// `y = sign⟨w*, x⟩` flipped with probability `label_noise`.
    Hinge { dim: usize, w_star_norm: f64, label_noise: f64 },
    /// `ℓ(w, (x, y)) = ln(1 + e^{−y⟨w, x⟩})`, `x` uniform on the sphere and
    /// `P(y = 1 | x) = σ(⟨w*, x⟩)`, so `w*` is the exact minimizer.
    Logistic { dim: usize, w_star_norm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    PointMassAbs,
    NoisyAbs,
    Hinge,
    Logistic,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::PointMassAbs => "point_mass_abs",
            ProblemKind::NoisyAbs => "noisy_abs",
            ProblemKind::Hinge => "hinge",
            ProblemKind::Logistic => "logistic",
        }
    }
}

impl ProblemSpec {
    pub fn kind(&self) -> ProblemKind {
        match self {
            ProblemSpec::PointMassAbs { .. } => ProblemKind::PointMassAbs,
            ProblemSpec::NoisyAbs { .. } => ProblemKind::NoisyAbs,
            ProblemSpec::Hinge { .. } => ProblemKind::Hinge,
            ProblemSpec::Logistic { .. } => ProblemKind::Logistic,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            ProblemSpec::PointMassAbs { dim, .. }
            | ProblemSpec::NoisyAbs { dim, .. }
            | ProblemSpec::Hinge { dim, .. }
            | ProblemSpec::Logistic { dim, .. } => dim,
        }
    }

    pub fn w_star_norm(&self) -> f64 {
        match *self {
            ProblemSpec::PointMassAbs { w_star_norm, .. }
            | ProblemSpec::NoisyAbs { w_star_norm, .. }
            | ProblemSpec::Hinge { w_star_norm, .. }
            | ProblemSpec::Logistic { w_star_norm, .. } => w_star_norm,
        }
    }

    pub fn build(&self) -> Result<Problem> {
        let dim = self.dim();
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        let r = self.w_star_norm();
        if !(r >= 0.0) || !r.is_finite() {
            return Err(invalid(format!("w_star_norm must be finite and nonnegative, got {r}")));
        }
        let planted = vec![r / (dim as f64).sqrt(); dim];
        match *self {
            ProblemSpec::PointMassAbs { .. } => Problem::point_mass_abs(planted),
            ProblemSpec::NoisyAbs { spread, .. } => Problem::noisy_abs(planted, spread),
            ProblemSpec::Hinge { label_noise, .. } => Problem::hinge(planted, label_noise),
            ProblemSpec::Logistic { .. } => Problem::logistic(planted),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DataParams {
    PointMass,
    Ball { spread: f64 },
    PlantedHinge { label_noise: f64 },
    PlantedLogistic,
}

/// An immutable problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    kind: ProblemKind,
    /// The vector generating the data (labels or centre).
    planted: Vec<f64>,
    /// The risk minimizer: exact, or for hinge a long noiseless run.
    w_star: Vec<f64>,
    params: DataParams,
}

/// One draw from `ρ_X`.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Point(Vec<f64>),
    Labeled { x: Vec<f64>, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    /// 0 for closed-form risks.
    pub std_error: f64,
}

impl Problem {
    pub fn point_mass_abs(w_star: Vec<f64>) -> Result<Self> {
        check_vector(&w_star)?;
        Ok(Problem {
            kind: ProblemKind::PointMassAbs,
            planted: w_star.clone(),
            w_star,
            params: DataParams::PointMass,
        })
    }

    pub fn noisy_abs(w_star: Vec<f64>, spread: f64) -> Result<Self> {
        check_vector(&w_star)?;
        if !(spread >= 0.0) || !spread.is_finite() {
            return Err(invalid(format!("spread must be finite and nonnegative, got {spread}")));
        }
        Ok(Problem {
            kind: ProblemKind::NoisyAbs,
            planted: w_star.clone(),
            w_star,
            params: DataParams::Ball { spread },
        })
    }

    pub fn logistic(w_star: Vec<f64>) -> Result<Self> {
        check_vector(&w_star)?;
        Ok(Problem {
            kind: ProblemKind::Logistic,
            planted: w_star.clone(),
            w_star,
            params: DataParams::PlantedLogistic,
        })
    }

    /// Builds the hinge problem and locates its minimizer with a noiseless
    /// one-pass run (deterministic: fixed internal seed).
    pub fn hinge(planted: Vec<f64>, label_noise: f64) -> Result<Self> {
        check_vector(&planted)?;
        if !(0.0..0.5).contains(&label_noise) {
            return Err(invalid(format!("label_noise must lie in [0, 0.5), got {label_noise}")));
        }
        let mut p = Problem {
            kind: ProblemKind::Hinge,
            w_star: planted.clone(),
            planted,
            params: DataParams::PlantedHinge { label_noise },
        };
        p.w_star = p.reference_minimizer(HINGE_REFERENCE_STEPS, HINGE_REFERENCE_SEED)?;
        Ok(p)
    }

    /// Average iterate of a noiseless parameter-free run of `steps` fresh
    /// samples; an approximation of the minimizer for kinds without a closed
    /// form.
    pub fn reference_minimizer(&self, steps: u64, seed: u64) -> Result<Vec<f64>> {
        let dim = self.dim();
        let mut opt = Banco::new(dim, 1.0, &NoiseModel::none(dim))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = vec![0.0; dim];
        let mut x = vec![0.0; dim];
        for t in 1..=steps {
            self.raw_subgradient_into(opt.iterate(), &mut rng, &mut x, &mut g);
            opt.step(&SanitizedGradient { vec: g.clone(), step: t })?;
        }
        Ok(opt.average())
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.w_star.len()
    }

    pub fn w_star(&self) -> &[f64] {
        &self.w_star
    }

    pub fn planted(&self) -> &[f64] {
        &self.planted
    }

    pub fn params(&self) -> DataParams {
        self.params
    }

    /// Certified bound on raw subgradient norms.
    pub fn g_bound(&self) -> f64 {
        1.0
    }

    /// Whether [`Problem::risk`] is exact rather than Monte Carlo.
    pub fn has_exact_risk(&self) -> bool {
        self.kind == ProblemKind::PointMassAbs
    }

    /// Draws `x ~ ρ_X` into `x` and returns the label (1 for unlabeled kinds).
    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64]) -> f64 {
        match self.params {
            DataParams::PointMass => {
                x.copy_from_slice(&self.planted);
                1.0
            }
            DataParams::Ball { spread } => {
                unit_sphere_into(rng, x);
                let d = x.len() as f64;
                let u: f64 = rng.random();
                let r = spread * u.powf(1.0 / d);
                for (xi, ci) in x.iter_mut().zip(&self.planted) {
                    *xi = ci + r * *xi;
                }
                1.0
            }
            DataParams::PlantedHinge { label_noise } => {
                unit_sphere_into(rng, x);
                let margin = dot(&self.planted, x);
                let clean = if margin >= 0.0 { 1.0 } else { -1.0 };
                let flip: f64 = rng.random();
                if flip < label_noise {
                    -clean
                } else {
                    clean
                }
            }
            DataParams::PlantedLogistic => {
                unit_sphere_into(rng, x);
                let p = sigmoid(dot(&self.planted, x));
                let u: f64 = rng.random();
                if u < p {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Sample {
        let mut x = vec![0.0; self.dim()];
        let y = self.draw_into(rng, &mut x);
        match self.kind {
            ProblemKind::PointMassAbs | ProblemKind::NoisyAbs => Sample::Point(x),
            ProblemKind::Hinge | ProblemKind::Logistic => Sample::Labeled { x, y },
        }
    }

    fn loss_at(&self, w: &[f64], x: &[f64], y: f64) -> f64 {
        match self.kind {
            ProblemKind::PointMassAbs | ProblemKind::NoisyAbs => dist(w, x),
            ProblemKind::Hinge => (1.0 - y * dot(w, x)).max(0.0),
            ProblemKind::Logistic => softplus(-y * dot(w, x)),
        }
    }

    /// Writes `−∂ℓ(w, x)` for the given sample into `out`.
    fn neg_subgradient_at(&self, w: &[f64], x: &[f64], y: f64, out: &mut [f64]) {
        match self.kind {
            ProblemKind::PointMassAbs | ProblemKind::NoisyAbs => {
                let r = dist(w, x);
                if r == 0.0 {
                    // 0 ∈ ∂‖·‖ at the kink
                    out.fill(0.0);
                } else {
                    let inv = 1.0 / r;
                    for ((o, xi), wi) in out.iter_mut().zip(x).zip(w) {
                        *o = (xi - wi) * inv;
                    }
                }
            }
            ProblemKind::Hinge => {
                if y * dot(w, x) < 1.0 {
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = y * xi;
                    }
                } else {
                    out.fill(0.0);
                }
            }
            ProblemKind::Logistic => {
                let c = y * sigmoid(-y * dot(w, x));
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = c * xi;
                }
            }
        }
        // rounding can push a unit vector a few ulps past 1
        let n2 = norm_sq(out);
        if n2 > 1.0 {
            let s = 1.0 / n2.sqrt();
            out.iter_mut().for_each(|v| *v *= s);
        }
        assert!(norm(out) <= 1.0 + 1e-12, "raw subgradient norm exceeds 1");
    }

    /// Negative subgradient at `w` for a fresh sample, using `scratch` for
    /// the sample.
    pub fn raw_subgradient_into<R: Rng + ?Sized>(&self, w: &[f64], rng: &mut R, scratch: &mut [f64], out: &mut [f64]) {
        let y = self.draw_into(rng, scratch);
        self.neg_subgradient_at(w, scratch, y, out);
    }

    pub fn raw_subgradient<R: Rng + ?Sized>(&self, w: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.check_point(w)?;
        let mut x = vec![0.0; self.dim()];
        let mut g = vec![0.0; self.dim()];
        self.raw_subgradient_into(w, rng, &mut x, &mut g);
        Ok(g)
    }

    /// Exact `R(w)` for the point mass; otherwise the mean loss over `n_mc`
    /// fresh samples with its standard error.
    pub fn risk<R: Rng + ?Sized>(&self, w: &[f64], n_mc: usize, rng: &mut R) -> Result<RiskEstimate> {
        self.check_point(w)?;
        if self.has_exact_risk() {
            return Ok(RiskEstimate {
                value: dist(w, &self.w_star),
                std_error: 0.0,
            });
        }
        if n_mc == 0 {
            return Err(invalid("n_mc must be at least 1"));
        }
        let mut x = vec![0.0; self.dim()];
        let mut stats = Welford::default();
        for _ in 0..n_mc {
            let y = self.draw_into(rng, &mut x);
            stats.push(self.loss_at(w, &x, y));
        }
        Ok(stats.estimate())
    }

    /// A frozen evaluation sample, so different iterates are compared on the
    /// same draws.
    pub fn eval_set(&self, n: usize, seed: u64) -> Result<EvalSet> {
        if n == 0 {
            return Err(invalid("evaluation set must contain at least one sample"));
        }
        let d = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = if self.has_exact_risk() { 1 } else { n };
        let mut xs = vec![0.0; n * d];
        let mut ys = vec![0.0; n];
        for (x, y) in xs.chunks_exact_mut(d).zip(ys.iter_mut()) {
            *y = self.draw_into(&mut rng, x);
        }
        Ok(EvalSet { xs, ys, dim: d })
    }

    /// `risk(w) − risk(w*)`; exact for the point mass, otherwise estimated on
    /// `eval` with common samples for both terms.
    pub fn suboptimality(&self, w: &[f64], eval: &EvalSet) -> Result<RiskEstimate> {
        self.check_point(w)?;
        if self.has_exact_risk() {
            return Ok(RiskEstimate {
                value: dist(w, &self.w_star),
                std_error: 0.0,
            });
        }
        eval.check(self)?;
        let mut stats = Welford::default();
        for (x, &y) in eval.xs.chunks_exact(eval.dim).zip(&eval.ys) {
            stats.push(self.loss_at(w, x, y) - self.loss_at(&self.w_star, x, y));
        }
        Ok(stats.estimate())
    }

    /// Mean loss of `w` on `eval`.
    pub fn risk_on(&self, w: &[f64], eval: &EvalSet) -> Result<RiskEstimate> {
        self.check_point(w)?;
        if self.has_exact_risk() {
            return Ok(RiskEstimate {
                value: dist(w, &self.w_star),
                std_error: 0.0,
            });
        }
        eval.check(self)?;
        let mut stats = Welford::default();
        for (x, &y) in eval.xs.chunks_exact(eval.dim).zip(&eval.ys) {
            stats.push(self.loss_at(w, x, y));
        }
        Ok(stats.estimate())
    }

    /// Per-sample losses of `w` on `eval`, in sample order.
    pub fn losses_on(&self, w: &[f64], eval: &EvalSet) -> Result<Vec<f64>> {
        self.check_point(w)?;
        eval.check(self)?;
        Ok(eval
            .xs
            .chunks_exact(eval.dim)
            .zip(&eval.ys)
            .map(|(x, &y)| self.loss_at(w, x, y))
            .collect())
    }

    fn check_point(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        if !all_finite(w) {
            return Err(Error::NonFinite("query point"));
        }
        Ok(())
    }
}

/// Samples frozen by [`Problem::eval_set`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    xs: Vec<f64>,
    ys: Vec<f64>,
    dim: usize,
}

impl EvalSet {
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    fn check(&self, problem: &Problem) -> Result<()> {
        if self.dim != problem.dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.dim(),
                got: self.dim,
            });
        }
        Ok(())
    }
}

/// Sanitized gradient oracle: each query draws a fresh sample and fresh
/// noise, and is charged to the ledger before anything is released.
///
/// Sample and noise draws come from separate streams of the same seed, so
/// two oracles with one seed see identical data whatever their queries.
#[derive(Debug, Clone)]
pub struct SanitizedOracle {
    problem: Arc<Problem>,
    sampler: NoiseSampler,
    ledger: SharedLedger,
    label: String,
    data_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    scratch: Vec<f64>,
    noise: Vec<f64>,
    step: u64,
}

impl SanitizedOracle {
    pub fn new(problem: Arc<Problem>, noise: NoiseModel, ledger: SharedLedger, label: impl Into<String>, seed: u64) -> Result<Self> {
        if noise.dim != problem.dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.dim(),
                got: noise.dim,
            });
        }
        let mut data_rng = ChaCha8Rng::seed_from_u64(seed);
        data_rng.set_stream(0);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
        noise_rng.set_stream(1);
        let d = problem.dim();
        Ok(SanitizedOracle {
            problem,
            sampler: NoiseSampler::new(noise)?,
            ledger,
            label: label.into(),
            data_rng,
            noise_rng,
            scratch: vec![0.0; d],
            noise: vec![0.0; d],
            step: 0,
        })
    }

    pub fn requests(&self) -> u64 {
        self.step
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn query(&mut self, w: &[f64]) -> Result<SanitizedGradient> {
        self.problem.check_point(w)?;
        self.ledger.charge(&self.label, 1)?;
        let mut g = vec![0.0; self.problem.dim()];
        self.problem
            .raw_subgradient_into(w, &mut self.data_rng, &mut self.scratch, &mut g);
        self.sampler.sample_into(&mut self.noise_rng, &mut self.noise);
        axpy(1.0, &self.noise, &mut g);
        self.step += 1;
        SanitizedGradient::new(g, self.step)
    }
}

impl crate::optimizer::GradientOracle for SanitizedOracle {
    fn query(&mut self, w: &[f64]) -> Result<SanitizedGradient> {
        SanitizedOracle::query(self, w)
    }
}

pub fn sanitized_oracle(
    problem: Arc<Problem>,
    noise: NoiseModel,
    ledger: SharedLedger,
    label: impl Into<String>,
    seed: u64,
) -> Result<SanitizedOracle> {
    SanitizedOracle::new(problem, noise, ledger, label, seed)
}

#[derive(Debug, Default, Clone, Copy)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn estimate(&self) -> RiskEstimate {
        let std_error = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        } else {
            0.0
        };
        RiskEstimate {
            value: self.mean,
            std_error,
        }
    }
}

fn check_vector(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(invalid("dimension must be at least 1"));
    }
    if !all_finite(v) {
        return Err(Error::NonFinite("planted vector"));
    }
    Ok(())
}

fn unit_sphere_into<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let n = norm(out);
        if n > 0.0 {
            out.iter_mut().for_each(|v| *v /= n);
            return;
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
