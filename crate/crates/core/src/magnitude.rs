//! One-dimensional coin-betting learner for the magnitude of the iterate.
//!
//! After `t` coins `s_1..s_t` the bet is
//!
//! ```text
//! m(x, y, a) = 1/(2a) ∫_{-a}^{a} β exp(β x − β² y) dβ,   x = Σ s_i,  y = t (σ²/2 + G²)
//! ```
//!
//! Substituting `β = a τ` gives `m = (a/2) F(a x, a² y)` with
//! `F(X, Y) = ∫_{-1}^{1} τ exp(X τ − Y τ²) dτ`. `F` is evaluated as
//! `sign · exp(ln|F|)` so that neither the erf/exp products of the closed
//! form nor the result itself overflow before the caller asks for a plain
//! `f64`:
//!
//! * `Y > 1`, peak `X/(2Y)` inside the interval: scale by `exp(X²/4Y)`,
//!   leaving `erf(P) + erf(Q)` and `exp(-Q²)`.
//! * `Y > 1`, peak outside: scale by `exp(X − Y)`; the erf pair becomes
//!   `erfcx(|Q|) − erfcx(P)·exp(−2X)`.
//! * `Y ≤ 1`: the two closed-form terms cancel to leading order in `Y`, so
//!   `F` is summed as `Σ_k (−Y)^k/k! · M_{2k+1}(X)` over the moments
//!   `M_n(X) = ∫ τⁿ e^{Xτ} dτ`.
//!
//! with `P = (2Y + X)/(2√Y)` and `Q = (2Y − X)/(2√Y)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::noise::NoiseModel;
use crate::special::{erf, erfcx};

/// Constant in the betting-fraction half-range `a = min(K1/G, 1/b)`.
pub const K1: f64 = 0.6838;

const SQRT_PI: f64 = 1.772_453_850_905_516;
const SERIES_MAX_Y: f64 = 1.0;
const SERIES_TERMS: usize = 30;
/// Above this `X` the scaled moments come from the forward recurrence.
const RECURRENCE_MIN_X: f64 = 50.0;

/// A real number stored as `sign · exp(ln_abs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedLog {
    /// −1, 0 or +1.
    pub sign: f64,
    pub ln_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        sign: 0.0,
        ln_abs: f64::NEG_INFINITY,
    };

    pub fn value(self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.ln_abs.exp()
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0.0
    }

    fn negate_if(self, negative: bool) -> SignedLog {
        if negative {
            SignedLog {
                sign: -self.sign,
                ..self
            }
        } else {
            self
        }
    }
}

/// `a = min(K1/G, 1/b)`; `b = 0` stands for `1/b = +∞`.
pub fn betting_fraction_range(g_bound: f64, b: f64) -> Result<f64> {
    if !(g_bound > 0.0) || !g_bound.is_finite() {
        return Err(invalid(format!("gradient bound must be positive, got {g_bound}")));
    }
    if !(b >= 0.0) || !b.is_finite() {
        return Err(invalid(format!("sub-exponential scale must be non-negative, got {b}")));
    }
    let by_gradient = K1 / g_bound;
    Ok(if b == 0.0 {
        by_gradient
    } else {
        by_gradient.min(1.0 / b)
    })
}

fn check_inputs(x: f64, y: f64, a: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(invalid(format!("coin sum must be finite, got {x}")));
    }
    if !(y > 0.0) || !y.is_finite() {
        return Err(invalid(format!("variance sum y must be positive and finite, got {y}")));
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid(format!("betting range a must be positive and finite, got {a}")));
    }
    Ok(())
}

/// Closed-form magnitude in log representation. Exact oddness in `x`.
pub fn ln_magnitude(x: f64, y: f64, a: f64) -> Result<SignedLog> {
    check_inputs(x, y, a)?;
    if x == 0.0 {
        return Ok(SignedLog::ZERO);
    }
    let big_x = a * x.abs();
    let big_y = a * a * y;
    let (scaled, log_scale) = if big_y <= SERIES_MAX_Y {
        potential_series(big_x, big_y)
    } else {
        potential_closed(big_x, big_y)
    };
    debug_assert!(scaled > 0.0, "F({big_x}, {big_y}) scaled to {scaled}");
    let ln_abs = (0.5 * a).ln() + log_scale + scaled.ln();
    Ok(SignedLog { sign: 1.0, ln_abs }.negate_if(x < 0.0))
}

/// `m_{t+1}` from the coin sum `x`, the variance sum `y > 0` and the
/// half-range `a`. Saturates to `±inf` once `|m|` exceeds `f64::MAX`.
pub fn magnitude_closed_form(x: f64, y: f64, a: f64) -> Result<f64> {
    ln_magnitude(x, y, a).map(SignedLog::value)
}

/// Returns `(S, L)` with `F(X, Y) = S · exp(L)` for `X > 0`, `Y > 1`.
fn potential_closed(big_x: f64, big_y: f64) -> (f64, f64) {
    let root_y = big_y.sqrt();
    let p = (2.0 * big_y + big_x) / (2.0 * root_y);
    let q = (2.0 * big_y - big_x) / (2.0 * root_y);
    let coef = big_x * SQRT_PI / (4.0 * big_y * root_y);
    // 1 − e^{−2X}, accurate for small X
    let one_minus_e2x = -(-2.0 * big_x).exp_m1();
    if q >= 0.0 {
        let s = coef * (erf(p) + erf(q)) - (-q * q).exp() * one_minus_e2x / (2.0 * big_y);
        (s, big_x * big_x / (4.0 * big_y))
    } else {
        let s = coef * (erfcx(-q) - erfcx(p) * (-2.0 * big_x).exp()) - one_minus_e2x / (2.0 * big_y);
        (s, big_x - big_y)
    }
}

/// Returns `(S, L)` with `F(X, Y) = S · exp(L)` for `X > 0`, `Y ≤ 1`.
fn potential_series(big_x: f64, big_y: f64) -> (f64, f64) {
    let orders = 2 * SERIES_TERMS + 2;
    let (moments, log_scale) = if big_x > RECURRENCE_MIN_X {
        (scaled_moments_recurrence(big_x, orders), big_x)
    } else {
        (moments_power_series(big_x, orders), 0.0)
    };
    let mut sum = 0.0;
    let mut coef = 1.0;
    for k in 0..SERIES_TERMS {
        let term = coef * moments[2 * k + 1];
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        coef *= -big_y / (k as f64 + 1.0);
    }
    (sum, log_scale)
}

/// `M_n(X) = ∫_{-1}^{1} τⁿ e^{Xτ} dτ` for `n < orders`, by the all-positive
/// expansion `M_n = Σ_j X^j/j! · 2/(n+j+1)` over `j ≡ n (mod 2)`.
fn moments_power_series(big_x: f64, orders: usize) -> Vec<f64> {
    // X^j/j! for j = 0, 1, 2, ... until negligible past the peak at j ≈ X.
    let mut powers = vec![1.0];
    let mut t = 1.0;
    let mut peak: f64 = 1.0;
    let mut j = 0usize;
    loop {
        j += 1;
        t *= big_x / j as f64;
        peak = peak.max(t);
        powers.push(t);
        if (j as f64) > big_x && t < 1e-20 * peak {
            break;
        }
    }
    (0..orders)
        .map(|n| {
            powers
                .iter()
                .enumerate()
                .skip(n % 2)
                .step_by(2)
                .map(|(j, &p)| 2.0 * p / (n + j + 1) as f64)
                .sum()
        })
        .collect()
}

/// `e^{−X} M_n(X)` by integrating by parts upward in `n`; stable while `n ≲ X`.
fn scaled_moments_recurrence(big_x: f64, orders: usize) -> Vec<f64> {
    let e2x = (-2.0 * big_x).exp();
    let mut out = Vec::with_capacity(orders);
    let mut prev = -(-2.0 * big_x).exp_m1() / big_x;
    out.push(prev);
    for n in 1..orders {
        let boundary = if n % 2 == 0 { 1.0 - e2x } else { 1.0 + e2x };
        prev = (boundary - n as f64 * prev) / big_x;
        out.push(prev);
    }
    out
}

/// Adaptive-quadrature evaluation of the magnitude integral, used as an
/// independent reference for [`ln_magnitude`]. Accepts `y = 0`.
///
/// The integral is folded onto `[0, a]` as `∫ β e^{φ(β)} (1 − e^{−2β|x|}) dβ`
/// with `φ(β) = β|x| − β²y`, and the integrand is rescaled by `e^{−max φ}`.
#[cfg(feature = "diagnostics")]
pub fn ln_magnitude_quadrature(x: f64, y: f64, a: f64, tol: f64) -> Result<SignedLog> {
    use crate::error::Error;
    use crate::quadrature::integrate;

    if !x.is_finite() || !(y >= 0.0) || !y.is_finite() || !(a > 0.0) || !a.is_finite() {
        return Err(invalid(format!("bad quadrature inputs x={x}, y={y}, a={a}")));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    if x == 0.0 {
        return Ok(SignedLog::ZERO);
    }
    let ax = x.abs();
    let peak = if y > 0.0 { (ax / (2.0 * y)).min(a) } else { a };
    let phi_max = peak * ax - peak * peak * y;
    let integrand = |beta: f64| {
        let phi = beta * ax - beta * beta * y;
        -beta * (phi - phi_max).exp() * (-2.0 * beta * ax).exp_m1()
    };
    let mut breaks = vec![peak];
    if y > 0.0 {
        let width = 1.0 / (2.0 * y).sqrt();
        for k in [-8.0, -3.0, -1.0, 1.0, 3.0, 8.0] {
            breaks.push(peak + k * width);
        }
    }
    if ax > 0.0 {
        // the boundary layer near β = a has width ~ 1/|x| when the peak sits there
        for k in [1.0, 5.0, 30.0] {
            breaks.push(a - k / ax);
        }
    }
    let est = integrate(integrand, 0.0, a, &breaks, tol, 0.0, 4000).map_err(|e| match e {
        Error::Convergence { estimate, error_bound } => Error::Convergence {
            estimate: estimate * phi_max.exp() / (2.0 * a),
            error_bound: error_bound * phi_max.exp() / (2.0 * a),
        },
        other => other,
    })?;
    if !(est.value > 0.0) {
        return Ok(SignedLog::ZERO);
    }
    let ln_abs = est.value.ln() + phi_max - (2.0 * a).ln();
    Ok(SignedLog { sign: 1.0, ln_abs }.negate_if(x < 0.0))
}

/// Quadrature reference for the magnitude, to relative tolerance `tol`.
#[cfg(feature = "diagnostics")]
pub fn magnitude_quadrature_oracle(x: f64, y: f64, a: f64, tol: f64) -> Result<f64> {
    ln_magnitude_quadrature(x, y, a, tol).map(SignedLog::value)
}

/// Running state of the magnitude learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BettingState {
    coin_sum: f64,
    step: u64,
    y_per_step: f64,
    a: f64,
    current: SignedLog,
}

impl BettingState {
    pub fn new(a: f64, y_per_step: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(invalid(format!("betting range a must be positive, got {a}")));
        }
        if !(y_per_step > 0.0) || !y_per_step.is_finite() {
            return Err(invalid(format!("y per step must be positive, got {y_per_step}")));
        }
        Ok(BettingState {
            coin_sum: 0.0,
            step: 0,
            y_per_step,
            a,
            current: SignedLog::ZERO,
        })
    }

    /// Configures the learner for gradients bounded by `g_bound` under `noise`:
    /// `a = min(K1/G, 1/b)` and `y_per_step = σ²/2 + G²`.
    pub fn for_noise(g_bound: f64, noise: &NoiseModel) -> Result<Self> {
        let a = betting_fraction_range(g_bound, noise.b)?;
        Self::new(a, noise.sigma_sq / 2.0 + g_bound * g_bound)
    }

    /// Adds coin `s` and recomputes the bet with `y = t·y_per_step` at the new `t`.
    pub fn update(&mut self, coin: f64) -> Result<f64> {
        if !coin.is_finite() {
            return Err(invalid(format!("coin must be finite, got {coin}")));
        }
        let coin_sum = self.coin_sum + coin;
        let step = self.step + 1;
        self.current = ln_magnitude(coin_sum, step as f64 * self.y_per_step, self.a)?;
        self.coin_sum = coin_sum;
        self.step = step;
        Ok(self.magnitude())
    }

    pub fn magnitude(&self) -> f64 {
        self.current.value()
    }

    pub fn ln_magnitude(&self) -> SignedLog {
        self.current
    }

    pub fn coin_sum(&self) -> f64 {
        self.coin_sum
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn y_per_step(&self) -> f64 {
        self.y_per_step
    }
}
