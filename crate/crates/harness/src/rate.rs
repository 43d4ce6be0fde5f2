//! Log-log least-squares fit of suboptimality against horizon.

use anyhow::bail;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `ln s = intercept + slope · ln T` over `(T, s)` points.
pub fn fit_rate_slope(points: &[(f64, f64)]) -> anyhow::Result<RateFit> {
    if points.len() < 3 {
        bail!("a rate fit needs at least 3 points, got {}", points.len());
    }
    if let Some(&(t, s)) = points.iter().find(|(t, s)| !(*t > 0.0 && *s > 0.0 && t.is_finite() && s.is_finite())) {
        bail!("rate fit points must be positive and finite, got ({t}, {s})");
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        bail!("rate fit needs at least two distinct horizons");
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    // a constant series is fitted exactly by slope 0
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_square_root_points() {
        let pts: Vec<(f64, f64)> = [1e3, 1e4, 1e5].iter().map(|&t: &f64| (t, t.powf(-0.5))).collect();
        let f = fit_rate_slope(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!(f.intercept.abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_points_have_zero_slope() {
        let f = fit_rate_slope(&[(10.0, 3.0), (100.0, 3.0), (1000.0, 3.0)]).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn rejects_bad_points() {
        assert!(fit_rate_slope(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
        assert!(fit_rate_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_rate_slope(&[(1.0, 1.0), (2.0, -1.0), (3.0, 1.0)]).is_err());
        assert!(fit_rate_slope(&[(5.0, 1.0), (5.0, 2.0), (5.0, 3.0)]).is_err());
    }
}
