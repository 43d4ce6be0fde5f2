//! The stable magnitude evaluation against 50-digit references on a grid
//! where `m` itself leaves double range (|x| up to 1e4).

use banco_core::magnitude::ln_magnitude;

struct Point {
    x: f64,
    y: f64,
    a: f64,
    sign: f64,
    ln_abs: f64,
}

fn reference() -> Vec<Point> {
    include_str!("data/magnitude_reference.csv")
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            Point {
                x: f[0],
                y: f[1],
                a: f[2],
                sign: f[3],
                ln_abs: f[4],
            }
        })
        .collect()
}

#[test]
fn overflow_grid_matches_extended_precision() {
    let pts = reference();
    assert_eq!(pts.len(), 576);
    let mut worst = 0.0f64;
    for p in &pts {
        let m = ln_magnitude(p.x, p.y, p.a).unwrap();
        assert_eq!(m.sign, p.sign, "sign at ({}, {}, {})", p.x, p.y, p.a);
        // |Δ ln m| is the relative error of m to first order
        let err = (m.ln_abs - p.ln_abs).abs();
        assert!(err <= 1e-6, "({}, {}, {}): ln|m| {} vs {}", p.x, p.y, p.a, m.ln_abs, p.ln_abs);
        worst = worst.max(err);
    }
    println!("overflow grid: max |Δ ln m| = {worst:.3e}");
}

#[test]
fn values_in_double_range_agree_directly() {
    for p in reference().iter().filter(|p| p.ln_abs < 700.0) {
        let m = banco_core::magnitude_closed_form(p.x, p.y, p.a).unwrap();
        let r = p.sign * p.ln_abs.exp();
        if r == 0.0 || !r.is_normal() {
            continue;
        }
        assert!(((m - r) / r).abs() <= 1e-6, "({}, {}, {}): {m} vs {r}", p.x, p.y, p.a);
    }
}
