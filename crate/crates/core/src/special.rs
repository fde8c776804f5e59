//! Closed forms for the limit covariances.

use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// Normalisation constant `c_H` turning the two-sided power-kernel integral
/// into a standard fractional Brownian motion.
pub fn c_h(h: f64) -> f64 {
    gamma(h + 0.5) / (gamma(2.0 * h + 1.0) * (PI * h).sin()).sqrt()
}

/// Covariance of `c_H`-scaled two-sided fBm, i.e. `c_H^2 · ½(t^{2H}+s^{2H}-|t-s|^{2H})`.
pub fn two_sided_covariance(h: f64, t: f64, s: f64) -> f64 {
    let ch = c_h(h);
    let e = 2.0 * h;
    ch * ch * 0.5 * (t.max(0.0).powf(e) + s.max(0.0).powf(e) - (t - s).abs().powf(e))
}

/// Riemann–Liouville covariance `∫_0^{s∧t} (t-r)^{H-1/2} (s-r)^{H-1/2} dr`.
pub fn rl_covariance(h: f64, t: f64, s: f64) -> f64 {
    let (hi, lo) = if t >= s { (t, s) } else { (s, t) };
    if lo <= 0.0 {
        return 0.0;
    }
    if (h - 0.5).abs() < 1e-15 {
        return lo;
    }
    let z = lo / hi;
    if z >= 1.0 {
        return hi.powf(2.0 * h) / (2.0 * h);
    }
    let f = hyp2f1_rl(h, z);
    lo.powf(h + 0.5) * hi.powf(h - 0.5) / (h + 0.5) * f
}

/// `2F1(1/2-H, 1; H+3/2; z)` for `z ∈ [0, 1)`, `0 < H < 1/2`.
fn hyp2f1_rl(h: f64, z: f64) -> f64 {
    let a = 0.5 - h;
    let b = 1.0;
    let c = h + 1.5;
    if z <= 0.5 {
        return series(a, b, c, z);
    }
    // Connection to 1 - z; c - a - b = 2H is not an integer on (0, 1/2).
    let w = 1.0 - z;
    let cab = c - a - b;
    let t1 = gamma(c) * gamma(cab) / (gamma(c - a) * gamma(c - b)) * series(a, b, 1.0 - cab, w);
    let t2 = gamma(c) * gamma(-cab) / (gamma(a) * gamma(b))
        * w.powf(cab)
        * series(c - a, c - b, 1.0 + cab, w);
    t1 + t2
}

fn series(a: f64, b: f64, c: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..2000 {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}
