//! Kernel error functionals and the prelimit covariance `C_n`.
//!
//! ```text
//! ⋆(n) = n⁻¹∫₀ᵀ φ_n⁴ + n⁻¹∫₀^∞ (φ_n(T+x) − φ_n(x))⁴ dx
//! ◇(n) = sup_t ∫₀ᵗ φ_∞(t−s) |C_n(s,t) − C_∞(s,t)| ds
//! □(n) = sup_t ∫₀ᵗ φ_n(t−s) |C_n(s,s) − C_∞(s,s)| ds
//! △(n) = ∫₀ᵀ |φ_n − φ_∞|
//! ```
//! The pre-zero parts (second term of ⋆, the pre-zero integral in `C_n`) are
//! included or dropped together through [`PreZero`].

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, KernelVariant};
use crate::quad::TanhSinh;
use crate::special;

/// How much of the past before time zero contributes to the volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "horizon", rename_all = "snake_case")]
pub enum PreZero {
    /// No pre-zero impact (Riemann–Liouville type).
    None,
    /// Orders on `[-S, 0)` only.
    Truncated(f64),
    /// The whole past (Mandelbrot–van Ness type).
    Full,
}

impl From<bool> for PreZero {
    fn from(pre_zero: bool) -> Self {
        if pre_zero {
            PreZero::Full
        } else {
            PreZero::None
        }
    }
}

fn cov_quad() -> TanhSinh {
    TanhSinh::with_tol(1e-11, 1e-9)
}

/// `C_n(t, s)`, with the full pre-zero integral when `pre_zero` is set.
pub fn covariance_cn(kernel: &KernelSpec, t: f64, s: f64, pre_zero: bool) -> Result<f64> {
    covariance_cn_with(kernel, t, s, pre_zero.into())
}

/// `C_n(t, s)` for an explicit pre-zero choice.
pub fn covariance_cn_with(kernel: &KernelSpec, t: f64, s: f64, pre_zero: PreZero) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) || !t.is_finite() || !s.is_finite() {
        return Err(Error::domain(format!(
            "covariance needs t, s >= 0, got ({t}, {s})"
        )));
    }
    let (hi, lo) = if t >= s { (t, s) } else { (s, t) };
    if lo == 0.0 {
        return Ok(0.0);
    }
    let q = cov_quad();
    let gap = hi - lo;
    let d = kernel.shift();
    // u = lo - r puts the (possible) singularity at u = 0.
    let main = |u: f64| kernel.value(gap + u) * kernel.value(u);
    let mut value = q
        .integrate_pieces(&main, 0.0, lo, &[d, d - gap])
        .require("C_n main integral")?;
    value += pre_zero_integral(kernel, hi, lo, pre_zero, &q)?;
    Ok(value)
}

fn pre_zero_integral(
    kernel: &KernelSpec,
    t: f64,
    s: f64,
    pre_zero: PreZero,
    q: &TanhSinh,
) -> Result<f64> {
    let f = |x: f64| kernel.increment(x, t) * kernel.increment(x, s);
    let d = kernel.shift();
    let brk: Vec<f64> = [d, d - t, d - s].into_iter().filter(|x| *x > 0.0).collect();
    match pre_zero {
        PreZero::None => Ok(0.0),
        PreZero::Truncated(horizon) => q
            .integrate_pieces(&f, 0.0, horizon, &brk)
            .require("C_n pre-zero integral"),
        PreZero::Full => q
            .integrate_to_infinity(&f, 0.0, 10.0 * t.max(1e-3), &brk)
            .require("C_n pre-zero integral"),
    }
}

/// Limit covariance `C_∞` in closed form (two-sided or Riemann–Liouville);
/// a truncated past falls back to quadrature with the limit kernel.
pub fn limit_covariance(hurst: f64, t: f64, s: f64, pre_zero: PreZero) -> Result<f64> {
    match pre_zero {
        PreZero::Full => Ok(special::two_sided_covariance(hurst, t, s)),
        PreZero::None => Ok(special::rl_covariance(hurst, t, s)),
        PreZero::Truncated(_) => covariance_cn_with(&KernelSpec::limit(hurst)?, t, s, pre_zero),
    }
}

/// The four kernel error functionals at one scale index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorFunctionals {
    pub star: f64,
    pub diamond: f64,
    pub square: f64,
    pub triangle: f64,
    pub n: u64,
    pub horizon: f64,
    pub kernel: KernelSpec,
}

impl ErrorFunctionals {
    pub fn sum(&self) -> f64 {
        self.star + self.diamond + self.square + self.triangle
    }
}

const SUP_GRID: usize = 64;

/// Evaluates `⋆, ◇, □, △` for `kernel` on `[0, T]`.
pub fn error_functionals(
    kernel: &KernelSpec,
    horizon: f64,
    pre_zero: bool,
) -> Result<ErrorFunctionals> {
    if kernel.is_limit() {
        return Err(Error::domain(
            "error functionals compare a prelimit kernel with the limit",
        ));
    }
    if !(horizon > 0.0) {
        return Err(Error::domain("horizon must be positive"));
    }
    let pz = PreZero::from(pre_zero);
    let h = kernel.hurst();
    let limit = KernelSpec::limit(h)?;
    let n = kernel.n() as f64;
    let d = kernel.shift();
    let q = TanhSinh::with_tol(1e-13, 1e-9);

    let fourth = |u: f64| kernel.value(u).powi(4);
    let mut star = q
        .integrate_pieces(&fourth, 0.0, horizon, &[d])
        .require("⋆ main")?;
    if pre_zero {
        let tail = |x: f64| kernel.increment(x, horizon).powi(4);
        star += q
            .integrate_to_infinity(&tail, 0.0, 10.0 * horizon, &[d])
            .require("⋆ pre-zero")?;
    }
    star /= n;

    let abs_gap = |u: f64| (kernel.value(u) - limit.value(u)).abs();
    let triangle = q
        .integrate_pieces(&abs_gap, 0.0, horizon, &[d])
        .require("△")?;

    // The integrand carries the covariance quadrature noise (~1e-10 relative).
    let outer = TanhSinh::with_tol(1e-12, 1e-5);
    let diamond_at = |t: f64| -> Result<f64> {
        let failed = std::cell::Cell::new(false);
        let f = |u: f64| {
            let s = t - u;
            match (
                covariance_cn_with(kernel, s, t, pz),
                limit_covariance(h, s, t, pz),
            ) {
                (Ok(a), Ok(b)) => limit.value(u) * (a - b).abs(),
                _ => {
                    failed.set(true);
                    0.0
                }
            }
        };
        let v = outer
            .integrate_pieces(&f, 0.0, t, &[d])
            .require("◇ inner integral")?;
        if failed.get() {
            return Err(Error::Accuracy {
                message: "◇: covariance quadrature failed".into(),
                partial: v,
                estimate: f64::INFINITY,
            });
        }
        Ok(v)
    };
    let square_at = |t: f64| -> Result<f64> {
        let failed = std::cell::Cell::new(false);
        let f = |u: f64| {
            let s = t - u;
            match (
                covariance_cn_with(kernel, s, s, pz),
                limit_covariance(h, s, s, pz),
            ) {
                (Ok(a), Ok(b)) => kernel.value(u) * (a - b).abs(),
                _ => {
                    failed.set(true);
                    0.0
                }
            }
        };
        let v = outer
            .integrate_pieces(&f, 0.0, t, &[d])
            .require("□ inner integral")?;
        if failed.get() {
            return Err(Error::Accuracy {
                message: "□: covariance quadrature failed".into(),
                partial: v,
                estimate: f64::INFINITY,
            });
        }
        Ok(v)
    };

    let diamond = grid_sup(horizon, &diamond_at)?;
    let square = grid_sup(horizon, &square_at)?;
    Ok(ErrorFunctionals {
        star,
        diamond,
        square,
        triangle,
        n: kernel.n(),
        horizon,
        kernel: *kernel,
    })
}

/// `sup_{t ∈ (0,T]} f(t)` on a uniform grid, refined by golden-section search
/// around the grid argmax.
fn grid_sup<F>(horizon: f64, f: &F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let step = horizon / SUP_GRID as f64;
    let values: Vec<f64> = (1..=SUP_GRID)
        .into_par_iter()
        .map(|i| f(step * i as f64))
        .collect::<Result<Vec<_>>>()?;
    let (imax, &vmax) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let t_star = step * (imax + 1) as f64;
    let mut lo = (t_star - step).max(0.0);
    let mut hi = (t_star + step).min(horizon);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut best = vmax;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..20 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        }
        best = best.max(f1).max(f2);
        if hi - lo < 1e-4 * step {
            break;
        }
    }
    Ok(best)
}

/// Log-log least-squares fit `log v = intercept + slope·log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Sum of squared residuals in log space.
    pub residual: f64,
    /// Standard error of the slope (0 for three points on a line).
    pub slope_standard_error: f64,
}

pub fn fit_rate(ns: &[f64], values: &[f64]) -> Result<RateFit> {
    if ns.len() != values.len() || ns.len() < 3 {
        return Err(Error::domain("rate fit needs at least 3 (n, value) pairs"));
    }
    if values
        .iter()
        .chain(ns)
        .any(|v| !(*v > 0.0) || !v.is_finite())
    {
        return Err(Error::domain("rate fit needs positive finite values"));
    }
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("rate fit needs at least two distinct n"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let dof = m - 2.0;
    let slope_standard_error = if dof > 0.0 {
        (residual / dof / sxx).sqrt()
    } else {
        0.0
    };
    Ok(RateFit {
        slope,
        intercept,
        residual,
        slope_standard_error,
    })
}

/// Asymptotic decay `n^{-exponent}` (times `log n` when flagged) of the
/// summed functionals for a kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateLaw {
    pub exponent: f64,
    pub log_factor: bool,
}

pub fn theoretical_rate(kernel: &KernelSpec) -> RateLaw {
    let h = kernel.hurst();
    // Exponents of (⋆, covariance/kernel terms) for a shift n^{-a}.
    let star = |a: f64| 1.0 - a * (1.0 - 4.0 * h).max(0.0);
    let (exp_star, exp_rest) = match kernel.variant() {
        KernelVariant::Benchmark => (star(1.0), 2.0 * h),
        KernelVariant::GeneralShift { alpha } => (star(alpha), 2.0 * h * alpha),
        KernelVariant::Optimized { beta } => (star(beta), beta * (h + 0.5)),
        KernelVariant::Limit => (f64::INFINITY, f64::INFINITY),
    };
    RateLaw {
        exponent: exp_star.min(exp_rest),
        log_factor: (h - 0.25).abs() < 1e-12 && exp_star <= exp_rest,
    }
}

/// `n^γ · λ{t ≤ n^{-γ} : φ_n(t) ≥ ½ φ_∞(t)}` for each `n`.
pub fn lower_bound_scan<F>(family: F, gamma: f64, n_grid: &[u64]) -> Result<Vec<(u64, f64)>>
where
    F: Fn(u64) -> Result<KernelSpec>,
{
    if !(gamma > 0.0) {
        return Err(Error::domain("gamma must be positive"));
    }
    n_grid
        .iter()
        .map(|&n| {
            let k = family(n)?;
            let limit = KernelSpec::limit(k.hurst())?;
            let width = (n as f64).powf(-gamma);
            let inside = |t: f64| t > 0.0 && k.value(t) >= 0.5 * limit.value(t);
            Ok((n, indicator_measure(&inside, width) / width))
        })
        .collect()
}

/// Lebesgue measure of `{t ∈ (0, L]: inside(t)}`, locating sign changes on a
/// geometric/uniform scan and bisecting them to `1e-12`.
fn indicator_measure<F: Fn(f64) -> bool>(inside: &F, width: f64) -> f64 {
    let mut grid: Vec<f64> = (0..256)
        .map(|i| width * 1e-12f64.powf(1.0 - i as f64 / 255.0))
        .chain((1..=256).map(|i| width * i as f64 / 256.0))
        .collect();
    grid.push(0.0);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut measure = 0.0;
    let mut prev_t = 0.0;
    let mut prev_in = inside(width * 1e-15);
    for &t in grid.iter().skip(1) {
        let now_in = inside(t);
        if now_in == prev_in {
            if now_in {
                measure += t - prev_t;
            }
        } else {
            let (mut a, mut b) = (prev_t, t);
            while b - a > 1e-12_f64.min(1e-3 * width) {
                let m = 0.5 * (a + b);
                if inside(m) == prev_in {
                    a = m;
                } else {
                    b = m;
                }
            }
            let cross = 0.5 * (a + b);
            measure += if prev_in { cross - prev_t } else { t - cross };
        }
        prev_t = t;
        prev_in = now_in;
    }
    measure
}
