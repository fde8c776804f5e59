//! Volterra kernel families `φ_n` and the limit kernel `φ_∞(t) = t^{H-1/2}`.
//!
//! Every kernel accepts a signed argument and returns `0` for `t < 0`, so
//! convolution sums never need to branch on causality.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{GaussRule, TanhSinh};

/// Member of a kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelVariant {
    /// `(1/n + t)^{H-1/2}`.
    Benchmark,
    /// Shifted kernel with a compensating boost below `t = n^{-β}`.
    Optimized { beta: f64 },
    /// `(n^{-α} + t)^{H-1/2}`.
    GeneralShift { alpha: f64 },
    /// `t^{H-1/2}`; `n` is ignored.
    Limit,
}

/// A fully specified kernel `φ_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSpec {
    hurst: f64,
    variant: KernelVariant,
    n: u64,
    #[serde(skip)]
    shift: f64,
    #[serde(skip)]
    c1: f64,
    #[serde(skip)]
    kink_level: f64,
}

/// Value of `φ_n'` together with whether it is a one-sided limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDerivative {
    pub value: f64,
    /// Set when `t` sits on the Optimized kink; `value` is the right-hand limit.
    pub right_limit_at_kink: bool,
}

/// `(2^{2H} - 1 - 2^{2H} H)^{-1}`, the boost constant of the Optimized kernel.
pub fn c1_constant(h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 1.0) || !h.is_finite() {
        return Err(Error::domain(format!("c1 requires H in (0, 1], got {h}")));
    }
    let p = 2f64.powf(2.0 * h);
    let denom = p - 1.0 - p * h;
    if denom <= 1e-14 {
        return Err(Error::domain(format!(
            "c1 denominator {denom:e} is not positive at H = {h}"
        )));
    }
    Ok(1.0 / denom)
}

/// Rate-optimal shift exponent `β = 2/(3-6H)`.
pub fn optimal_beta(h: f64) -> f64 {
    2.0 / (3.0 - 6.0 * h)
}

impl KernelSpec {
    pub fn new(hurst: f64, variant: KernelVariant, n: u64) -> Result<Self> {
        if !(hurst > 0.0 && hurst <= 0.5) {
            return Err(Error::domain(format!(
                "H must lie in (0, 1/2], got {hurst}"
            )));
        }
        if n == 0 && variant != KernelVariant::Limit {
            return Err(Error::domain("n must be a positive integer"));
        }
        let nf = n as f64;
        let (shift, c1) = match variant {
            KernelVariant::Benchmark => (1.0 / nf, 0.0),
            KernelVariant::GeneralShift { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::domain(format!(
                        "alpha must be positive, got {alpha}"
                    )));
                }
                (nf.powf(-alpha), 0.0)
            }
            KernelVariant::Optimized { beta } => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return Err(Error::domain(format!("beta must be positive, got {beta}")));
                }
                if hurst >= 0.5 {
                    return Err(Error::domain(
                        "the Optimized kernel is undefined at H = 1/2",
                    ));
                }
                (nf.powf(-beta), c1_constant(hurst)?)
            }
            KernelVariant::Limit => (0.0, 0.0),
        };
        let kink_level = (2.0 * shift).powf(2.0 * hurst - 1.0);
        Ok(KernelSpec {
            hurst,
            variant,
            n: if variant == KernelVariant::Limit {
                0
            } else {
                n
            },
            shift,
            c1,
            kink_level,
        })
    }

    pub fn benchmark(hurst: f64, n: u64) -> Result<Self> {
        Self::new(hurst, KernelVariant::Benchmark, n)
    }

    /// Optimized kernel with the rate-optimal `β = 2/(3-6H)`.
    pub fn optimized(hurst: f64, n: u64) -> Result<Self> {
        Self::new(
            hurst,
            KernelVariant::Optimized {
                beta: optimal_beta(hurst),
            },
            n,
        )
    }

    pub fn shifted(hurst: f64, alpha: f64, n: u64) -> Result<Self> {
        Self::new(hurst, KernelVariant::GeneralShift { alpha }, n)
    }

    pub fn limit(hurst: f64) -> Result<Self> {
        Self::new(hurst, KernelVariant::Limit, 0)
    }

    /// Same family and parameters at another scale index.
    pub fn with_n(&self, n: u64) -> Result<Self> {
        Self::new(self.hurst, self.variant, n)
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn variant(&self) -> KernelVariant {
        self.variant
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn is_limit(&self) -> bool {
        self.variant == KernelVariant::Limit
    }

    /// Regularisation scale: `1/n`, `n^{-α}`, `n^{-β}`, or `0` for Limit.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Points where `φ_n` is not smooth (the Optimized kink).
    pub fn kinks(&self) -> Vec<f64> {
        match self.variant {
            KernelVariant::Optimized { .. } => vec![self.shift],
            _ => Vec::new(),
        }
    }

    /// Checked evaluation.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::domain(format!(
                "kernel argument must be finite, got {t}"
            )));
        }
        if self.is_limit() && t == 0.0 {
            return Err(Error::domain("the limit kernel has a pole at t = 0"));
        }
        Ok(self.value(t))
    }

    /// Unchecked evaluation for hot loops; the Limit kernel returns `+inf` at 0.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let lam = self.hurst - 0.5;
        let x = t + self.shift;
        match self.variant {
            KernelVariant::Optimized { .. } if t < self.shift => {
                let sq = x.powf(2.0 * lam);
                ((1.0 + self.c1) * sq - self.c1 * self.kink_level).sqrt()
            }
            _ => {
                if lam == 0.0 {
                    1.0
                } else {
                    x.powf(lam)
                }
            }
        }
    }

    /// `φ_n(x + t) - φ_n(x)` for `x, t ≥ 0`, free of cancellation when `x ≫ t`.
    #[inline]
    pub fn increment(&self, x: f64, t: f64) -> f64 {
        let y = x + self.shift;
        let power_law = !matches!(self.variant, KernelVariant::Optimized { .. }) || x >= self.shift;
        if power_law && y > 0.0 && x >= 0.0 && t >= 0.0 {
            let lam = self.hurst - 0.5;
            y.powf(lam) * (lam * (t / y).ln_1p()).exp_m1()
        } else {
            self.value(x + t) - self.value(x)
        }
    }

    /// `φ_n'(t)` for `t > 0`.
    pub fn derivative(&self, t: f64) -> Result<KernelDerivative> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(format!(
                "kernel derivative needs finite t > 0, got {t}"
            )));
        }
        let lam = self.hurst - 0.5;
        let x = t + self.shift;
        let mut at_kink = false;
        let value = match self.variant {
            KernelVariant::Optimized { .. } if t < self.shift => {
                (2.0 * lam) * (1.0 + self.c1) * x.powf(2.0 * lam - 1.0) / (2.0 * self.value(t))
            }
            KernelVariant::Optimized { .. } => {
                at_kink = t == self.shift;
                lam * x.powf(lam - 1.0)
            }
            _ => lam * x.powf(lam - 1.0),
        };
        Ok(KernelDerivative {
            value,
            right_limit_at_kink: at_kink,
        })
    }

    #[inline]
    fn derivative_value(&self, t: f64) -> f64 {
        self.derivative(t).map(|d| d.value).unwrap_or(0.0)
    }
}

/// One entry of a sequence indexed by the scale parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleValue {
    pub n: u64,
    pub value: f64,
}

/// Numerical audit of the kernel assumptions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    /// Smallest `C` with `0 ≤ φ_n(t) ≤ C (1/n+t)^{H-1/2}` on the grid.
    pub majorant_constant: f64,
    /// Smallest `C` with `0 ≤ -φ_n'(t) ≤ C (1/n+t)^{H-3/2}` on the grid.
    pub derivative_constant: f64,
    /// `sup_{h ≤ n^{-θ}} ∫_0^T |φ'(h+s) - φ'(s)| ds` along `n, 2n, 4n, ...`.
    pub continuity: Vec<ScaleValue>,
    /// `∫_0^T |φ_n - φ_∞|^2` along `n, 2n, 4n, ...`.
    pub l2_distance: Vec<ScaleValue>,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const AUDIT_SEQUENCE: u32 = 5;

/// Checks positivity/majorant, derivative bounds, uniform continuity of the
/// derivative and `L^2` convergence on a grid of `grid_size` points.
pub fn audit_kernel_assumptions(
    spec: &KernelSpec,
    horizon: f64,
    theta: f64,
    grid_size: usize,
) -> Result<AuditReport> {
    if spec.is_limit() {
        return Err(Error::domain("the audit applies to prelimit kernels only"));
    }
    if !(horizon > 0.0) || !(theta > 2.0) || grid_size < 64 {
        return Err(Error::domain(
            "audit needs T > 0, theta > 2 and at least 64 grid points",
        ));
    }
    let mut violations = Vec::new();
    let nf = spec.n() as f64;
    let lam = spec.hurst() - 0.5;
    let grid = audit_grid(horizon, grid_size);

    let mut majorant: f64 = 0.0;
    let mut deriv_const: f64 = 0.0;
    let mut prev = f64::INFINITY;
    for &t in &grid {
        let v = spec.eval(t)?;
        if !(v >= 0.0) || !v.is_finite() {
            violations.push(format!("(i) negative or non-finite value {v} at t = {t}"));
        }
        if v > prev * (1.0 + 1e-14) {
            violations.push(format!("(i) kernel increases at t = {t}"));
        }
        prev = v;
        majorant = majorant.max(v / (1.0 / nf + t).powf(lam));
        if t > 0.0 {
            let d = spec.derivative(t)?.value;
            if d > 0.0 || !d.is_finite() {
                violations.push(format!("(ii) derivative {d} is not nonpositive at t = {t}"));
            }
            deriv_const = deriv_const.max(-d / (1.0 / nf + t).powf(lam - 1.0));
        }
    }

    let mut continuity = Vec::new();
    let mut l2 = Vec::new();
    for k in 0..AUDIT_SEQUENCE {
        let n = spec.n() * (1u64 << k);
        let kn = spec.with_n(n)?;
        continuity.push(ScaleValue {
            n,
            value: derivative_continuity(&kn, horizon, theta),
        });
        l2.push(ScaleValue {
            n,
            value: l2_distance(&kn, horizon)?,
        });
    }
    if !decreasing(&continuity) {
        violations.push("(iii) derivative-continuity sequence is not decreasing in n".into());
    }
    if !decreasing(&l2) {
        violations.push("(iv) L2 distance to the limit kernel is not decreasing in n".into());
    }

    Ok(AuditReport {
        majorant_constant: majorant,
        derivative_constant: deriv_const,
        continuity,
        l2_distance: l2,
        violations,
    })
}

fn decreasing(seq: &[ScaleValue]) -> bool {
    seq.windows(2).all(|w| w[1].value < w[0].value)
}

fn audit_grid(horizon: f64, size: usize) -> Vec<f64> {
    let half = size / 2;
    let mut g: Vec<f64> = (0..half)
        .map(|i| horizon * 1e-9f64.powf(1.0 - i as f64 / (half - 1) as f64))
        .collect();
    g.extend((0..size - half).map(|i| horizon * i as f64 / (size - half - 1) as f64));
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// `sup_h ∫_0^T |φ'(h+s) - φ'(s)| ds` over `h ∈ n^{-θ}·{1, 1/2, 1/4, 1/8}`.
fn derivative_continuity(spec: &KernelSpec, horizon: f64, theta: f64) -> f64 {
    let rule = GaussRule::legendre(20);
    let h_max = (spec.n() as f64).powf(-theta);
    (0..4)
        .map(|j| {
            let h = h_max / f64::from(1u32 << j);
            let f = |s: f64| {
                (spec.derivative_value(h + s) - spec.derivative_value(s.max(1e-300))).abs()
            };
            let mut pts = geometric_breaks(horizon, spec.shift().min(h).max(1e-16));
            for k in spec.kinks() {
                pts.push(k);
                pts.push(k - h);
            }
            pts.retain(|p| *p > 0.0 && *p < horizon);
            pts.push(0.0);
            pts.push(horizon);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            pts.windows(2)
                .map(|w| adaptive_gauss(&rule, &f, w[0], w[1], 1e-15, 0))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn geometric_breaks(horizon: f64, smallest: f64) -> Vec<f64> {
    let mut pts = Vec::new();
    let mut x = horizon;
    while x > smallest {
        pts.push(x);
        x *= 0.5;
    }
    pts.push(x);
    pts
}

fn adaptive_gauss<F: Fn(f64) -> f64>(
    rule: &GaussRule,
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let whole = rule.integrate(a, b, f);
    let m = 0.5 * (a + b);
    let split = rule.integrate(a, m, f) + rule.integrate(m, b, f);
    if (whole - split).abs() <= tol.max(1e-12 * split.abs()) || depth >= 30 {
        split
    } else {
        adaptive_gauss(rule, f, a, m, 0.5 * tol, depth + 1)
            + adaptive_gauss(rule, f, m, b, 0.5 * tol, depth + 1)
    }
}

fn l2_distance(spec: &KernelSpec, horizon: f64) -> Result<f64> {
    let limit = KernelSpec::limit(spec.hurst())?;
    let f = |u: f64| (spec.value(u) - limit.value(u)).powi(2);
    let mut pts = vec![spec.shift()];
    pts.extend(spec.kinks());
    TanhSinh::with_tol(1e-14, 1e-10)
        .integrate_pieces(&f, 0.0, horizon, &pts)
        .require("L2 kernel distance")
}
