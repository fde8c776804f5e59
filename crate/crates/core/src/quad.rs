//! Numerical integration.
//!
//! Two tools cover every integral in the crate:
//! - fixed Gauss rules (Legendre, Jacobi) built by Golub–Welsch, used for the
//!   nested simplex quadrature of the moment engine;
//! - adaptive tanh-sinh with bisection fallback, used for 1-D integrals whose
//!   integrands are singular or sharply peaked at an endpoint.
//!
//! Integrands with a singularity should be arranged so that it sits at the
//! *left* endpoint; abscissae near the left end are formed as `a + d` with `d`
//! computed directly, so a left endpoint at `0.0` keeps full relative
//! precision all the way into the singularity.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl QuadResult {
    fn zero() -> Self {
        QuadResult {
            value: 0.0,
            error: 0.0,
            converged: true,
            evaluations: 0,
        }
    }

    fn merge(self, other: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + other.value,
            error: self.error + other.error,
            converged: self.converged && other.converged,
            evaluations: self.evaluations + other.evaluations,
        }
    }

    /// Converts a non-converged result into an accuracy error.
    pub fn require(self, what: &str) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::Accuracy {
                message: format!("{what}: quadrature did not converge"),
                partial: self.value,
                estimate: self.error,
            })
        }
    }
}

/// A Gauss rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Gauss–Legendre rule with `n` nodes.
    pub fn legendre(n: usize) -> Self {
        Self::jacobi(n, 0.0, 0.0)
    }

    /// Gauss–Jacobi rule for the weight `(1-x)^a (1+x)^b` with `a, b > -1`.
    pub fn jacobi(n: usize, a: f64, b: f64) -> Self {
        assert!(n >= 1 && a > -1.0 && b > -1.0);
        let mut jm = DMatrix::<f64>::zeros(n, n);
        let ab = a + b;
        for k in 0..n {
            let kf = k as f64;
            let diag = if k == 0 {
                (b - a) / (ab + 2.0)
            } else {
                let s = 2.0 * kf + ab;
                (b * b - a * a) / (s * (s + 2.0))
            };
            jm[(k, k)] = diag;
            if k + 1 < n {
                let j = kf + 1.0;
                let s = 2.0 * j + ab;
                let beta = 4.0 * j * (j + a) * (j + b) * (j + ab) / (s * s * (s + 1.0) * (s - 1.0));
                let off = beta.sqrt();
                jm[(k, k + 1)] = off;
                jm[(k + 1, k)] = off;
            }
        }
        let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
            - ln_gamma(ab + 2.0))
        .exp();
        let eig = SymmetricEigen::new(jm);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], mu0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        GaussRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Applies the rule to `f` on `[lo, hi]` (plain Legendre scaling).
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// Adaptive tanh-sinh integrator.
#[derive(Debug, Clone, Copy)]
pub struct TanhSinh {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Deepest step-halving level per interval (step `2^-level`).
    pub max_level: u32,
    /// Interval splits allowed after the first sweep fails to converge.
    pub max_splits: u32,
}

impl Default for TanhSinh {
    fn default() -> Self {
        TanhSinh {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_level: 7,
            max_splits: 200,
        }
    }
}

// Nodes reach within ~1e-100 of the endpoints, enough for x^{-0.9}.
const T_MAX: f64 = 5.0;
const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

impl TanhSinh {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        TanhSinh {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> QuadResult {
        if !(b > a) {
            return QuadResult::zero();
        }
        self.recurse(f, a, b, self.abs_tol)
    }

    /// Integrates over `[lo, hi]`, splitting at every breakpoint inside it;
    /// unsorted or out-of-range breakpoints are tolerated.
    pub fn integrate_pieces<F: Fn(f64) -> f64>(
        &self,
        f: &F,
        lo: f64,
        hi: f64,
        breaks: &[f64],
    ) -> QuadResult {
        if !(hi > lo) {
            return QuadResult::zero();
        }
        let mut pts: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|p| p.is_finite() && *p > lo && *p < hi)
            .collect();
        pts.push(lo);
        pts.push(hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));
        let pieces = (pts.len() - 1).max(1) as f64;
        let mut total = QuadResult::zero();
        for w in pts.windows(2) {
            if w[1] > w[0] {
                let sub = TanhSinh {
                    abs_tol: 0.5 * self.abs_tol / pieces,
                    rel_tol: 0.5 * self.rel_tol,
                    ..*self
                };
                total = total.merge(sub.integrate(f, w[0], w[1]));
            }
        }
        self.judge(total)
    }

    /// Accepts a merged result when its summed error estimate meets the
    /// overall tolerance, even if a tiny piece missed its own relative target.
    fn judge(&self, mut r: QuadResult) -> QuadResult {
        r.converged = r.error <= self.abs_tol.max(self.rel_tol * r.value.abs());
        r
    }

    /// Integrates `f` over `[a, ∞)` by splitting at `a + scale` and mapping the
    /// tail through `x = a + scale / u`.
    pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
        &self,
        f: &F,
        a: f64,
        scale: f64,
        breakpoints: &[f64],
    ) -> QuadResult {
        let cut = a + scale;
        let half = TanhSinh {
            abs_tol: 0.5 * self.abs_tol,
            ..*self
        };
        let head = half.integrate_pieces(f, a, cut, breakpoints);
        let tail_fn = |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let x = a + scale / u;
            let v = f(x) * scale / (u * u);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let tail = half.integrate(&tail_fn, 0.0, 1.0);
        self.judge(head.merge(tail))
    }

    /// Globally adaptive: keeps splitting the interval with the largest error
    /// estimate until the summed estimate meets the tolerance.
    fn recurse<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64, abs_tol: f64) -> QuadResult {
        let first = self.sweep(f, a, b, abs_tol, self.rel_tol);
        if first.converged {
            return first;
        }
        let total_width = b - a;
        let mut evaluations = first.evaluations;
        let mut parts = vec![(a, b, first)];
        for _ in 0..self.max_splits {
            let value: f64 = parts.iter().map(|p| p.2.value).sum();
            let error: f64 = parts.iter().map(|p| p.2.error).sum();
            if error <= abs_tol.max(self.rel_tol * value.abs()) {
                return QuadResult {
                    value,
                    error,
                    converged: true,
                    evaluations,
                };
            }
            let worst = parts
                .iter()
                .enumerate()
                .max_by(|x, y| x.1 .2.error.total_cmp(&y.1 .2.error))
                .map(|(i, _)| i)
                .expect("nonempty");
            let (lo, hi, _) = parts.swap_remove(worst);
            let m = 0.5 * (lo + hi);
            if !(m > lo && m < hi) {
                parts.push((lo, hi, self.sweep(f, lo, hi, abs_tol, 0.0)));
                break;
            }
            // Children aim below their share of the current overall target so
            // that the summed estimate can actually clear it.
            let target = abs_tol.max(self.rel_tol * value.abs());
            let tol = 0.25 * target * (hi - lo) / total_width;
            let left = self.sweep(f, lo, m, tol, 0.0);
            let right = self.sweep(f, m, hi, tol, 0.0);
            evaluations += left.evaluations + right.evaluations;
            parts.push((lo, m, left));
            parts.push((m, hi, right));
        }
        let value: f64 = parts.iter().map(|p| p.2.value).sum();
        let error: f64 = parts.iter().map(|p| p.2.error).sum();
        QuadResult {
            value,
            error,
            converged: error <= abs_tol.max(self.rel_tol * value.abs()),
            evaluations,
        }
    }

    /// One level-doubling tanh-sinh sweep on `[a, b]`.
    fn sweep<F: Fn(f64) -> f64>(
        &self,
        f: &F,
        a: f64,
        b: f64,
        abs_tol: f64,
        rel_tol: f64,
    ) -> QuadResult {
        let width = b - a;
        let mut evals = 0usize;
        let mut eval_at = |t: f64| -> f64 {
            let u = HALF_PI * t.sinh();
            let w = HALF_PI * t.cosh() / (u.cosh() * u.cosh());
            if w == 0.0 {
                return 0.0;
            }
            let x = if t <= 0.0 {
                let d = width / (1.0 + (-2.0 * u).exp());
                if d <= 0.0 {
                    return 0.0;
                }
                a + d
            } else {
                let d = width / (1.0 + (2.0 * u).exp());
                if d <= 0.0 {
                    return 0.0;
                }
                b - d
            };
            if x <= a || x >= b {
                return 0.0;
            }
            evals += 1;
            let v = f(x) * w;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };

        let mut h = 1.0;
        let mut sum = eval_at(0.0);
        let mut k = 1;
        while (k as f64) * h <= T_MAX {
            let t = k as f64 * h;
            sum += eval_at(t) + eval_at(-t);
            k += 1;
        }
        let mut estimate = sum * h * 0.5 * width;
        let mut prev_delta = f64::INFINITY;
        for _level in 1..=self.max_level {
            h *= 0.5;
            let mut add = 0.0;
            let mut j = 1;
            while (j as f64) * h <= T_MAX {
                let t = j as f64 * h;
                add += eval_at(t) + eval_at(-t);
                j += 2;
            }
            sum += add;
            let next = sum * h * 0.5 * width;
            let delta = (next - estimate).abs();
            estimate = next;
            let tol = abs_tol.max(rel_tol * estimate.abs());
            // Quadratic convergence: the next correction is roughly delta^2/prev,
            // and that is the error carried forward.
            let predicted = if prev_delta.is_finite() && prev_delta > 0.0 {
                delta * delta / prev_delta
            } else {
                f64::INFINITY
            };
            if delta <= tol || (predicted <= 0.1 * tol && delta <= 1e3 * tol) {
                return QuadResult {
                    value: estimate,
                    error: delta.min(predicted.max(f64::EPSILON * estimate.abs())),
                    converged: true,
                    evaluations: evals,
                };
            }
            prev_delta = delta;
        }
        QuadResult {
            value: estimate,
            error: prev_delta,
            converged: false,
            evaluations: evals,
        }
    }
}
