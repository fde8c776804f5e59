//! Jump mark laws for the price (`u`) and log-volatility (`v`) components.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

/// One price/volatility jump pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mark {
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarkFamily {
    /// Centered bivariate normal.
    Gaussian2D,
    /// Signs of a latent bivariate normal with correlation `gaussian_rho`,
    /// scaled by `σ_p` and `σ_v`.
    ScaledSign { gaussian_rho: f64 },
}

/// Bivariate mark law with declared second moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkLaw {
    sigma_p: f64,
    sigma_v: f64,
    rho: f64,
    family: MarkFamily,
}

impl MarkLaw {
    pub fn gaussian(sigma_p: f64, sigma_v: f64, rho: f64) -> Result<Self> {
        check_scales(sigma_p, sigma_v)?;
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::domain(format!("rho must lie in [-1, 1], got {rho}")));
        }
        Ok(MarkLaw {
            sigma_p,
            sigma_v,
            rho,
            family: MarkFamily::Gaussian2D,
        })
    }

    /// Sign marks; the effective correlation is `(2/π)·asin(gaussian_rho)`.
    pub fn scaled_sign(sigma_p: f64, sigma_v: f64, gaussian_rho: f64) -> Result<Self> {
        check_scales(sigma_p, sigma_v)?;
        if !(-1.0..=1.0).contains(&gaussian_rho) {
            return Err(Error::domain(format!(
                "latent correlation must lie in [-1, 1], got {gaussian_rho}"
            )));
        }
        Ok(MarkLaw {
            sigma_p,
            sigma_v,
            rho: std::f64::consts::FRAC_2_PI * gaussian_rho.asin(),
            family: MarkFamily::ScaledSign { gaussian_rho },
        })
    }

    pub fn sigma_p(&self) -> f64 {
        self.sigma_p
    }

    pub fn sigma_v(&self) -> f64 {
        self.sigma_v
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn family(&self) -> MarkFamily {
        self.family
    }

    pub fn is_gaussian(&self) -> bool {
        self.family == MarkFamily::Gaussian2D
    }

    /// Same law with another volatility scale.
    pub fn with_sigma_v(&self, sigma_v: f64) -> Result<Self> {
        match self.family {
            MarkFamily::Gaussian2D => Self::gaussian(self.sigma_p, sigma_v, self.rho),
            MarkFamily::ScaledSign { gaussian_rho } => {
                Self::scaled_sign(self.sigma_p, sigma_v, gaussian_rho)
            }
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Mark {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        match self.family {
            MarkFamily::Gaussian2D => Mark {
                u: self.sigma_p * z1,
                v: self.sigma_v * (self.rho * z1 + (1.0 - self.rho * self.rho).sqrt() * z2),
            },
            MarkFamily::ScaledSign { gaussian_rho: g } => {
                let w = g * z1 + (1.0 - g * g).sqrt() * z2;
                Mark {
                    u: self.sigma_p * sign(z1),
                    v: self.sigma_v * sign(w),
                }
            }
        }
    }

    pub fn sample_marks<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<Mark> {
        (0..count).map(|_| self.sample(rng)).collect()
    }
}

fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn check_scales(sigma_p: f64, sigma_v: f64) -> Result<()> {
    if !(sigma_p > 0.0 && sigma_p.is_finite()) {
        return Err(Error::domain(format!(
            "sigma_p must be positive, got {sigma_p}"
        )));
    }
    if !(sigma_v >= 0.0 && sigma_v.is_finite()) {
        return Err(Error::domain(format!(
            "sigma_v must be nonnegative, got {sigma_v}"
        )));
    }
    Ok(())
}

/// One moment check against its declared value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheck {
    pub item: String,
    pub statistic: f64,
    pub expected: f64,
    pub standard_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheckReport {
    pub checks: Vec<MomentCheck>,
}

impl MomentCheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Compares empirical moments of `count` draws with the declared ones; a check
/// passes when the deviation is at most `z` standard errors.
pub fn verify_mark_moments<R: Rng + ?Sized>(
    law: &MarkLaw,
    rng: &mut R,
    count: usize,
    z: f64,
) -> Result<MomentCheckReport> {
    if count < 10_000 {
        return Err(Error::domain(
            "moment verification needs at least 10^4 draws",
        ));
    }
    let marks = law.sample_marks(rng, count);
    let (sp, sv) = (law.sigma_p, law.sigma_v);
    // Sub-Gaussian probe: E[exp(a(u^2+v^2))] with a below the critical value.
    let a = 0.25 / (sp * sp).max(sv * sv).max(1e-300);
    let probe_expected = match law.family {
        MarkFamily::Gaussian2D => {
            let c = law.rho * sp * sv;
            let det = (1.0 - 2.0 * a * sp * sp) * (1.0 - 2.0 * a * sv * sv) - 4.0 * a * a * c * c;
            det.powf(-0.5)
        }
        MarkFamily::ScaledSign { .. } => (a * (sp * sp + sv * sv)).exp(),
    };
    type Stat = (&'static str, fn(&Mark, f64) -> f64, f64);
    let stats: [Stat; 10] = [
        ("(i) E[u]", |m, _| m.u, 0.0),
        ("(i) E[v]", |m, _| m.v, 0.0),
        ("(ii) E[u^2]", |m, _| m.u * m.u, sp * sp),
        ("(ii) E[v^2]", |m, _| m.v * m.v, sv * sv),
        ("(iii) E[u^3]", |m, _| m.u.powi(3), 0.0),
        ("(iii) E[v^3]", |m, _| m.v.powi(3), 0.0),
        (
            "(iv) sub-Gaussian probe",
            |m, a| (a * (m.u * m.u + m.v * m.v)).exp(),
            probe_expected,
        ),
        ("(v) E[u v^2]", |m, _| m.u * m.v * m.v, 0.0),
        ("(v) E[u^2 v]", |m, _| m.u * m.u * m.v, 0.0),
        ("(vi) E[u v]", |m, _| m.u * m.v, law.rho * sp * sv),
    ];
    let checks = stats
        .iter()
        .map(|(item, f, expected)| {
            let xs: Vec<f64> = marks.iter().map(|m| f(m, a)).collect();
            let est = crate::stats::mean_estimate(&xs);
            MomentCheck {
                item: (*item).to_string(),
                statistic: est.mean,
                expected: *expected,
                standard_error: est.standard_error,
                // Degenerate statistics (SE = 0) still carry summation rounding.
                passed: (est.mean - expected).abs()
                    <= z * est.standard_error + 1e-12 * (1.0 + expected.abs()),
            }
        })
        .collect();
    Ok(MomentCheckReport { checks })
}
