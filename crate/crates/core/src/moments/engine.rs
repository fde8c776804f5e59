use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::expand::{expand_word, MomentTerm};
use super::words::enumerate_words;
use crate::error::{Error, Result};
use crate::functionals::{covariance_cn_with, limit_covariance, PreZero};
use crate::kernels::KernelSpec;
use crate::marks::MarkLaw;
use crate::microsim::prelimit_log_exp_functional;
use crate::quad::GaussRule;
use crate::refsim::GaussianVariant;

/// Largest moment order the quadrature is built for.
pub const MAX_MOMENT: usize = 6;

/// Which process the moment refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentModel {
    /// Rough Bergomi limit with the closed-form covariance.
    Limit {
        hurst: f64,
        variant: GaussianVariant,
    },
    /// Gaussian model with kernel `φ_n` and covariance `σ_v² C_n`.
    ApproxGaussian {
        kernel: KernelSpec,
        variant: GaussianVariant,
    },
    /// Poisson prelimit; exponential moments from the exact Poisson formula.
    Prelimit {
        kernel: KernelSpec,
        law: MarkLaw,
        pre_zero: PreZero,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentParams {
    pub sigma_p: f64,
    pub sigma_v: f64,
    pub rho: f64,
    pub horizon: f64,
}

impl MomentParams {
    pub fn from_law(law: &MarkLaw, horizon: f64) -> Self {
        MomentParams {
            sigma_p: law.sigma_p(),
            sigma_v: law.sigma_v(),
            rho: law.rho(),
            horizon,
        }
    }
}

/// Node counts for the nested Gauss rules and the acceptance threshold for
/// the difference between the two rule sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureOptions {
    pub nodes: usize,
    pub check_nodes: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            nodes: 32,
            check_nodes: 48,
            abs_tol: 1e-5,
            rel_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: f64,
    /// `|Q(check_nodes) - Q(nodes)|`.
    pub quadrature_error: f64,
    pub term_count: usize,
}

pub fn hermite4(x: f64) -> f64 {
    let x2 = x * x;
    x2 * x2 - 6.0 * x2 + 3.0
}

/// `E[H_4(P)]` from the raw moments `E[P^4]` and `E[P^2]`.
pub fn hermite4_from_moments(m4: f64, m2: f64) -> f64 {
    m4 - 6.0 * m2 + 3.0
}

/// `E[exp(aᵀX)] = exp(½ aᵀ Σ a)` for `X ~ N(0, Σ)`.
pub fn gaussian_exp_moment(cov: &DMatrix<f64>, a: &[f64]) -> Result<f64> {
    if cov.nrows() != a.len() || cov.ncols() != a.len() {
        return Err(Error::Contract(format!(
            "covariance is {}x{} but the exponent vector has {} entries",
            cov.nrows(),
            cov.ncols(),
            a.len()
        )));
    }
    let mut q = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            q += a[i] * cov[(i, j)] * a[j];
        }
    }
    Ok((0.5 * q).exp())
}

/// `E[P_T^N]` for the chosen model.
pub fn moment_value(
    n: usize,
    model: &MomentModel,
    params: &MomentParams,
    opts: &QuadratureOptions,
) -> Result<MomentEstimate> {
    if n > MAX_MOMENT {
        return Err(Error::SizeLimit(format!(
            "moments above N = {MAX_MOMENT} are not supported"
        )));
    }
    if !(params.horizon > 0.0) || !(params.sigma_p > 0.0) || !(params.sigma_v >= 0.0) {
        return Err(Error::domain(
            "moment parameters need T > 0, sigma_p > 0, sigma_v >= 0",
        ));
    }
    if opts.nodes < 2 || opts.check_nodes <= opts.nodes {
        return Err(Error::domain("check_nodes must exceed nodes (>= 2)"));
    }
    let ctx = Context::new(model, params)?;
    if n == 0 {
        return Ok(MomentEstimate {
            value: 1.0,
            quadrature_error: 0.0,
            term_count: 0,
        });
    }
    let mut terms: Vec<MomentTerm> = Vec::new();
    for w in enumerate_words(n)? {
        terms.extend(
            expand_word(&w, n, (params.sigma_p, params.sigma_v, params.rho))?
                .into_iter()
                .filter(|t| t.coefficient != 0.0),
        );
    }
    let coarse = ctx.sum_terms(&terms, opts.nodes)?;
    let fine = ctx.sum_terms(&terms, opts.check_nodes)?;
    let err = (fine - coarse).abs();
    if err > opts.abs_tol.max(opts.rel_tol * fine.abs()) {
        return Err(Error::Accuracy {
            message: format!("moment N = {n}: nested quadrature did not settle"),
            partial: fine,
            estimate: err,
        });
    }
    Ok(MomentEstimate {
        value: fine,
        quadrature_error: err,
        term_count: terms.len(),
    })
}

struct Context<'a> {
    model: &'a MomentModel,
    kernel: KernelSpec,
    sigma_v2: f64,
    horizon: f64,
    lambda: f64,
}

impl<'a> Context<'a> {
    fn new(model: &'a MomentModel, params: &MomentParams) -> Result<Self> {
        let kernel = match model {
            MomentModel::Limit { hurst, .. } => KernelSpec::limit(*hurst)?,
            MomentModel::ApproxGaussian { kernel, .. } => *kernel,
            MomentModel::Prelimit { kernel, law, .. } => {
                let same = (law.sigma_p() - params.sigma_p).abs() <= 1e-15 * params.sigma_p
                    && (law.sigma_v() - params.sigma_v).abs() <= 1e-15 * params.sigma_v.max(1e-300)
                    && (law.rho() - params.rho).abs() <= 1e-15;
                if !same {
                    return Err(Error::Contract(
                        "mark law and moment parameters disagree".into(),
                    ));
                }
                *kernel
            }
        };
        if !matches!(model, MomentModel::Limit { .. }) && kernel.is_limit() {
            return Err(Error::domain(
                "approximate and prelimit models need a prelimit kernel",
            ));
        }
        Ok(Context {
            model,
            kernel,
            sigma_v2: params.sigma_v * params.sigma_v,
            horizon: params.horizon,
            lambda: kernel.hurst() - 0.5,
        })
    }

    fn covariance(&self, t: f64, s: f64) -> Result<f64> {
        match self.model {
            MomentModel::Limit { hurst, variant } => {
                limit_covariance(*hurst, t, s, variant.pre_zero())
            }
            MomentModel::ApproxGaussian { kernel, variant } => {
                covariance_cn_with(kernel, t, s, variant.pre_zero())
            }
            MomentModel::Prelimit { .. } => Ok(0.0),
        }
    }

    fn psi(&self, times: &[f64], exps: &[u8], cov: &[Vec<f64>]) -> Result<f64> {
        match self.model {
            MomentModel::Prelimit {
                kernel,
                law,
                pre_zero,
            } => {
                let a: Vec<f64> = exps.iter().map(|e| f64::from(*e)).collect();
                // Times are already descending.
                Ok(prelimit_log_exp_functional(kernel, &a, times, law, *pre_zero)?.exp())
            }
            _ => {
                let mut q = 0.0;
                for i in 0..times.len() {
                    let ai = f64::from(exps[i]);
                    q += ai * ai * cov[i][i];
                    for j in 0..i {
                        q += 2.0 * ai * f64::from(exps[j]) * cov[i][j];
                    }
                }
                Ok((0.5 * self.sigma_v2 * q).exp())
            }
        }
    }

    fn sum_terms(&self, terms: &[MomentTerm], nodes: usize) -> Result<f64> {
        let legendre = GaussRule::legendre(nodes);
        let jacobi = GaussRule::jacobi(nodes, self.lambda, 0.0);
        let mut total = 0.0;
        for t in terms {
            let nest = Nest {
                ctx: self,
                term: t,
                legendre: &legendre,
                jacobi: &jacobi,
            };
            total += t.coefficient * nest.integrate()?;
        }
        Ok(total)
    }
}

struct Nest<'a, 'b> {
    ctx: &'a Context<'b>,
    term: &'a MomentTerm,
    legendre: &'a GaussRule,
    jacobi: &'a GaussRule,
}

impl Nest<'_, '_> {
    fn integrate(&self) -> Result<f64> {
        let m = self.term.exponents.len();
        let (rule, scale) = self.rule_for(0, self.ctx.horizon);
        let parts: Vec<f64> = rule
            .nodes
            .par_iter()
            .zip(&rule.weights)
            .map(|(xi, w)| {
                let mut times = Vec::with_capacity(m);
                let mut cov = Vec::with_capacity(m);
                self.visit(0, self.ctx.horizon, *xi, *w * scale, &mut times, &mut cov)
            })
            .collect::<Result<_>>()?;
        Ok(parts.iter().sum())
    }

    /// Rule and scale factor for variable `i` (0-based) on `(0, upper)`.
    fn rule_for(&self, i: usize, upper: f64) -> (&GaussRule, f64) {
        // α pointing at the immediately preceding variable puts the kernel
        // singularity on the upper endpoint; absorb it in a Jacobi weight.
        if self.term.alpha[i] == Some(i) && i > 0 {
            (self.jacobi, (0.5 * upper).powf(self.ctx.lambda + 1.0))
        } else {
            (self.legendre, 0.5 * upper)
        }
    }

    fn visit(
        &self,
        i: usize,
        upper: f64,
        xi: f64,
        weight: f64,
        times: &mut Vec<f64>,
        cov: &mut Vec<Vec<f64>>,
    ) -> Result<f64> {
        let x = 0.5 * upper * (1.0 + xi);
        let mut factor = weight;
        if let Some(a) = self.term.alpha[i] {
            let target = times[a - 1];
            let phi = self.ctx.kernel.value(target - x);
            factor *= if self.term.alpha[i] == Some(i) {
                phi / (upper - x).powf(self.ctx.lambda)
            } else {
                phi
            };
        }
        if factor == 0.0 {
            return Ok(0.0);
        }
        times.push(x);
        let mut row = Vec::with_capacity(i + 1);
        for &tj in times.iter() {
            row.push(self.ctx.covariance(x, tj)?);
        }
        cov.push(row);
        let m = self.term.exponents.len();
        let result = if i + 1 == m {
            self.ctx
                .psi(times, &self.term.exponents, cov)
                .map(|p| p * factor)
        } else {
            let (rule, scale) = self.rule_for(i + 1, x);
            let mut acc = 0.0;
            for (xi2, w2) in rule.nodes.iter().zip(&rule.weights) {
                acc += self.visit(i + 1, x, *xi2, w2 * scale, times, cov)?;
            }
            Ok(acc * factor)
        };
        times.pop();
        cov.pop();
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::TanhSinh;
    use crate::special;
    use approx::assert_relative_eq;

    fn params(sp: f64, sv: f64, rho: f64) -> MomentParams {
        MomentParams {
            sigma_p: sp,
            sigma_v: sv,
            rho,
            horizon: 1.0,
        }
    }

    fn limit(h: f64) -> MomentModel {
        MomentModel::Limit {
            hurst: h,
            variant: GaussianVariant::TwoSided,
        }
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite4(0.0), 3.0);
        assert_eq!(hermite4(1.0), -2.0);
        // Gauss–Hermite oracle via Legendre on a wide interval.
        let rule = GaussRule::legendre(200);
        let e = rule.integrate(-12.0, 12.0, |x| {
            hermite4(x) * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
        });
        assert!(e.abs() < 1e-12);
    }

    #[test]
    fn mgf_identities() {
        assert_eq!(
            gaussian_exp_moment(&DMatrix::identity(2, 2), &[0.0, 0.0]).unwrap(),
            1.0
        );
        assert_relative_eq!(
            gaussian_exp_moment(&DMatrix::identity(2, 2), &[1.0, 1.0]).unwrap(),
            std::f64::consts::E,
            max_relative = 1e-15
        );
        let (h, s, sv) = (0.15, 0.6f64, 0.3);
        let v = sv * sv * special::c_h(h).powi(2) * s.powf(2.0 * h);
        let got = gaussian_exp_moment(&DMatrix::from_element(1, 1, v), &[2.0]).unwrap();
        assert_relative_eq!(got, (2.0 * v).exp(), max_relative = 1e-14);
        assert!(gaussian_exp_moment(&DMatrix::identity(2, 2), &[1.0]).is_err());
    }

    #[test]
    fn trivial_orders() {
        let o = QuadratureOptions::default();
        assert_eq!(
            moment_value(1, &limit(0.2), &params(1.0, 0.3, -0.5), &o)
                .unwrap()
                .value,
            0.0
        );
        assert_eq!(
            moment_value(0, &limit(0.2), &params(1.0, 0.3, -0.5), &o)
                .unwrap()
                .value,
            1.0
        );
        let flat = moment_value(2, &limit(0.2), &params(1.3, 0.0, -0.5), &o).unwrap();
        assert_relative_eq!(flat.value, 1.69, max_relative = 1e-13);
        assert!(matches!(
            moment_value(7, &limit(0.2), &params(1.0, 0.3, 0.0), &o),
            Err(Error::SizeLimit(_))
        ));
    }

    #[test]
    fn second_moment_matches_one_dimensional_oracle() {
        let (h, sv) = (0.15, 0.05);
        let ch2 = special::c_h(h).powi(2);
        let f = |s: f64| (2.0 * sv * sv * ch2 * s.powf(2.0 * h)).exp();
        let oracle = TanhSinh::default().integrate(&f, 0.0, 1.0).value;
        let got = moment_value(
            2,
            &limit(h),
            &params(1.0, sv, -1.0),
            &QuadratureOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(got.value, oracle, max_relative = 1e-7);
    }

    #[test]
    fn gaussian_fourth_moment_without_vol() {
        // σ_v = 0: P = σ_p W_T, E[P^4] = 3σ_p^4 T^2, H4 expectation 0.
        let p = params(1.0, 0.0, -0.7);
        let o = QuadratureOptions::default();
        let m4 = moment_value(4, &limit(0.3), &p, &o).unwrap().value;
        let m2 = moment_value(2, &limit(0.3), &p, &o).unwrap().value;
        assert_relative_eq!(m4, 3.0, max_relative = 1e-12);
        assert!(hermite4_from_moments(m4, m2).abs() < 1e-12);
    }

    #[test]
    fn odd_moments_vanish_without_correlation() {
        let o = QuadratureOptions {
            nodes: 8,
            check_nodes: 10,
            abs_tol: 1e-3,
            rel_tol: 1e-2,
        };
        for n in [3, 5] {
            let v = moment_value(n, &limit(0.25), &params(1.0, 0.4, 0.0), &o).unwrap();
            assert_eq!(v.value, 0.0);
            assert_eq!(v.term_count, 0);
        }
    }

    #[test]
    fn third_moment_leverage_oracle() {
        // For ρ = -1, E[P^3] = 6ρσ_p^3σ_v ∫∫_{t2<t1} E[e^{2V1+V2}] φ(t1-t2); with
        // σ_v → 0 it tends to 6ρσ_p^3σ_v ∫_0^1 ∫_0^{t1} (t1-t2)^{H-1/2}.
        let h = 0.3;
        let sv = 1e-6;
        let got = moment_value(
            3,
            &limit(h),
            &params(1.0, sv, -1.0),
            &QuadratureOptions::default(),
        )
        .unwrap();
        let lim = -6.0 * sv / ((h + 0.5) * (h + 1.5));
        assert_relative_eq!(got.value, lim, max_relative = 1e-5);
    }

    #[test]
    fn approx_gaussian_tends_to_limit() {
        let p = params(1.0, 0.3, -0.8);
        let o = QuadratureOptions {
            nodes: 12,
            check_nodes: 16,
            abs_tol: 1e-3,
            rel_tol: 1e-2,
        };
        let lim = moment_value(
            3,
            &MomentModel::Limit {
                hurst: 0.3,
                variant: GaussianVariant::RiemannLiouville,
            },
            &p,
            &o,
        )
        .unwrap()
        .value;
        let mut prev = f64::INFINITY;
        for n in [8u64, 64, 512] {
            let model = MomentModel::ApproxGaussian {
                kernel: KernelSpec::optimized(0.3, n).unwrap(),
                variant: GaussianVariant::RiemannLiouville,
            };
            let v = moment_value(3, &model, &p, &o).unwrap().value;
            let gap = (v - lim).abs();
            assert!(gap < prev, "n = {n}: {v} vs {lim}");
            prev = gap;
        }
    }
}
