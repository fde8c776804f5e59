//! Weak-error experiments: Monte Carlo estimates of `E[g(P̃^{(n)}_T)]` over a
//! list of `n`, a benchmark for the limit, rate fits and confidence bands.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{fit_rate, theoretical_rate, PreZero};
use crate::kernels::{KernelSpec, KernelVariant};
use crate::marks::MarkLaw;
use crate::microsim::simulate_events;
use crate::moments::{hermite4, moment_value, MomentModel, MomentParams, QuadratureOptions};
use crate::refsim::{GaussianModelSpec, GaussianVariant, JointSampler};
use crate::rng::SeedStream;
use crate::stats::{mean_estimate, MeanEstimate};

/// Test functional applied to the terminal log-price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "order", rename_all = "snake_case")]
pub enum Statistic {
    /// `x^4 - 6x^2 + 3`.
    Hermite4,
    /// `x^k`, `k ≤ 4`.
    Power(u8),
}

impl Statistic {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Statistic::Hermite4 => hermite4(x),
            Statistic::Power(k) => x.powi(i32::from(k)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkMethod {
    /// Moment engine on the limit model.
    Moments,
    /// Euler Monte Carlo on the exactly sampled limit.
    Euler,
    /// Both; the moment value is used and the Euler value cross-checks it.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub hurst: f64,
    pub variant: KernelVariant,
    pub law: MarkLaw,
    pub horizon: f64,
    /// Pre-zero window `S`; `0` gives the Riemann–Liouville setting.
    pub pre_horizon: f64,
    pub ns: Vec<u64>,
    pub samples: usize,
    pub statistic: Statistic,
    pub benchmark: BenchmarkMethod,
    pub euler_steps: usize,
    pub euler_samples: usize,
    pub quadrature: QuadratureOptions,
    pub seed: u64,
    /// Common random numbers across `n`.
    pub crn: bool,
    /// Admissible range of fitted slopes.
    pub slope_window: (f64, f64),
}

impl ExperimentConfig {
    /// Desk-scale default: Optimized kernel, `H = 0.15`, `ρ = -1`, `σ_v = 0.05`.
    pub fn desk_default() -> Self {
        let hurst = 0.15;
        ExperimentConfig {
            hurst,
            variant: KernelVariant::Optimized {
                beta: crate::kernels::optimal_beta(hurst),
            },
            law: MarkLaw::gaussian(1.0, 0.05, -1.0).expect("valid law"),
            horizon: 1.0,
            pre_horizon: 0.0,
            ns: vec![16, 32, 64, 128, 256],
            samples: 200_000,
            statistic: Statistic::Hermite4,
            benchmark: BenchmarkMethod::Moments,
            euler_steps: 1000,
            euler_samples: 1_000_000,
            quadrature: QuadratureOptions::default(),
            seed: 20_240_601,
            crn: false,
            slope_window: (-1.0, -0.35),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || !self.ns.windows(2).all(|w| w[0] < w[1]) || self.ns[0] == 0 {
            return Err(Error::config(
                "experiment.ns must be positive and strictly increasing",
            ));
        }
        if self.samples < 1000 {
            return Err(Error::config("experiment.samples must be at least 1000"));
        }
        if !(self.horizon > 0.0) || !(self.pre_horizon >= 0.0) {
            return Err(Error::config("need horizon > 0 and pre_horizon >= 0"));
        }
        if let Statistic::Power(k) = self.statistic {
            if !(1..=4).contains(&k) {
                return Err(Error::config(
                    "moment functionals are limited to orders 1..=4",
                ));
            }
        }
        if self.slope_window.0 >= self.slope_window.1 {
            return Err(Error::config("slope window must satisfy min < max"));
        }
        self.kernel(self.ns[0])?;
        Ok(())
    }

    pub fn kernel(&self, n: u64) -> Result<KernelSpec> {
        if self.variant == KernelVariant::Limit {
            return Err(Error::config(
                "the experiment needs a prelimit kernel variant",
            ));
        }
        KernelSpec::new(self.hurst, self.variant, n).map_err(|e| Error::Config(e.to_string()))
    }

    /// Limit-model variant matching the prelimit pre-zero treatment.
    pub fn limit_variant(&self) -> GaussianVariant {
        if self.pre_horizon > 0.0 {
            GaussianVariant::TwoSided
        } else {
            GaussianVariant::RiemannLiouville
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakErrorPoint {
    pub n: u64,
    pub estimate: f64,
    pub standard_error: f64,
    /// `|estimate - benchmark|`.
    pub weak_error: f64,
    /// Standard error of `weak_error` (estimate and benchmark combined).
    pub error_standard_error: f64,
    /// `weak_error ≤ 3·error_standard_error`.
    pub noise_dominated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub method: BenchmarkMethod,
    pub value: f64,
    pub standard_error: f64,
    pub moment_value: Option<f64>,
    pub moment_quadrature_error: Option<f64>,
    pub euler_value: Option<f64>,
    pub euler_standard_error: Option<f64>,
    /// `|moment - euler| / combined SE` when both are available.
    pub agreement_z: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Consistent,
    Inconclusive,
    Contradicting,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub status: FitStatus,
    pub points_used: Vec<u64>,
    pub slope: Option<f64>,
    pub slope_standard_error: Option<f64>,
    /// `slope ± 3·SE`.
    pub slope_interval: Option<(f64, f64)>,
    pub intercept: Option<f64>,
    /// `C` of the band centre `C·n^{-rate}`, weighted least squares over all points.
    pub prefactor: Option<f64>,
}

/// Scale of the original study, kept for reference only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceScale {
    pub samples_per_n: f64,
    pub benchmark_samples: f64,
    pub benchmark_steps: usize,
}

pub const REFERENCE_SCALE: ReferenceScale = ReferenceScale {
    samples_per_n: 2e7,
    benchmark_samples: 3.2e7,
    benchmark_steps: 5000,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandPoint {
    pub n: u64,
    pub center: f64,
    pub observed: f64,
    pub standard_error: f64,
    pub levels: Vec<f64>,
    pub inside: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub points: Vec<WeakErrorPoint>,
    pub benchmark: BenchmarkSummary,
    pub fit: FitSummary,
    pub theoretical_exponent: f64,
    pub theoretical_log_factor: bool,
    /// Bands at 1, 2 and 3 standard errors.
    pub bands: Vec<BandPoint>,
    pub reference_scale: ReferenceScale,
}

/// `g(P̃^{(n)}_T)` for replications `0..samples`, in replication order.
pub fn sample_statistic(cfg: &ExperimentConfig, n: u64) -> Result<Vec<f64>> {
    let kernel = cfg.kernel(n)?;
    let seeds = replication_seeds(cfg, n);
    (0..cfg.samples as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeds.rng(r);
            let ev = simulate_events(n, cfg.horizon, cfg.pre_horizon, &cfg.law, &mut rng)?;
            Ok(cfg.statistic.eval(ev.terminal_price(&kernel)?))
        })
        .collect()
}

fn replication_seeds(cfg: &ExperimentConfig, n: u64) -> SeedStream {
    let root = SeedStream::new(cfg.seed).derive(1);
    if cfg.crn {
        root
    } else {
        root.derive(n)
    }
}

/// `E[g(P̃*_T)]` from the moment engine, with its quadrature error.
pub fn moment_benchmark(cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    let model = MomentModel::Limit {
        hurst: cfg.hurst,
        variant: cfg.limit_variant(),
    };
    let params = MomentParams::from_law(&cfg.law, cfg.horizon);
    let m = |k: usize| moment_value(k, &model, &params, &cfg.quadrature);
    match cfg.statistic {
        Statistic::Hermite4 => {
            let m4 = m(4)?;
            let m2 = m(2)?;
            Ok((
                m4.value - 6.0 * m2.value + 3.0,
                m4.quadrature_error + 6.0 * m2.quadrature_error,
            ))
        }
        Statistic::Power(k) => {
            let e = m(usize::from(k))?;
            Ok((e.value, e.quadrature_error))
        }
    }
}

/// `E[g(P̃*_T)]` by Euler Monte Carlo on the exactly sampled limit.
pub fn euler_benchmark(cfg: &ExperimentConfig) -> Result<MeanEstimate> {
    let spec = GaussianModelSpec {
        sigma_p: cfg.law.sigma_p(),
        sigma_v: cfg.law.sigma_v(),
        rho: cfg.law.rho(),
        variant: cfg.limit_variant(),
        kernel: KernelSpec::limit(cfg.hurst)?,
        horizon: cfg.horizon,
        steps: cfg.euler_steps,
    };
    let sampler = JointSampler::new(spec)?;
    let stat = cfg.statistic;
    let seeds = SeedStream::new(cfg.seed).derive(2);
    Ok(sampler.euler_statistics(&seeds, cfg.euler_samples, &[move |p: f64| stat.eval(p)])[0])
}

fn benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkSummary> {
    let moments = match cfg.benchmark {
        BenchmarkMethod::Euler => None,
        _ => Some(moment_benchmark(cfg)?),
    };
    let euler = match cfg.benchmark {
        BenchmarkMethod::Moments => None,
        _ => Some(euler_benchmark(cfg)?),
    };
    let (value, standard_error) = match (moments, euler) {
        (Some((v, q)), _) => (v, q),
        (None, Some(e)) => (e.mean, e.standard_error),
        (None, None) => unreachable!("one benchmark is always selected"),
    };
    let agreement_z = match (moments, euler) {
        (Some((v, q)), Some(e)) => Some((v - e.mean).abs() / q.hypot(e.standard_error)),
        _ => None,
    };
    Ok(BenchmarkSummary {
        method: cfg.benchmark,
        value,
        standard_error,
        moment_value: moments.map(|m| m.0),
        moment_quadrature_error: moments.map(|m| m.1),
        euler_value: euler.map(|e| e.mean),
        euler_standard_error: euler.map(|e| e.standard_error),
        agreement_z,
    })
}

pub fn run_weak_error(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let bench = benchmark(cfg)?;
    let mut points = Vec::with_capacity(cfg.ns.len());
    for &n in &cfg.ns {
        let est = mean_estimate(&sample_statistic(cfg, n)?);
        let weak_error = (est.mean - bench.value).abs();
        let se = est.standard_error.hypot(bench.standard_error);
        points.push(WeakErrorPoint {
            n,
            estimate: est.mean,
            standard_error: est.standard_error,
            weak_error,
            error_standard_error: se,
            noise_dominated: weak_error <= 3.0 * se,
        });
    }
    let rate = theoretical_rate(&cfg.kernel(cfg.ns[0])?);
    let fit = fit_points(&points, rate.exponent, cfg.slope_window)?;
    let mut report = ExperimentReport {
        config: cfg.clone(),
        seed: cfg.seed,
        points,
        benchmark: bench,
        fit,
        theoretical_exponent: rate.exponent,
        theoretical_log_factor: rate.log_factor,
        bands: Vec::new(),
        reference_scale: REFERENCE_SCALE,
    };
    if report.fit.prefactor.is_some() {
        report.bands = confidence_bands(&report, &[1.0, 2.0, 3.0])?;
    }
    Ok(report)
}

/// Rate fit over the points above the noise floor plus the band prefactor.
pub fn fit_points(
    points: &[WeakErrorPoint],
    exponent: f64,
    window: (f64, f64),
) -> Result<FitSummary> {
    let prefactor = band_prefactor(points, exponent);
    let used: Vec<&WeakErrorPoint> = points.iter().filter(|p| !p.noise_dominated).collect();
    let points_used = used.iter().map(|p| p.n).collect();
    if used.len() < 3 {
        return Ok(FitSummary {
            status: FitStatus::Inconclusive,
            points_used,
            slope: None,
            slope_standard_error: None,
            slope_interval: None,
            intercept: None,
            prefactor,
        });
    }
    let ns: Vec<f64> = used.iter().map(|p| p.n as f64).collect();
    let errs: Vec<f64> = used.iter().map(|p| p.weak_error).collect();
    let f = fit_rate(&ns, &errs)?;
    // Slope uncertainty propagated from the per-point standard errors
    // (log-space SE ≈ SE/error), taken together with the residual spread.
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let prop_var = used
        .iter()
        .zip(&x)
        .map(|(p, xi)| (xi - mx).powi(2) * (p.error_standard_error / p.weak_error).powi(2))
        .sum::<f64>()
        / x.iter().map(|xi| (xi - mx).powi(2)).sum::<f64>().powi(2);
    let se = prop_var.sqrt().max(f.slope_standard_error);
    let interval = (f.slope - 3.0 * se, f.slope + 3.0 * se);
    let status = if interval.1 < window.0 || interval.0 > window.1 {
        FitStatus::Contradicting
    } else {
        FitStatus::Consistent
    };
    Ok(FitSummary {
        status,
        points_used,
        slope: Some(f.slope),
        slope_standard_error: Some(se),
        slope_interval: Some(interval),
        intercept: Some(f.intercept),
        prefactor,
    })
}

fn band_prefactor(points: &[WeakErrorPoint], exponent: f64) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for p in points {
        let x = (p.n as f64).powf(-exponent);
        let w = p.error_standard_error.powi(-2);
        if !w.is_finite() {
            continue;
        }
        num += w * x * p.weak_error;
        den += w * x * x;
    }
    (den > 0.0).then(|| num / den)
}

/// Bands `C·n^{-rate} ± k·SE(n)` with per-point membership flags.
pub fn confidence_bands(report: &ExperimentReport, levels: &[f64]) -> Result<Vec<BandPoint>> {
    let c = report
        .fit
        .prefactor
        .ok_or_else(|| Error::Contract("confidence bands need a fitted prefactor".into()))?;
    Ok(report
        .points
        .iter()
        .map(|p| {
            let center = c * (p.n as f64).powf(-report.theoretical_exponent);
            let dev = (p.weak_error - center).abs();
            BandPoint {
                n: p.n,
                center,
                observed: p.weak_error,
                standard_error: p.error_standard_error,
                levels: levels.to_vec(),
                inside: levels
                    .iter()
                    .map(|k| dev <= k * p.error_standard_error)
                    .collect(),
            }
        })
        .collect())
}

/// Pre-zero treatment of the prelimit matching [`ExperimentConfig::limit_variant`].
pub fn prelimit_pre_zero(cfg: &ExperimentConfig) -> PreZero {
    if cfg.pre_horizon > 0.0 {
        PreZero::Truncated(cfg.pre_horizon)
    } else {
        PreZero::None
    }
}
