//! Flat `key = value` configuration with `kernel.*`, `marks.*` and
//! `experiment.*` keys. Lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{BenchmarkMethod, ExperimentConfig, Statistic};
use crate::kernels::{optimal_beta, KernelSpec, KernelVariant};
use crate::marks::MarkLaw;
use crate::moments::QuadratureOptions;

pub const KNOWN_KEYS: &[&str] = &[
    "kernel.variant",
    "kernel.hurst",
    "kernel.beta",
    "kernel.alpha",
    "kernel.n",
    "marks.family",
    "marks.sigma_p",
    "marks.sigma_v",
    "marks.rho",
    "marks.gaussian_rho",
    "experiment.horizon",
    "experiment.pre_horizon",
    "experiment.ns",
    "experiment.samples",
    "experiment.benchmark",
    "experiment.euler_steps",
    "experiment.euler_samples",
    "experiment.quadrature_nodes",
    "experiment.seed",
    "experiment.crn",
    "experiment.slope_min",
    "experiment.slope_max",
    "experiment.functional",
];

/// Parsed key/value pairs; later [`Config::set`] calls override file values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected `key = value`", idx + 1))
            })?;
            let key = k.trim();
            if cfg.entries.contains_key(key) {
                return Err(Error::config(format!(
                    "line {}: duplicate key `{key}`",
                    idx + 1
                )));
            }
            cfg.set(key, v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::config(format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(Error::config(format!("empty value for `{key}`")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::config(format!("`{key}`: `{v}` is not a finite number"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_count(v).ok_or_else(|| {
                Error::config(format!("`{key}`: `{v}` is not a nonnegative integer"))
            }),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(v) => Err(Error::config(format!("`{key}`: `{v}` is not a boolean"))),
        }
    }

    /// Kernel family from `kernel.variant`, `kernel.hurst`, `kernel.beta`, `kernel.alpha`.
    pub fn kernel_variant(&self) -> Result<(f64, KernelVariant)> {
        let hurst = self.f64_or("kernel.hurst", 0.15)?;
        let variant = match self.get("kernel.variant").unwrap_or("optimized") {
            "benchmark" => KernelVariant::Benchmark,
            "optimized" => KernelVariant::Optimized {
                beta: self.f64_or("kernel.beta", optimal_beta(hurst))?,
            },
            "shift" => KernelVariant::GeneralShift {
                alpha: self.f64_or("kernel.alpha", 1.0)?,
            },
            "limit" => KernelVariant::Limit,
            other => return Err(Error::config(format!("unknown kernel.variant `{other}`"))),
        };
        Ok((hurst, variant))
    }

    /// Kernel at `kernel.n` (or `n_override`).
    pub fn kernel(&self, n_override: Option<u64>) -> Result<KernelSpec> {
        let (hurst, variant) = self.kernel_variant()?;
        let n = match n_override {
            Some(n) => n,
            None => self.u64_or("kernel.n", 256)?,
        };
        KernelSpec::new(hurst, variant, n).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn mark_law(&self) -> Result<MarkLaw> {
        let sp = self.f64_or("marks.sigma_p", 1.0)?;
        let sv = self.f64_or("marks.sigma_v", 0.05)?;
        let law = match self.get("marks.family").unwrap_or("gaussian") {
            "gaussian" => {
                if self.get("marks.gaussian_rho").is_some() {
                    return Err(Error::config(
                        "marks.gaussian_rho applies to the sign family only",
                    ));
                }
                MarkLaw::gaussian(sp, sv, self.f64_or("marks.rho", -1.0)?)
            }
            "sign" => {
                if self.get("marks.rho").is_some() {
                    return Err(Error::config(
                        "sign marks take marks.gaussian_rho, not marks.rho",
                    ));
                }
                let g = self.get("marks.gaussian_rho").ok_or_else(|| {
                    Error::config("sign marks need an explicit marks.gaussian_rho")
                })?;
                let g = g.parse::<f64>().map_err(|_| {
                    Error::config(format!("marks.gaussian_rho: `{g}` is not a number"))
                })?;
                MarkLaw::scaled_sign(sp, sv, g)
            }
            other => return Err(Error::config(format!("unknown marks.family `{other}`"))),
        };
        law.map_err(|e| Error::Config(e.to_string()))
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let d = ExperimentConfig::desk_default();
        let (hurst, variant) = self.kernel_variant()?;
        let ns = match self.get("experiment.ns") {
            None => d.ns.clone(),
            Some(v) => v
                .split(',')
                .map(|s| {
                    parse_count(s.trim())
                        .ok_or_else(|| Error::config(format!("experiment.ns: bad entry `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let benchmark = match self.get("experiment.benchmark").unwrap_or("moments") {
            "moments" => BenchmarkMethod::Moments,
            "euler" => BenchmarkMethod::Euler,
            "both" => BenchmarkMethod::Both,
            other => {
                return Err(Error::config(format!(
                    "unknown experiment.benchmark `{other}`"
                )))
            }
        };
        let statistic = match self.get("experiment.functional").unwrap_or("h4") {
            "h4" => Statistic::Hermite4,
            m => match m.strip_prefix("moment").and_then(|k| k.parse::<u8>().ok()) {
                Some(k) => Statistic::Power(k),
                None => {
                    return Err(Error::config(format!(
                        "unknown experiment.functional `{m}`"
                    )))
                }
            },
        };
        let nodes = self.u64_or("experiment.quadrature_nodes", d.quadrature.nodes as u64)? as usize;
        let cfg = ExperimentConfig {
            hurst,
            variant,
            law: self.mark_law()?,
            horizon: self.f64_or("experiment.horizon", d.horizon)?,
            pre_horizon: self.f64_or("experiment.pre_horizon", d.pre_horizon)?,
            ns,
            samples: self.u64_or("experiment.samples", d.samples as u64)? as usize,
            statistic,
            benchmark,
            euler_steps: self.u64_or("experiment.euler_steps", d.euler_steps as u64)? as usize,
            euler_samples: self.u64_or("experiment.euler_samples", d.euler_samples as u64)?
                as usize,
            quadrature: QuadratureOptions {
                nodes,
                check_nodes: nodes + nodes / 2,
                ..d.quadrature
            },
            seed: self.u64_or("experiment.seed", d.seed)?,
            crn: self.bool_or("experiment.crn", d.crn)?,
            slope_window: (
                self.f64_or("experiment.slope_min", d.slope_window.0)?,
                self.f64_or("experiment.slope_max", d.slope_window.1)?,
            ),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Accepts plain integers and integral scientific notation such as `2e5`.
fn parse_count(s: &str) -> Option<u64> {
    if let Ok(v) = s.parse::<u64>() {
        return Some(v);
    }
    let x = s.parse::<f64>().ok()?;
    (x >= 0.0 && x.fract() == 0.0 && x < 1.8e19).then_some(x as u64)
}
