//! Exact Gaussian reference simulation of the limit and approximate models.
//!
//! The joint vector `(ΔW_0..ΔW_{K-1}, Ṽ_{t_1}..Ṽ_{t_K})` on an equidistant grid
//! is factorised once. Putting the Brownian increments first makes the top
//! block of the Cholesky factor diagonal (`√Δt`), and both lower blocks are
//! triangular because `Ṽ_{t_i}` only depends on increments before `t_i`.
//! Sampling is then a blocked triangular matrix product.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{covariance_cn_with, PreZero};
use crate::kernels::{KernelSpec, KernelVariant};
use crate::quad::TanhSinh;
use crate::rng::SeedStream;
use crate::special;
use crate::stats::{mean_estimate, MeanEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianVariant {
    /// Mandelbrot–van Ness (full past).
    TwoSided,
    /// No contribution from before time zero.
    RiemannLiouville,
}

impl GaussianVariant {
    pub fn pre_zero(self) -> PreZero {
        match self {
            GaussianVariant::TwoSided => PreZero::Full,
            GaussianVariant::RiemannLiouville => PreZero::None,
        }
    }
}

/// Gaussian model on `K + 1` equidistant points of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianModelSpec {
    pub sigma_p: f64,
    pub sigma_v: f64,
    pub rho: f64,
    pub variant: GaussianVariant,
    /// `Limit` for the rough Bergomi model, a prelimit kernel for the approximate one.
    pub kernel: KernelSpec,
    pub horizon: f64,
    pub steps: usize,
}

pub const MAX_STEPS: usize = 4096;

impl GaussianModelSpec {
    fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.steps > MAX_STEPS {
            return Err(Error::domain(format!(
                "grid size must lie in 1..={MAX_STEPS}"
            )));
        }
        if !(self.horizon > 0.0) || !(self.sigma_p > 0.0) || !(self.sigma_v >= 0.0) {
            return Err(Error::domain("need T > 0, sigma_p > 0 and sigma_v >= 0"));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::domain("rho must lie in [-1, 1]"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Grid times `t_0 = 0, ..., t_K = T`.
    pub fn grid(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.dt() * k as f64).collect()
    }

    fn vol_covariance(&self, t: f64, s: f64) -> Result<f64> {
        let h = self.kernel.hurst();
        let c = if self.kernel.is_limit() {
            match self.variant {
                GaussianVariant::TwoSided => special::two_sided_covariance(h, t, s),
                GaussianVariant::RiemannLiouville => special::rl_covariance(h, t, s),
            }
        } else {
            covariance_cn_with(&self.kernel, t, s, self.variant.pre_zero())?
        };
        Ok(self.sigma_v * self.sigma_v * c)
    }
}

/// `∫_0^x φ(r) dr` for `x ≥ 0`.
fn kernel_integral(kernel: &KernelSpec, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let h1 = kernel.hurst() + 0.5;
    let d = kernel.shift();
    let closed = |a: f64, b: f64| ((b + d).powf(h1) - (a + d).powf(h1)) / h1;
    match kernel.variant() {
        KernelVariant::Optimized { .. } => {
            let head_end = x.min(d);
            let f = |u: f64| kernel.value(u);
            let head = TanhSinh::with_tol(1e-15, 1e-12)
                .integrate(&f, 0.0, head_end)
                .require("kernel integral")?;
            Ok(head + if x > d { closed(d, x) } else { 0.0 })
        }
        _ => Ok(closed(0.0, x)),
    }
}

/// Joint covariance of `(ΔW_0..ΔW_{K-1}, Ṽ_{t_1}..Ṽ_{t_K})`.
pub fn build_joint_covariance(spec: &GaussianModelSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let k = spec.steps;
    let dt = spec.dt();
    let grid = spec.grid();
    let mut m = DMatrix::<f64>::zeros(2 * k, 2 * k);
    for i in 0..k {
        m[(i, i)] = dt;
    }
    // Cov(Ṽ_{t_i}, ΔW_j) = ρσ_v ∫_{t_j}^{t_{j+1}} φ(t_i - r) dr depends on i - j only.
    let phi_int: Vec<f64> = (0..=k)
        .map(|j| kernel_integral(&spec.kernel, dt * j as f64))
        .collect::<Result<_>>()?;
    let scale = spec.rho * spec.sigma_v;
    for i in 1..=k {
        for j in 0..i {
            let c = scale * (phi_int[i - j] - phi_int[i - j - 1]);
            m[(k + i - 1, j)] = c;
            m[(j, k + i - 1)] = c;
        }
    }
    let rows: Vec<Vec<f64>> = (1..=k)
        .into_par_iter()
        .map(|i| {
            (1..=i)
                .map(|j| spec.vol_covariance(grid[i], grid[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    for (ii, row) in rows.iter().enumerate() {
        for (jj, c) in row.iter().enumerate() {
            m[(k + ii, k + jj)] = *c;
            m[(k + jj, k + ii)] = *c;
        }
    }
    Ok(m)
}

/// Lower Cholesky factor with up to three rounds of diagonal jitter.
pub fn factorize(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = cov.nrows();
    let jitter = 1e-12 * cov.trace() / dim.max(1) as f64;
    let mut work = cov.clone();
    for attempt in 0..=3 {
        if attempt > 0 {
            for i in 0..dim {
                work[(i, i)] += jitter;
            }
        }
        if let Some(ch) = work.clone().cholesky() {
            return Ok(ch.l());
        }
    }
    let min_eigenvalue = SymmetricEigen::new(cov.clone()).eigenvalues.min();
    Err(Error::Factorization { min_eigenvalue })
}

/// One sampled volatility path (including `Ṽ_0 = 0`) with its increments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointPath {
    pub log_vol: Vec<f64>,
    pub dw: Vec<f64>,
}

/// Factorised sampler for a [`GaussianModelSpec`].
#[derive(Debug, Clone)]
pub struct JointSampler {
    spec: GaussianModelSpec,
    /// Rows of the factor belonging to `Ṽ` (`K × 2K`).
    vol_rows: DMatrix<f64>,
    sqrt_dt: f64,
}

const BLOCK: usize = 64;

impl JointSampler {
    pub fn new(spec: GaussianModelSpec) -> Result<Self> {
        let k = spec.steps;
        // A flat volatility has an all-zero block; skip the jittered factor
        // so that Ṽ is exactly zero.
        let vol_rows = if spec.sigma_v == 0.0 {
            spec.validate()?;
            DMatrix::zeros(k, 2 * k)
        } else {
            let cov = build_joint_covariance(&spec)?;
            factorize(&cov)?.rows(k, k).into_owned()
        };
        Ok(JointSampler {
            spec,
            vol_rows,
            sqrt_dt: spec.dt().sqrt(),
        })
    }

    pub fn spec(&self) -> &GaussianModelSpec {
        &self.spec
    }

    /// Samples `count` replications starting at replication index `first`.
    /// Column `j` of the results belongs to replication `first + j`; with
    /// `antithetic`, odd replications negate the normals of the preceding one.
    pub fn sample_block(
        &self,
        seeds: &SeedStream,
        first: u64,
        count: usize,
        antithetic: bool,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let k = self.spec.steps;
        let mut z = DMatrix::<f64>::zeros(2 * k, count);
        for c in 0..count {
            let idx = first + c as u64;
            if antithetic && idx % 2 == 1 && c > 0 {
                let prev = -z.column(c - 1).into_owned();
                z.set_column(c, &prev);
                continue;
            }
            let base = if antithetic { idx - idx % 2 } else { idx };
            let mut rng = seeds.rng(base);
            let sign = if antithetic && idx % 2 == 1 {
                -1.0
            } else {
                1.0
            };
            for r in 0..2 * k {
                let x: f64 = StandardNormal.sample(&mut rng);
                z[(r, c)] = sign * x;
            }
        }
        let dw = z.rows(0, k) * self.sqrt_dt;
        let mut vol = DMatrix::<f64>::zeros(k, count);
        let mut r0 = 0;
        while r0 < k {
            let len = BLOCK.min(k - r0);
            let r1 = r0 + len;
            let mut out = vol.rows_mut(r0, len);
            out.gemm(
                1.0,
                &self.vol_rows.view((r0, 0), (len, r1)),
                &z.rows(0, r1),
                0.0,
            );
            out.gemm(
                1.0,
                &self.vol_rows.view((r0, k), (len, r1)),
                &z.rows(k, r1),
                1.0,
            );
            r0 = r1;
        }
        (vol, dw)
    }

    /// Materialised paths; convenient for small ensembles.
    pub fn sample_joint_paths(
        &self,
        seeds: &SeedStream,
        count: usize,
        antithetic: bool,
    ) -> Vec<JointPath> {
        let (vol, dw) = self.sample_block(seeds, 0, count, antithetic);
        (0..count)
            .map(|c| {
                let mut lv = Vec::with_capacity(self.spec.steps + 1);
                lv.push(0.0);
                lv.extend(vol.column(c).iter());
                JointPath {
                    log_vol: lv,
                    dw: dw.column(c).iter().copied().collect(),
                }
            })
            .collect()
    }

    /// Monte Carlo estimates of `E[g(P̃*_T)]` for each statistic `g`.
    pub fn euler_statistics<G>(
        &self,
        seeds: &SeedStream,
        samples: usize,
        stats: &[G],
    ) -> Vec<MeanEstimate>
    where
        G: Fn(f64) -> f64 + Sync,
    {
        let batch = 256usize;
        let batches = samples.div_ceil(batch);
        let prices: Vec<f64> = (0..batches)
            .into_par_iter()
            .flat_map_iter(|b| {
                let first = b * batch;
                let count = batch.min(samples - first);
                let (vol, dw) = self.sample_block(seeds, first as u64, count, false);
                (0..count)
                    .map(|c| {
                        let mut p = dw[(0, c)];
                        for j in 1..self.spec.steps {
                            p += vol[(j - 1, c)].exp() * dw[(j, c)];
                        }
                        p * self.spec.sigma_p
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        stats
            .iter()
            .map(|g| {
                let xs: Vec<f64> = prices.iter().map(|p| g(*p)).collect();
                mean_estimate(&xs)
            })
            .collect()
    }
}

/// Left-point Euler price `σ_p Σ_k exp(Ṽ_{t_k}) ΔW_k`.
///
/// `vpath` holds either `K + 1` grid values (`t_0..t_K`) or the `K` left points.
pub fn euler_price(vpath: &[f64], dw: &[f64], sigma_p: f64) -> Result<f64> {
    if vpath.len() != dw.len() && vpath.len() != dw.len() + 1 {
        return Err(Error::config(format!(
            "volatility path of length {} does not match {} increments",
            vpath.len(),
            dw.len()
        )));
    }
    Ok(sigma_p * vpath.iter().zip(dw).map(|(v, w)| v.exp() * w).sum::<f64>())
}
