//! Event-driven simulation of the prelimit price/log-volatility pair.
//!
//! Orders arrive as a Poisson process of rate `n`. Each order moves the
//! log-volatility by `φ_n(t-τ)·v/√n` and the log-price by
//! `exp(Ṽ_{τ-})·u/√n`. Orders that arrived before time zero only enter the
//! volatility through the differences `φ_n(t-τ) - φ_n(-τ)`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::PreZero;
use crate::kernels::KernelSpec;
use crate::marks::{Mark, MarkLaw};
use crate::quad::TanhSinh;

/// Marked arrivals on `(0, T]` and, optionally, on `[-S, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventStream {
    arrivals: Vec<f64>,
    marks: Vec<Mark>,
    pre_arrivals: Vec<f64>,
    pre_marks: Vec<Mark>,
    rate: f64,
    horizon: f64,
    pre_horizon: f64,
}

/// Prelimit path sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathGrid {
    pub times: Vec<f64>,
    pub log_vol: Vec<f64>,
    pub log_price: Vec<f64>,
    pub left_limits_at_jumps: Vec<f64>,
}

/// Draws arrivals at rate `n` on `(0, T]` and `[-S, 0)` with i.i.d. marks.
///
/// Arrival gaps are drawn as `Exp(1)/n` interleaved with the marks, so two
/// calls with the same generator state but different `n` produce the same
/// unit-rate process rescaled in time.
pub fn simulate_events<R: Rng + ?Sized>(
    n: u64,
    horizon: f64,
    pre_horizon: f64,
    law: &MarkLaw,
    rng: &mut R,
) -> Result<EventStream> {
    if n == 0 {
        return Err(Error::domain("arrival rate n must be positive"));
    }
    if !(horizon >= 0.0) || !(pre_horizon >= 0.0) {
        return Err(Error::domain("horizons must be nonnegative"));
    }
    let rate = n as f64;
    let expected = (rate * horizon).ceil() as usize + 16;
    let mut arrivals = Vec::with_capacity(expected);
    let mut marks = Vec::with_capacity(expected);
    let mut t = 0.0;
    if horizon > 0.0 {
        loop {
            let gap: f64 = Exp1.sample(rng);
            t += gap / rate;
            if t > horizon {
                break;
            }
            arrivals.push(t);
            marks.push(law.sample(rng));
        }
    }
    let mut pre_arrivals = Vec::new();
    let mut pre_marks = Vec::new();
    let mut t = 0.0;
    if pre_horizon > 0.0 {
        loop {
            let gap: f64 = Exp1.sample(rng);
            t -= gap / rate;
            if t < -pre_horizon {
                break;
            }
            pre_arrivals.push(t);
            pre_marks.push(law.sample(rng));
        }
    }
    Ok(EventStream {
        arrivals,
        marks,
        pre_arrivals,
        pre_marks,
        rate,
        horizon,
        pre_horizon,
    })
}

impl EventStream {
    /// Builds a stream from explicit events, validating ordering and ranges.
    pub fn from_parts(
        arrivals: Vec<f64>,
        marks: Vec<Mark>,
        pre_arrivals: Vec<f64>,
        pre_marks: Vec<Mark>,
        rate: f64,
        horizon: f64,
        pre_horizon: f64,
    ) -> Result<Self> {
        if arrivals.len() != marks.len() || pre_arrivals.len() != pre_marks.len() {
            return Err(Error::Contract(
                "every arrival needs exactly one mark".into(),
            ));
        }
        if !arrivals.windows(2).all(|w| w[0] < w[1])
            || arrivals.iter().any(|&t| !(t > 0.0 && t <= horizon))
        {
            return Err(Error::Contract(
                "arrivals must be increasing inside (0, T]".into(),
            ));
        }
        if !pre_arrivals.windows(2).all(|w| w[0] > w[1])
            || pre_arrivals
                .iter()
                .any(|&t| !(t <= 0.0 && t >= -pre_horizon))
        {
            return Err(Error::Contract(
                "pre-zero arrivals must be decreasing inside [-S, 0]".into(),
            ));
        }
        if !(rate > 0.0) {
            return Err(Error::domain("rate must be positive"));
        }
        Ok(EventStream {
            arrivals,
            marks,
            pre_arrivals,
            pre_marks,
            rate,
            horizon,
            pre_horizon,
        })
    }

    pub fn arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    pub fn pre_arrivals(&self) -> &[f64] {
        &self.pre_arrivals
    }

    pub fn pre_marks(&self) -> &[Mark] {
        &self.pre_marks
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn pre_horizon(&self) -> f64 {
        self.pre_horizon
    }

    fn check_kernel(&self, kernel: &KernelSpec) -> Result<()> {
        if kernel.is_limit() || kernel.n() as f64 != self.rate {
            return Err(Error::config(format!(
                "kernel scale n = {} does not match the stream rate {}",
                kernel.n(),
                self.rate
            )));
        }
        Ok(())
    }

    /// `W^{(n)}_t = Σ_{τ ≤ t} u/√n`.
    pub fn driver(&self, t: f64) -> f64 {
        let scale = self.rate.sqrt().recip();
        self.arrivals
            .iter()
            .zip(&self.marks)
            .take_while(|(tau, _)| **tau <= t)
            .map(|(_, m)| m.u)
            .sum::<f64>()
            * scale
    }

    fn pre_zero_vol(&self, kernel: &KernelSpec, t: f64) -> f64 {
        self.pre_arrivals
            .iter()
            .zip(&self.pre_marks)
            .map(|(tau, m)| kernel.increment(-tau, t) * m.v)
            .sum()
    }

    /// `Ṽ^{(n)}` at each time (right-continuous: an arrival at `t` counts).
    pub fn log_vol(&self, kernel: &KernelSpec, times: &[f64]) -> Result<Vec<f64>> {
        self.check_kernel(kernel)?;
        let scale = self.rate.sqrt().recip();
        Ok(times
            .iter()
            .map(|&t| {
                let post: f64 = self
                    .arrivals
                    .iter()
                    .zip(&self.marks)
                    .take_while(|(tau, _)| **tau <= t)
                    .map(|(tau, m)| kernel.value(t - tau) * m.v)
                    .sum();
                (post + self.pre_zero_vol(kernel, t)) * scale
            })
            .collect())
    }

    /// `Ṽ^{(n)}_{τ_k-}` for every arrival: earlier arrivals and pre-zero
    /// events count, the arrival's own jump does not.
    pub fn left_limits(&self, kernel: &KernelSpec) -> Result<Vec<f64>> {
        self.check_kernel(kernel)?;
        let scale = self.rate.sqrt().recip();
        let mut out = Vec::with_capacity(self.arrivals.len());
        for (k, &tk) in self.arrivals.iter().enumerate() {
            let mut acc = 0.0;
            for j in 0..k {
                acc += kernel.value(tk - self.arrivals[j]) * self.marks[j].v;
            }
            out.push((acc + self.pre_zero_vol(kernel, tk)) * scale);
        }
        Ok(out)
    }

    /// `P̃^{(n)}_T`.
    pub fn terminal_price(&self, kernel: &KernelSpec) -> Result<f64> {
        let left = self.left_limits(kernel)?;
        let scale = self.rate.sqrt().recip();
        Ok(left
            .iter()
            .zip(&self.marks)
            .map(|(v, m)| v.exp() * m.u)
            .sum::<f64>()
            * scale)
    }

    /// Price and volatility sampled on `grid`.
    pub fn price_path(&self, kernel: &KernelSpec, grid: &[f64]) -> Result<PathGrid> {
        if !grid.windows(2).all(|w| w[0] <= w[1]) {
            return Err(Error::Contract("grid must be sorted".into()));
        }
        let left = self.left_limits(kernel)?;
        let log_vol = self.log_vol(kernel, grid)?;
        let scale = self.rate.sqrt().recip();
        let mut log_price = Vec::with_capacity(grid.len());
        let mut k = 0;
        let mut p = 0.0;
        for &t in grid {
            while k < self.arrivals.len() && self.arrivals[k] <= t {
                p += left[k].exp() * self.marks[k].u * scale;
                k += 1;
            }
            log_price.push(p);
        }
        Ok(PathGrid {
            times: grid.to_vec(),
            log_vol,
            log_price,
            left_limits_at_jumps: left,
        })
    }
}

/// `E[exp(Σ_j c_j Ṽ^{(n)}_{t_j})]` for Gaussian marks, from the Poisson
/// exponential formula with the inner `v`-integral in closed form.
pub fn prelimit_exp_functional(
    kernel: &KernelSpec,
    coeffs: &[f64],
    times: &[f64],
    law: &MarkLaw,
    pre_zero: PreZero,
) -> Result<f64> {
    Ok(prelimit_log_exp_functional(kernel, coeffs, times, law, pre_zero)?.exp())
}

/// Logarithm of [`prelimit_exp_functional`].
pub fn prelimit_log_exp_functional(
    kernel: &KernelSpec,
    coeffs: &[f64],
    times: &[f64],
    law: &MarkLaw,
    pre_zero: PreZero,
) -> Result<f64> {
    if !law.is_gaussian() {
        return Err(Error::UnsupportedLaw(
            "the exponential functional needs Gaussian volatility marks".into(),
        ));
    }
    if coeffs.len() != times.len() {
        return Err(Error::Contract(
            "one coefficient per time is required".into(),
        ));
    }
    if !times.windows(2).all(|w| w[0] >= w[1]) {
        return Err(Error::Contract(
            "times must be sorted in descending order".into(),
        ));
    }
    if kernel.is_limit() {
        return Err(Error::domain(
            "the exponential functional needs a prelimit kernel",
        ));
    }
    if coeffs.is_empty() || coeffs.iter().all(|c| *c == 0.0) || law.sigma_v() == 0.0 {
        return Ok(0.0);
    }
    let n = kernel.n() as f64;
    let s2 = law.sigma_v() * law.sigma_v();
    let d = kernel.shift();
    let q = TanhSinh::with_tol(1e-11, 1e-11);
    let t1 = times[0];

    let post = |s: f64| {
        let a: f64 = coeffs
            .iter()
            .zip(times)
            .map(|(c, t)| c * kernel.value(t - s))
            .sum();
        n * (s2 * a * a / (2.0 * n)).exp_m1()
    };
    let mut pts = Vec::with_capacity(2 * times.len());
    for &t in times {
        pts.push(t);
        pts.push(t - d);
    }
    let mut total = q
        .integrate_pieces(&post, 0.0, t1, &pts)
        .require("post-zero exponent")?;

    let pre = |x: f64| {
        let b: f64 = coeffs
            .iter()
            .zip(times)
            .map(|(c, t)| c * kernel.increment(x, *t))
            .sum();
        n * (s2 * b * b / (2.0 * n)).exp_m1()
    };
    let mut pre_pts = vec![d];
    pre_pts.extend(times.iter().map(|t| d - t).filter(|x| *x > 0.0));
    total += match pre_zero {
        PreZero::None => 0.0,
        PreZero::Truncated(s) => q
            .integrate_pieces(&pre, 0.0, s, &pre_pts)
            .require("pre-zero exponent")?,
        PreZero::Full => q
            .integrate_to_infinity(&pre, 0.0, 10.0 * t1.max(1e-3), &pre_pts)
            .require("pre-zero exponent")?,
    };
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::covariance_cn_with;
    use crate::rng::SeedStream;
    use approx::assert_relative_eq;

    fn mark(u: f64, v: f64) -> Mark {
        Mark { u, v }
    }

    #[test]
    fn single_event_hand_value() {
        let k = KernelSpec::benchmark(0.15, 10).unwrap();
        let ev = EventStream::from_parts(
            vec![0.5],
            vec![mark(0.0, 1.0)],
            vec![],
            vec![],
            10.0,
            1.0,
            0.0,
        )
        .unwrap();
        let v = ev.log_vol(&k, &[1.0]).unwrap()[0];
        assert_relative_eq!(v, 0.6f64.powf(-0.35) / 10f64.sqrt(), max_relative = 1e-14);
        assert!((v - 0.378135).abs() < 1e-6);
    }

    #[test]
    fn empty_stream_and_zero_horizon() {
        let law = MarkLaw::gaussian(1.0, 1.0, 0.0).unwrap();
        let ev = simulate_events(10, 0.0, 0.0, &law, &mut SeedStream::new(1).rng(0)).unwrap();
        assert!(ev.arrivals().is_empty());
        let k = KernelSpec::benchmark(0.2, 10).unwrap();
        assert_eq!(ev.log_vol(&k, &[0.0, 0.5]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(ev.terminal_price(&k).unwrap(), 0.0);
    }

    #[test]
    fn rate_mismatch_is_config_error() {
        let law = MarkLaw::gaussian(1.0, 1.0, 0.0).unwrap();
        let ev = simulate_events(10, 1.0, 0.0, &law, &mut SeedStream::new(1).rng(0)).unwrap();
        let k = KernelSpec::benchmark(0.2, 11).unwrap();
        assert!(matches!(ev.log_vol(&k, &[1.0]), Err(Error::Config(_))));
        let lim = KernelSpec::limit(0.2).unwrap();
        assert!(matches!(ev.terminal_price(&lim), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_streams() {
        let law = MarkLaw::gaussian(1.0, 0.3, -0.5).unwrap();
        let a = simulate_events(20, 1.0, 2.0, &law, &mut SeedStream::new(8).rng(3)).unwrap();
        let b = simulate_events(20, 1.0, 2.0, &law, &mut SeedStream::new(8).rng(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.pre_arrivals().windows(2).all(|w| w[0] > w[1]));
        assert!(a.pre_arrivals().iter().all(|t| *t >= -2.0 && *t <= 0.0));
    }

    #[test]
    fn mean_count_is_nt() {
        let law = MarkLaw::gaussian(1.0, 0.3, 0.0).unwrap();
        let seeds = SeedStream::new(11);
        let counts: Vec<f64> = (0..100_000)
            .map(|j| {
                simulate_events(10, 1.0, 0.0, &law, &mut seeds.rng(j))
                    .unwrap()
                    .arrivals()
                    .len() as f64
            })
            .collect();
        let est = crate::stats::mean_estimate(&counts);
        assert!((est.mean - 10.0).abs() <= 4.0 * est.standard_error);
    }

    #[test]
    fn zero_price_marks_give_zero_price() {
        let k = KernelSpec::benchmark(0.2, 5).unwrap();
        let ev = EventStream::from_parts(
            vec![0.1, 0.4, 0.9],
            vec![mark(0.0, 1.0), mark(0.0, -2.0), mark(0.0, 0.5)],
            vec![],
            vec![],
            5.0,
            1.0,
            0.0,
        )
        .unwrap();
        let p = ev.price_path(&k, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(p.log_price, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn inserting_an_event_leaves_earlier_state_unchanged() {
        let k = KernelSpec::optimized(0.15, 7).unwrap();
        let base = EventStream::from_parts(
            vec![0.1, 0.3, 0.8],
            vec![mark(1.0, 0.5), mark(-0.4, -1.0), mark(0.7, 0.2)],
            vec![-0.2],
            vec![mark(0.3, 0.9)],
            7.0,
            1.0,
            1.0,
        )
        .unwrap();
        let more = EventStream::from_parts(
            vec![0.1, 0.3, 0.5, 0.8],
            vec![
                mark(1.0, 0.5),
                mark(-0.4, -1.0),
                mark(2.0, 3.0),
                mark(0.7, 0.2),
            ],
            vec![-0.2],
            vec![mark(0.3, 0.9)],
            7.0,
            1.0,
            1.0,
        )
        .unwrap();
        let grid = [0.0, 0.2, 0.45, 0.5, 0.6, 1.0];
        let a = base.price_path(&k, &grid).unwrap();
        let b = more.price_path(&k, &grid).unwrap();
        assert_eq!(&a.left_limits_at_jumps[..2], &b.left_limits_at_jumps[..2]);
        assert_eq!(&a.log_price[..3], &b.log_price[..3]);
        assert_eq!(&a.log_vol[..3], &b.log_vol[..3]);
        // Left limit at the inserted arrival excludes its own volatility jump.
        let own = more.left_limits(&k).unwrap()[2];
        let right = more.log_vol(&k, &[0.5]).unwrap()[0];
        assert_relative_eq!(
            right - own,
            k.value(0.0) * 3.0 / 7f64.sqrt(),
            max_relative = 1e-12
        );
        assert_ne!(a.log_price[4], b.log_price[4]);
        // Pre-zero events enter the initial volatility.
        assert!(a.log_vol[0] == 0.0);
        let v_pre = base.log_vol(&k, &[0.05]).unwrap()[0];
        let expect = (k.value(0.25) - k.value(0.2)) * 0.9 / 7f64.sqrt();
        assert_relative_eq!(v_pre, expect, max_relative = 1e-12);
    }

    #[test]
    fn exp_functional_trivial_cases() {
        let k = KernelSpec::benchmark(0.2, 10).unwrap();
        let law = MarkLaw::gaussian(1.0, 0.4, 0.0).unwrap();
        assert_eq!(
            prelimit_exp_functional(&k, &[0.0, 0.0], &[1.0, 0.5], &law, PreZero::Full).unwrap(),
            1.0
        );
        let flat = MarkLaw::gaussian(1.0, 0.0, 0.0).unwrap();
        assert_eq!(
            prelimit_exp_functional(&k, &[2.0], &[1.0], &flat, PreZero::Full).unwrap(),
            1.0
        );
        let sign = MarkLaw::scaled_sign(1.0, 0.4, 0.0).unwrap();
        assert!(matches!(
            prelimit_exp_functional(&k, &[2.0], &[1.0], &sign, PreZero::None),
            Err(Error::UnsupportedLaw(_))
        ));
    }

    #[test]
    fn exp_functional_approaches_gaussian_mgf() {
        // log E[e^{2V_t}] → 2 σ_v^2 C_n(t,t) with a gap that shrinks in n.
        let law = MarkLaw::gaussian(1.0, 0.5, 0.0).unwrap();
        let mut prev = f64::INFINITY;
        for n in [16u64, 64, 256, 1024] {
            let k = KernelSpec::optimized(0.2, n).unwrap();
            let lg = prelimit_log_exp_functional(&k, &[2.0], &[1.0], &law, PreZero::None).unwrap();
            let c = covariance_cn_with(&k, 1.0, 1.0, PreZero::None).unwrap();
            let gap = (lg - 2.0 * 0.25 * c).abs();
            assert!(gap > 0.0 && gap < prev, "n = {n}: gap {gap} prev {prev}");
            prev = gap;
        }
    }

    #[test]
    fn exp_functional_matches_monte_carlo() {
        let k = KernelSpec::benchmark(0.25, 20).unwrap();
        let law = MarkLaw::gaussian(1.0, 0.6, 0.0).unwrap();
        let times = [1.0, 0.4];
        let coeffs = [1.0, -0.5];
        let exact =
            prelimit_exp_functional(&k, &coeffs, &times, &law, PreZero::Truncated(1.0)).unwrap();
        let seeds = SeedStream::new(21);
        let xs: Vec<f64> = (0..200_000)
            .map(|j| {
                let ev = simulate_events(20, 1.0, 1.0, &law, &mut seeds.rng(j)).unwrap();
                let v = ev.log_vol(&k, &times).unwrap();
                (coeffs[0] * v[0] + coeffs[1] * v[1]).exp()
            })
            .collect();
        let est = crate::stats::mean_estimate(&xs);
        assert!(
            (est.mean - exact).abs() <= 4.0 * est.standard_error,
            "{} vs {exact}",
            est.mean
        );
    }
}
