//! Small statistics toolkit: moments with standard errors, pairwise
//! reduction, and goodness-of-fit tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub count: usize,
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean_estimate(xs: &[f64]) -> MeanEstimate {
    let n = xs.len();
    if n == 0 {
        return MeanEstimate {
            mean: f64::NAN,
            standard_error: f64::NAN,
            count: 0,
        };
    }
    let mean = pairwise_sum(xs) / n as f64;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = if n > 1 {
        pairwise_sum(&dev) / (n - 1) as f64
    } else {
        0.0
    };
    MeanEstimate {
        mean,
        standard_error: (var / n as f64).sqrt(),
        count: n,
    }
}

/// Sample variance together with a delta-method standard error
/// `sqrt((m4 - s^4)/M)`.
pub fn variance_estimate(xs: &[f64]) -> MeanEstimate {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let q: Vec<f64> = sq.iter().map(|s| s * s).collect();
    let m2 = pairwise_sum(&sq) / n;
    let m4 = pairwise_sum(&q) / n;
    MeanEstimate {
        mean: m2 * n / (n - 1.0),
        standard_error: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        count: xs.len(),
    }
}

/// One-sample Kolmogorov–Smirnov test; returns `(D, p-value)` using the
/// asymptotic Kolmogorov distribution.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    (d, kolmogorov_survival(lambda))
}

fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Chi-square test that block means scatter as their reported standard
/// errors predict. Returns the two-sided p-value.
pub fn block_variance_test(block_means: &[f64], block_se: f64) -> f64 {
    let k = block_means.len();
    let mean = block_means.iter().sum::<f64>() / k as f64;
    let stat: f64 = block_means
        .iter()
        .map(|m| ((m - mean) / block_se).powi(2))
        .sum();
    let dist = ChiSquared::new((k - 1) as f64).expect("k >= 2");
    let c = dist.cdf(stat);
    2.0 * c.min(1.0 - c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&xs), 0.5 * 999.0 * 1000.0 / 2.0);
    }

    #[test]
    fn ks_rejects_shifted_uniform() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let (_, p) = ks_test(&xs, |x| x.clamp(0.0, 1.0));
        assert!(p > 0.99);
        let (_, p) = ks_test(&xs, |x| (x - 0.1).clamp(0.0, 1.0));
        assert!(p < 1e-6);
    }

    #[test]
    fn kolmogorov_known_quantile() {
        // P(K > 1.628) ≈ 0.01
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 2e-4);
    }
}
