//! Small statistical helpers shared by the simulators and the experiment
//! harness: binomial intervals, the standard normal CDF, moment summaries
//! and the Kolmogorov–Smirnov distance.

/// 95% two-sided normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Φ, the standard normal CDF.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// First four standardized sample moments.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SampleMoments {
    pub count: u64,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

pub fn sample_moments(values: &[f64]) -> SampleMoments {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    SampleMoments {
        count: values.len() as u64,
        mean,
        variance: if values.len() > 1 {
            m2 * n / (n - 1.0)
        } else {
            0.0
        },
        skewness: if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 },
        excess_kurtosis: if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 },
    }
}

/// Kolmogorov–Smirnov distance between the sample and Φ.
pub fn ks_distance_to_normal(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN samples"));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = standard_normal_cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Deterministic nearest-rank quantile of a pre-sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_values() {
        assert!((standard_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((standard_normal_cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-12);
        assert!((standard_normal_cdf(-3.0) - 1.349_898_031_630_095e-3).abs() < 1e-15);
    }

    #[test]
    fn wilson_is_sane() {
        let (lo, hi) = wilson_interval(50, 100, Z_95);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(hi - lo < 0.25);
        let (lo, hi) = wilson_interval(0, 100, Z_95);
        assert!(lo < 1e-12);
        assert!(hi < 0.06);
    }

    #[test]
    fn moments_of_a_known_sample() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let m = sample_moments(&v);
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.skewness, 0.0);
    }

    #[test]
    fn ks_of_exact_normal_quantiles_is_small() {
        // inverse-CDF grid: the empirical CDF straddles Φ by 1/(2n)
        let n = 1000;
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let p = (i as f64 + 0.5) / n as f64;
                // crude bisection inverse of Φ; fine for a test fixture
                let (mut lo, mut hi) = (-10.0, 10.0);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if standard_normal_cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        let d = ks_distance_to_normal(&values);
        assert!(d <= 0.5 / n as f64 + 1e-9, "d = {d}");
    }
}
