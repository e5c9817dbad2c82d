//! Goodness-of-fit tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against `cdf`.
///
/// The p-value uses the limiting distribution with Stephens' small-sample
/// correction `(sqrt n + 0.12 + 0.11 / sqrt n) D`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    TestResult {
        statistic: d,
        p_value: kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d),
    }
}

/// KS test against the standard normal.
pub fn ks_normal(samples: &[f64]) -> TestResult {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    ks_test(samples, |x| normal.cdf(x))
}

/// Pearson chi-square test of observed counts against probabilities.
///
/// Cells with zero expected count must have zero observations and are
/// dropped from the statistic and the degrees of freedom.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> TestResult {
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * total as f64;
        if e > 0.0 {
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        } else if c > 0 {
            return TestResult {
                statistic: f64::INFINITY,
                p_value: 0.0,
            };
        }
    }
    if cells < 2 {
        return TestResult {
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let dist = ChiSquared::new((cells - 1) as f64).expect("positive degrees of freedom");
    TestResult {
        statistic: stat,
        p_value: 1.0 - dist.cdf(stat),
    }
}
