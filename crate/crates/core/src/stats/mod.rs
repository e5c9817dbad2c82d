//! Estimators and checks built on walk samples, corrector output and spectra.

pub mod heat;
pub mod ks;

pub use heat::{heat_kernel, horizon_limit, isoperimetry, HeatKernelReport, HeatKernelRow, Isoperimetry};
pub use ks::{chi_square, ks_normal, ks_test, TestResult};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{StatsError, WalkError};
use crate::field::DriftField;
use crate::rng;
use crate::spectral::{covariance_spectrum, hminus_functional, rwrs_finite_time};
use crate::walker::{rwrs_matrix, Estimate};

/// Fewest endpoints accepted per time point.
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsdRow {
    pub t: f64,
    pub msd_over_t: f64,
    pub se: f64,
    pub samples: usize,
}

impl MsdRow {
    /// `msd/T < 2d - k se`
    pub fn below(&self, d: usize, k: f64) -> bool {
        self.msd_over_t < 2.0 * d as f64 - k * self.se
    }

    /// `msd/T > 2d + 8 tr C~ + k se`
    pub fn above(&self, d: usize, trace_ctilde: f64, k: f64) -> bool {
        self.msd_over_t > 2.0 * d as f64 + 8.0 * trace_ctilde + k * self.se
    }
}

fn need(samples: usize) -> Result<(), StatsError> {
    if samples < MIN_SAMPLES {
        Err(StatsError::InsufficientSamples {
            need: MIN_SAMPLES,
            got: samples,
        })
    } else {
        Ok(())
    }
}

/// `E|X(T)|^2 / T` with its standard error.
pub fn msd(endpoints: &[Vec<i64>], t: f64) -> Result<MsdRow, StatsError> {
    need(endpoints.len())?;
    let xs: Vec<f64> = endpoints
        .iter()
        .map(|x| x.iter().map(|&c| (c * c) as f64).sum::<f64>() / t)
        .collect();
    let e = Estimate::from_samples(&xs);
    Ok(MsdRow {
        t,
        msd_over_t: e.value,
        se: e.se,
        samples: e.samples,
    })
}

pub fn msd_curve(rows: &[(f64, Vec<Vec<i64>>)]) -> Result<Vec<MsdRow>, StatsError> {
    rows.iter().map(|(t, e)| msd(e, *t)).collect()
}

/// Every successive increase exceeds `k` combined standard errors.
pub fn increases_beyond(rows: &[MsdRow], k: f64) -> bool {
    rows.windows(2).all(|w| {
        let se = w[0].se.hypot(w[1].se);
        w[1].msd_over_t - w[0].msd_over_t > k * se
    })
}

/// Sample covariance of vectors and the standard error of each entry.
pub fn covariance_with_se(xs: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = xs.len() as f64;
    let d = xs.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..d)
        .map(|i| xs.iter().map(|x| x[i]).sum::<f64>() / n)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    let mut se = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let prods: Vec<f64> = xs
                .iter()
                .map(|x| (x[i] - mean[i]) * (x[j] - mean[j]))
                .collect();
            let e = Estimate::from_samples(&prods);
            cov[i][j] = e.value * n / (n - 1.0);
            se[i][j] = e.se;
        }
    }
    (mean, cov, se)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sigma2Estimate {
    pub t: f64,
    pub samples: usize,
    /// Mean of `X(T) / sqrt T`.
    pub mean: Vec<f64>,
    /// Covariance of `X(T) / sqrt T`.
    pub sigma2: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
    /// KS test of `X_i(T) / sqrt(T σ^2_ii)` against the standard normal.
    pub ks: Vec<TestResult>,
}

impl Sigma2Estimate {
    pub fn max_se(&self) -> f64 {
        self.se.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Seed offset for the KS jitter, kept apart from the walker streams.
const JITTER_STREAM: u64 = 0x6a69_7474_6572_6b73;

/// Endpoint covariance and per-component normality tests.
///
/// Integer displacements are spread by an independent uniform on
/// `(-1/2, 1/2)` before the KS test, so that the lattice does not show up as
/// atoms in the empirical distribution. The jitter of sample `s` depends only
/// on `(jitter_seed, s)` and never reuses a walker stream, even when
/// `jitter_seed` equals the walk seed.
pub fn estimate_sigma2(
    endpoints: &[Vec<i64>],
    t: f64,
    jitter_seed: u64,
) -> Result<Sigma2Estimate, StatsError> {
    need(endpoints.len())?;
    let scale = t.sqrt().recip();
    let xs: Vec<Vec<f64>> = endpoints
        .iter()
        .map(|x| x.iter().map(|&c| c as f64 * scale).collect())
        .collect();
    let (mean, sigma2, se) = covariance_with_se(&xs);
    let d = sigma2.len();
    let jittered: Vec<Vec<f64>> = endpoints
        .iter()
        .enumerate()
        .map(|(s, x)| {
            let mut r = rng::stream(rng::derive_seed(jitter_seed, JITTER_STREAM), s as u64);
            x.iter()
                .map(|&c| c as f64 + r.random::<f64>() - 0.5)
                .collect()
        })
        .collect();
    let ks = (0..d)
        .map(|i| {
            let norm = (t * sigma2[i][i]).sqrt().recip();
            let w: Vec<f64> = jittered.iter().map(|x| x[i] * norm).collect();
            ks_normal(&w)
        })
        .collect();
    Ok(Sigma2Estimate {
        t,
        samples: endpoints.len(),
        mean,
        sigma2,
        se,
        ks,
    })
}

fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let d = m.len();
    DMatrix::from_fn(d, d, |i, j| 0.5 * (m[i][j] + m[j][i]))
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Eigenvalue margins of `σ²` against the diffusive bounds.
///
/// Per coordinate the martingale part contributes exactly `2`, so the
/// matrix bounds are `2 I <= σ² <= 2 I + 8 C~`; summed over coordinates they
/// give `2d <= tr σ² <= 2d + 8 tr C~`. The `2d I` matrix margins are
/// reported alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// `lambda_min(σ² - 2I)`
    pub lower_margin: f64,
    /// `lambda_min(2I + 8C~ - σ²)`
    pub upper_margin: f64,
    /// `tr σ² - 2d`
    pub trace_lower_margin: f64,
    /// `2d + 8 tr C~ - tr σ²`
    pub trace_upper_margin: f64,
    /// `lambda_min(σ² - 2d I)`
    pub lower_margin_2d: f64,
    /// `lambda_min(2d I + 8C~ - σ²)`
    pub upper_margin_2d: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn bound_check(sigma2: &[Vec<f64>], ctilde: &[Vec<f64>], tolerance: f64) -> BoundCheck {
    let d = sigma2.len();
    let df = d as f64;
    let shifted = |c: f64, s_sign: f64, c_weight: f64| -> Vec<Vec<f64>> {
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let id = if i == j { c } else { 0.0 };
                        s_sign * sigma2[i][j] + id + c_weight * ctilde[i][j]
                    })
                    .collect()
            })
            .collect()
    };
    let tr_s: f64 = (0..d).map(|i| sigma2[i][i]).sum();
    let tr_c: f64 = (0..d).map(|i| ctilde[i][i]).sum();
    let lower_margin = min_eigenvalue(&shifted(-2.0, 1.0, 0.0));
    let upper_margin = min_eigenvalue(&shifted(2.0, -1.0, 8.0));
    let trace_lower_margin = tr_s - 2.0 * df;
    let trace_upper_margin = 2.0 * df + 8.0 * tr_c - tr_s;
    BoundCheck {
        lower_margin,
        upper_margin,
        trace_lower_margin,
        trace_upper_margin,
        lower_margin_2d: min_eigenvalue(&shifted(-2.0 * df, 1.0, 0.0)),
        upper_margin_2d: min_eigenvalue(&shifted(2.0 * df, -1.0, 8.0)),
        tolerance,
        passed: lower_margin >= -tolerance
            && upper_margin >= -tolerance
            && trace_lower_margin >= -tolerance
            && trace_upper_margin >= -tolerance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuannealedRow {
    pub function: String,
    pub component: usize,
    /// Gaussian reference value `E F(W)`, `W ~ N(0, σ²)`.
    pub gaussian: f64,
    /// Mean over environments of `|mean_env F(X/sqrt T) - E F(W)|`.
    pub deviation: f64,
    pub se: f64,
}

/// Environment-averaged deviation of per-environment test-function means
/// from their Gaussian values, for `F = cos(w_i)` and `F = 1[w_i <= 0]`
/// (half weight on `w_i = 0`).
pub fn quannealed(
    per_env: &[Vec<Vec<i64>>],
    t: f64,
    sigma2: &[Vec<f64>],
) -> Vec<QuannealedRow> {
    let d = sigma2.len();
    let scale = t.sqrt().recip();
    let tests: [(&str, fn(f64) -> f64, fn(f64) -> f64); 2] = [
        ("cos", f64::cos, |s2| (-0.5 * s2).exp()),
        (
            "nonpositive",
            |w| {
                if w < 0.0 {
                    1.0
                } else if w == 0.0 {
                    0.5
                } else {
                    0.0
                }
            },
            |_| 0.5,
        ),
    ];
    let mut rows = Vec::new();
    for (name, f, gauss) in tests {
        for i in 0..d {
            let g = gauss(sigma2[i][i]);
            let devs: Vec<f64> = per_env
                .iter()
                .map(|walks| {
                    let m = walks.iter().map(|x| f(x[i] as f64 * scale)).sum::<f64>()
                        / walks.len() as f64;
                    (m - g).abs()
                })
                .collect();
            let e = Estimate::from_samples(&devs);
            rows.push(QuannealedRow {
                function: name.to_string(),
                component: i,
                gaussian: g,
                deviation: e.value,
                se: e.se,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwrsRow {
    pub t: f64,
    pub estimate: f64,
    pub se: f64,
    /// Exact finite-horizon value from the spectrum.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwrsConsistency {
    /// `tr C~`
    pub target: f64,
    pub rows: Vec<RwrsRow>,
    /// Final estimate within 4 SE of `tr C~`.
    pub final_within: bool,
    /// Distance to the target does not grow beyond noise along the sequence.
    pub trend_ok: bool,
    pub passed: bool,
}

/// Monte Carlo random-walk-in-random-scenery functional against `tr C~`.
pub fn rwrs_consistency(
    v: &DriftField,
    times: &[f64],
    samples: usize,
    seed: u64,
) -> Result<RwrsConsistency, WalkError> {
    let spec = covariance_spectrum(std::slice::from_ref(v))
        .map_err(|e| WalkError::Config(e.to_string()))?;
    let target = hminus_functional(&spec).trace;
    let mut rows = Vec::with_capacity(times.len());
    for (c, &t) in times.iter().enumerate() {
        let est = rwrs_matrix(v, t, samples, rng::derive_seed(seed, c as u64))?.trace;
        let exp = rwrs_finite_time(&spec, t);
        rows.push(RwrsRow {
            t,
            estimate: est.value,
            se: est.se,
            expected: (0..exp.len()).map(|i| exp[i][i]).sum(),
        });
    }
    let last = rows.last();
    let final_within = last.is_some_and(|r| (r.estimate - target).abs() <= 4.0 * r.se);
    let trend_ok = match (rows.first(), last) {
        (Some(a), Some(b)) => {
            (b.estimate - target).abs() <= (a.estimate - target).abs() + 4.0 * a.se.hypot(b.se)
        }
        _ => false,
    };
    Ok(RwrsConsistency {
        target,
        rows,
        final_within,
        trend_ok,
        passed: final_within && trend_ok,
    })
}

/// Summary written by the analysis step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusivityReport {
    pub msd_curve: Vec<MsdRow>,
    pub sigma2_hat: Option<Sigma2Estimate>,
    pub sigma2_exact: Option<Vec<Vec<f64>>>,
    pub ctilde: Option<Vec<Vec<f64>>>,
    pub bound_check: Option<BoundCheck>,
    pub clt: Vec<TestResult>,
    pub quannealed: Vec<QuannealedRow>,
    /// Successive MSD/T values rise beyond 4 SE; `None` with one time point.
    pub msd_trend_increasing: Option<bool>,
    pub notes: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_samples_is_an_error() {
        let e = vec![vec![0i64, 0]; 10];
        assert!(matches!(
            msd(&e, 1.0),
            Err(StatsError::InsufficientSamples { need: 1000, got: 10 })
        ));
    }

    #[test]
    fn bounds_for_ssrw() {
        let s2 = vec![vec![2.0, 0.0], vec![0.0, 2.0]];
        let c = vec![vec![0.0; 2]; 2];
        let b = bound_check(&s2, &c, 1e-9);
        assert!(b.passed);
        assert_eq!(b.lower_margin, 0.0);
        assert_eq!(b.lower_margin_2d, -2.0);
        assert_eq!(b.trace_lower_margin, 0.0);
    }

    #[test]
    fn covariance_of_known_points() {
        let xs = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let (mean, cov, _) = covariance_with_se(&xs);
        assert_eq!(mean, vec![0.0, 0.0]);
        assert!((cov[0][0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(cov[0][1], 0.0);
    }

    #[test]
    fn increase_test_uses_combined_se() {
        let r = |t, m, se| MsdRow { t, msd_over_t: m, se, samples: 1000 };
        assert!(increases_beyond(&[r(1.0, 4.0, 0.1), r(2.0, 5.0, 0.1)], 4.0));
        assert!(!increases_beyond(&[r(1.0, 4.0, 0.1), r(2.0, 4.5, 0.1)], 4.0));
    }
}
