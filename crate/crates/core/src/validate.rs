//! Checks of the standing assumptions on a drift field.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::exact::ExactSum;
use crate::field::DriftField;
use crate::lattice::Direction;

/// Per-site tolerance used for floating-point pipelines.
pub const FLOAT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Antisymmetry,
    Divergence,
    Bounded,
    ZeroMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: CheckKind,
    pub passed: bool,
    /// Largest violation found (0 when exact).
    pub residual: f64,
    /// Site of the worst residual, if any residual is nonzero.
    pub site: Option<Vec<usize>>,
    /// Axis for per-component checks (zero mean, bounded).
    pub axis: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub tolerance: f64,
    pub checks: Vec<CheckResult>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, kind: CheckKind) -> &CheckResult {
        self.checks
            .iter()
            .find(|c| c.check == kind)
            .expect("every check kind is always reported")
    }

    /// True when every residual is exactly zero.
    pub fn exact(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| c.check != CheckKind::Bounded)
            .all(|c| c.residual == 0.0)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let failed: Vec<_> = self.checks.iter().filter(|c| !c.passed).collect();
        if failed.is_empty() {
            return write!(f, "all checks passed");
        }
        for (n, c) in failed.iter().enumerate() {
            if n > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{:?} failed (residual {:e}", c.check, c.residual)?;
            if let Some(site) = &c.site {
                write!(f, " at site {site:?}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

pub fn validate_drift(v: &DriftField) -> ValidationReport {
    validate_drift_with(v, FLOAT_TOL)
}

/// Validates with a per-site tolerance; `0.0` demands exact arithmetic.
pub fn validate_drift_with(v: &DriftField, tol: f64) -> ValidationReport {
    let dims = v.dims();
    let d = dims.d();
    let n = dims.num_sites();

    let mut anti = (0.0f64, None);
    let mut div = (0.0f64, None);
    let mut zero_rates_warned = 0usize;
    for x in 0..n {
        let mut zeros = 0;
        for k in Direction::all(d) {
            let y = dims.neighbor(x, k);
            let r = (v.value(x, k) + v.value(y, k.reverse())).abs();
            if r > anti.0 {
                anti = (r, Some(x));
            }
            if v.rate(x, k) == 0.0 {
                zeros += 1;
            }
        }
        if zeros >= 2 * d - 1 {
            zero_rates_warned += 1;
        }
        // sum over l = ±e_j paired as V_{e_j}(x) - V_{e_j}(x - e_j)
        let r = (0..d)
            .map(|j| v.value(x, Direction::pos(j)) + v.value(x, Direction::neg(j)))
            .sum::<f64>()
            .abs();
        if r > div.0 {
            div = (r, Some(x));
        }
    }

    let mut checks = vec![
        CheckResult {
            check: CheckKind::Antisymmetry,
            passed: anti.0 <= tol,
            residual: anti.0,
            site: anti.1.map(|x| dims.site(x).coords),
            axis: None,
        },
        CheckResult {
            check: CheckKind::Divergence,
            passed: div.0 <= tol,
            residual: div.0,
            site: div.1.map(|x| dims.site(x).coords),
            axis: None,
        },
    ];

    let mut bound = (0.0f64, None, None);
    for axis in 0..d {
        for (x, &val) in v.positive(axis).iter().enumerate() {
            if val.abs() > bound.0 {
                bound = (val.abs(), Some(x), Some(axis));
            }
        }
    }
    let excess = (bound.0 - 1.0).max(0.0);
    checks.push(CheckResult {
        check: CheckKind::Bounded,
        passed: bound.0 <= 1.0,
        residual: excess,
        site: if excess > 0.0 {
            bound.1.map(|x| dims.site(x).coords)
        } else {
            None
        },
        axis: if excess > 0.0 { bound.2 } else { None },
    });

    let mut mean = (0.0f64, None);
    for axis in 0..d {
        let mut s = ExactSum::new();
        v.positive(axis).iter().for_each(|&x| s.add(x));
        let r = s.to_f64().abs();
        if r > mean.0 {
            mean = (r, Some(axis));
        }
    }
    checks.push(CheckResult {
        check: CheckKind::ZeroMean,
        passed: mean.0 <= tol * n as f64,
        residual: mean.0,
        site: None,
        axis: mean.1,
    });

    let mut warnings = Vec::new();
    if zero_rates_warned > 0 {
        warnings.push(format!(
            "{zero_rates_warned} site(s) with at least 2d-1 zero jump rates; chain may be reducible"
        ));
    }
    ValidationReport {
        tolerance: tol,
        checks,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeDims;

    #[test]
    fn zero_field_passes_exactly() {
        let v = DriftField::zero(LatticeDims::new(2, 4).unwrap());
        let r = validate_drift_with(&v, 0.0);
        assert!(r.passed());
        assert!(r.exact());
        assert!(r.checks.iter().all(|c| c.residual == 0.0));
    }

    #[test]
    fn single_edge_violates_divergence_at_origin() {
        let mut v = DriftField::zero(LatticeDims::new(2, 4).unwrap());
        v.positive_mut(0)[0] = 0.5;
        let r = validate_drift(&v);
        let div = r.get(CheckKind::Divergence);
        assert!(!div.passed);
        assert_eq!(div.residual, 0.5);
        // both endpoints of the edge carry residual 0.5; the first is the origin
        assert_eq!(div.site.as_deref(), Some(&[0usize, 0][..]));
        assert!(!r.get(CheckKind::ZeroMean).passed);
        assert!(r.get(CheckKind::Antisymmetry).passed);
    }

    #[test]
    fn out_of_range_is_reported() {
        let mut v = DriftField::zero(LatticeDims::new(2, 4).unwrap());
        v.positive_mut(1)[5] = 1.5;
        let r = validate_drift(&v);
        let b = r.get(CheckKind::Bounded);
        assert!(!b.passed);
        assert_eq!(b.axis, Some(1));
        assert_eq!(b.site.as_deref(), Some(&[1usize, 1][..]));
    }
}
