//! Exact lazy-walk heat kernel and the isoperimetric identity.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::StatsError;
use crate::exact::ExactSum;
use crate::field::DriftField;
use crate::lattice::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelRow {
    pub n: usize,
    pub sup_p: f64,
    pub sup_times_n_half_d: f64,
    /// `|sum_x P_n(x) - 1|`
    pub mass_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelReport {
    pub d: usize,
    pub side: usize,
    pub start: usize,
    pub rows: Vec<HeatKernelRow>,
    /// Least-squares slope of `log sup P_n` against `log n` over the upper
    /// half of the range, with a 95% interval.
    pub exponent: f64,
    pub exponent_ci: (f64, f64),
}

impl HeatKernelReport {
    pub fn row(&self, n: usize) -> Option<&HeatKernelRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// `max_{n in [from, to]} sup P_n n^{d/2}` divided by its value at `from`.
    pub fn growth(&self, from: usize, to: usize) -> Option<f64> {
        let base = self.row(from)?.sup_times_n_half_d;
        let max = self
            .rows
            .iter()
            .filter(|r| r.n >= from && r.n <= to)
            .map(|r| r.sup_times_n_half_d)
            .fold(f64::NEG_INFINITY, f64::max);
        Some(max / base)
    }

    pub fn max_mass_error(&self) -> f64 {
        self.rows.iter().map(|r| r.mass_error).fold(0.0, f64::max)
    }
}

/// Largest horizon before the kernel can wrap around the torus.
pub fn horizon_limit(side: usize) -> usize {
    (side / 4) * (side / 4)
}

/// `P_n(x) = P(X_n = x | X_0 = start)` for the lazy walk, `n = 0..=n_max`,
/// by repeated exact application of the transition operator.
pub fn heat_kernel(v: &DriftField, start: usize, n_max: usize) -> Result<HeatKernelReport, StatsError> {
    let dims = v.dims();
    let limit = horizon_limit(dims.side());
    if n_max > limit {
        return Err(StatsError::HorizonTooLong { n_max, limit });
    }
    let d = dims.d();
    let n = dims.num_sites();
    let m = 4.0 * d as f64;
    // p(x, x+k) = (1 + V_k(x)) / 4d
    let moves: Vec<(usize, f64)> = (0..n)
        .flat_map(|x| Direction::all(d).map(move |k| (x, k)))
        .map(|(x, k)| (dims.neighbor(x, k), v.rate(x, k) / m))
        .collect();
    let mut p = vec![0.0; n];
    p[start] = 1.0;
    let mut next = vec![0.0; n];
    let half_d = d as f64 / 2.0;
    let mut rows = Vec::with_capacity(n_max + 1);
    for step in 0..=n_max {
        let sup = p.iter().copied().fold(0.0, f64::max);
        let mass: f64 = p.iter().sum();
        rows.push(HeatKernelRow {
            n: step,
            sup_p: sup,
            sup_times_n_half_d: sup * (step as f64).powf(half_d),
            mass_error: (mass - 1.0).abs(),
        });
        if step == n_max {
            break;
        }
        next.iter_mut().zip(&p).for_each(|(a, b)| *a = 0.5 * b);
        for x in 0..n {
            let px = p[x];
            if px == 0.0 {
                continue;
            }
            for (y, w) in &moves[x * 2 * d..(x + 1) * 2 * d] {
                next[*y] += px * w;
            }
        }
        std::mem::swap(&mut p, &mut next);
    }
    let (exponent, exponent_ci) = fit_exponent(&rows);
    Ok(HeatKernelReport {
        d,
        side: dims.side(),
        start,
        rows,
        exponent,
        exponent_ci,
    })
}

fn fit_exponent(rows: &[HeatKernelRow]) -> (f64, (f64, f64)) {
    let n_max = rows.last().map_or(0, |r| r.n);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.n >= (n_max / 2).max(1) && r.sup_p > 0.0)
        .map(|r| ((r.n as f64).ln(), r.sup_p.ln()))
        .collect();
    if pts.len() < 3 {
        return (f64::NAN, (f64::NAN, f64::NAN));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let se = (resid / (k - 2.0) / sxx).sqrt();
    (slope, (slope - 1.96 * se, slope + 1.96 * se))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Isoperimetry {
    /// `Q(S, S^c) = sum_{x in S, y notin S} p(x, y)` for the lazy walk.
    pub q: f64,
    /// Directed edges leaving `S`.
    pub boundary: usize,
    /// `4d Q == |∂S|` in exact rational arithmetic.
    pub exact: bool,
}

/// Ergodic flow out of `S` under the lazy walk and its boundary size.
pub fn isoperimetry(v: &DriftField, in_set: &[bool]) -> Isoperimetry {
    let dims = v.dims();
    let d = dims.d();
    let mut flow = ExactSum::new();
    let mut boundary = 0usize;
    for x in (0..dims.num_sites()).filter(|&x| in_set[x]) {
        for k in Direction::all(d) {
            if !in_set[dims.neighbor(x, k)] {
                flow.add(v.rate(x, k));
                boundary += 1;
            }
        }
    }
    let four_d_q: BigRational = flow.to_rational();
    let exact = four_d_q == BigRational::from_integer(boundary.into());
    let q = four_d_q.to_f64().unwrap_or(f64::NAN) / (4 * d) as f64;
    Isoperimetry { q, boundary, exact }
}
