//! Covariance spectra of the local drift `φ` and of the edge field `V`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::{FftPlan, FrequencyTables};
use crate::error::EnvError;
use crate::field::DriftField;
use crate::lattice::{Direction, LatticeDims};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMode {
    /// One realization; spatial averaging over the torus shifts.
    Single,
    /// Average over independent realizations.
    Ensemble,
}

/// `Ĉ_{ij}(p) = L^-d conj(Φ^_i(p)) Φ^_j(p)`, averaged over realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpectrum {
    dims: LatticeDims,
    /// `chat[p * d * d + i * d + j]`
    chat: Vec<Complex64>,
    mode: SpectrumMode,
    realizations: usize,
}

impl CovarianceSpectrum {
    pub fn dims(&self) -> LatticeDims {
        self.dims
    }

    pub fn mode(&self) -> SpectrumMode {
        self.mode
    }

    pub fn realizations(&self) -> usize {
        self.realizations
    }

    #[inline]
    pub fn at(&self, p: usize, i: usize, j: usize) -> Complex64 {
        let d = self.dims.d();
        self.chat[p * d * d + i * d + j]
    }

    /// The `d x d` matrix at frequency index `p`.
    pub fn matrix(&self, p: usize) -> DMatrix<Complex64> {
        let d = self.dims.d();
        DMatrix::from_fn(d, d, |i, j| self.at(p, i, j))
    }

    /// Largest `|Ĉ_{ij}(0)|`.
    pub fn zero_mode(&self) -> f64 {
        let d = self.dims.d();
        self.chat[..d * d].iter().fold(0.0f64, |m, c| m.max(c.norm()))
    }

    /// Worst Hermitian defect `|Ĉ - Ĉ^*|` over all frequencies.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.dims.d();
        let mut worst = 0.0f64;
        for p in 0..self.dims.num_sites() {
            for i in 0..d {
                for j in 0..d {
                    worst = worst.max((self.at(p, i, j) - self.at(p, j, i).conj()).norm());
                }
            }
        }
        worst
    }

    /// Smallest `lambda_min(Ĉ(p)) / max(trace Ĉ(p), tiny)` over frequencies.
    pub fn min_relative_eigenvalue(&self) -> f64 {
        let mut worst = 0.0f64;
        for p in 0..self.dims.num_sites() {
            let m = self.matrix(p);
            let tr: f64 = (0..self.dims.d()).map(|i| m[(i, i)].re).sum();
            if tr <= 0.0 {
                continue;
            }
            let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
            let ev = herm.symmetric_eigenvalues();
            let lo = ev.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            worst = worst.min(lo / tr);
        }
        worst
    }
}

fn single_spectrum(v: &DriftField, plan: &FftPlan) -> Vec<Complex64> {
    let dims = v.dims();
    let d = dims.d();
    let n = dims.num_sites();
    let scale = 1.0 / n as f64;
    let phi: Vec<Vec<Complex64>> = (0..d)
        .map(|i| plan.forward_real(v.phi(i).values()))
        .collect();
    let mut chat = vec![Complex64::new(0.0, 0.0); n * d * d];
    for p in 0..n {
        for i in 0..d {
            let a = phi[i][p].conj();
            for j in 0..d {
                chat[p * d * d + i * d + j] = a * phi[j][p] * scale;
            }
        }
    }
    chat
}

/// Fixed binary-tree sum over `[lo, hi)`; the split never depends on the
/// thread pool, so the rounding pattern is reproducible.
fn tree_sum(envs: &[DriftField], plan: &FftPlan, lo: usize, hi: usize) -> Vec<Complex64> {
    if hi - lo == 1 {
        return single_spectrum(&envs[lo], plan);
    }
    let mid = lo + (hi - lo) / 2;
    let (mut a, b) = rayon::join(
        || tree_sum(envs, plan, lo, mid),
        || tree_sum(envs, plan, mid, hi),
    );
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    a
}

/// Covariance spectrum of one realization or the mean over several.
pub fn covariance_spectrum(envs: &[DriftField]) -> Result<CovarianceSpectrum, EnvError> {
    let first = envs
        .first()
        .ok_or_else(|| EnvError::DimsMismatch("at least one environment".into(), "none".into()))?;
    let dims = first.dims();
    if let Some(bad) = envs.iter().find(|v| v.dims() != dims) {
        return Err(EnvError::DimsMismatch(
            format!("{dims:?}"),
            format!("{:?}", bad.dims()),
        ));
    }
    let plan = FftPlan::new(dims);
    let mut chat = tree_sum(envs, &plan, 0, envs.len());
    let r = envs.len();
    if r > 1 {
        let inv = 1.0 / r as f64;
        chat.iter_mut().for_each(|c| *c *= inv);
    }
    Ok(CovarianceSpectrum {
        dims,
        chat,
        mode: if r > 1 {
            SpectrumMode::Ensemble
        } else {
            SpectrumMode::Single
        },
        realizations: r,
    })
}

/// The torus H₋₁ functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HMinus {
    /// `C~_{ij} = L^-d sum_{p != 0} Re Ĉ_{ij}(p) / D^(p)`
    pub ctilde: Vec<Vec<f64>>,
    pub trace: f64,
    /// Largest `|Ĉ_{ij}(0)|`; nonzero means the field carries a net drift.
    pub zero_mode: f64,
    pub warning: Option<String>,
}

impl HMinus {
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.ctilde.len();
        let m = DMatrix::from_fn(d, d, |i, j| self.ctilde[i][j]);
        m.symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

/// Tolerance on `|Ĉ(0)|` before the net-drift warning fires.
pub const ZERO_MODE_TOL: f64 = 1e-10;

/// `C~ = L^-d sum_{p != 0} Ĉ(p) / D^(p)`.
///
/// This is the asymptotic covariance of `T^{-1/2} int_0^T Φ(S_t) dt` for the
/// rate-`2d` simple walk `S` started from the uniform distribution.
pub fn hminus_functional(spec: &CovarianceSpectrum) -> HMinus {
    let dims = spec.dims();
    let d = dims.d();
    let n = dims.num_sites();
    let tables = FrequencyTables::new(dims);
    let mut acc = vec![vec![0.0; d]; d];
    for p in 1..n {
        let w = 1.0 / tables.dhat(p);
        for (i, row) in acc.iter_mut().enumerate() {
            for (j, a) in row.iter_mut().enumerate() {
                *a += spec.at(p, i, j).re * w;
            }
        }
    }
    let scale = 1.0 / n as f64;
    let mut ctilde = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            ctilde[i][j] = 0.5 * (acc[i][j] + acc[j][i]) * scale;
        }
    }
    let trace = (0..d).map(|i| ctilde[i][i]).sum();
    let zero_mode = spec.zero_mode();
    let warning = (zero_mode > ZERO_MODE_TOL).then(|| {
        format!("net drift: |C^(0)| = {zero_mode:e}; the zero mode is excluded from the sum")
    });
    HMinus {
        ctilde,
        trace,
        zero_mode,
        warning,
    }
}

/// `T^-1 E[I_i(T) I_j(T)]` for `I(T) = int_0^T Φ(S_t) dt`, the simple walk
/// started uniformly, at a finite horizon:
/// `L^-d sum_{p != 0} Ĉ(p) 2 (1/a - (1 - e^{-aT}) / (a^2 T))` with `a = 2 D^(p)`.
pub fn rwrs_finite_time(spec: &CovarianceSpectrum, time: f64) -> Vec<Vec<f64>> {
    let dims = spec.dims();
    let d = dims.d();
    let n = dims.num_sites();
    let tables = FrequencyTables::new(dims);
    let mut acc = vec![vec![0.0; d]; d];
    for p in 1..n {
        let a = 2.0 * tables.dhat(p);
        let w = 2.0 * (1.0 / a - (-(a * time)).exp_m1().abs() / (a * a * time));
        for (i, row) in acc.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x += spec.at(p, i, j).re * w;
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let m = 0.5 * (acc[i][j] + acc[j][i]) / n as f64;
            acc[i][j] = m;
            acc[j][i] = m;
        }
    }
    acc
}

/// Residuals of the pointwise identities satisfied by `B^_{k,l}(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IdentityReport {
    /// `B_{k,l} = -e^{ip.k} B_{-k,l} = -e^{-ip.l} B_{k,-l} = e^{ip.(k-l)} B_{-k,-l}`
    pub chat_vector: f64,
    /// `sum_k B_{k,l} = sum_l B_{k,l} = 0`
    pub chat_divfree: f64,
    /// `sum_{k,l} (1 - e^{-ip.k})(1 - e^{ip.l}) B_{k,l} = 0`
    pub equiv0: f64,
    /// `sum_{k,l} k_i l_j B_{k,l}(0) = Ĉ_{ij}(0) = 0`
    pub c_zero: f64,
    /// `Ĉ_{ij} = (1 + e^{-ip_i})(1 + e^{ip_j}) B_{e_i,e_j}`
    pub chat_from_b: f64,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        [
            self.chat_vector,
            self.chat_divfree,
            self.equiv0,
            self.c_zero,
            self.chat_from_b,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// `e^{i p.k}` on the frequency grid.
fn phase(t: &FrequencyTables, p: usize, k: Direction) -> Complex64 {
    let e = t.phase(p, k.axis());
    if k.is_positive() {
        e
    } else {
        e.conj()
    }
}

/// Evaluates the `B^` identities for a single realization.
///
/// `B^_{k,l}(p) = L^-d conj(V^_k(p)) V^_l(p)` with each `V_k` expanded and
/// transformed on its own, so that the identities test the field rather
/// than the storage scheme.
pub fn check_spectral_identities(v: &DriftField) -> IdentityReport {
    let dims = v.dims();
    let d = dims.d();
    let n = dims.num_sites();
    let plan = FftPlan::new(dims);
    let tables = FrequencyTables::new(dims);
    let dirs: Vec<Direction> = Direction::all(d).collect();
    let vhat: Vec<Vec<Complex64>> = dirs
        .iter()
        .map(|&k| plan.forward_real(&v.component(k)))
        .collect();
    let phihat: Vec<Vec<Complex64>> = (0..d)
        .map(|i| plan.forward_real(v.phi(i).values()))
        .collect();
    let scale = 1.0 / n as f64;
    let one = Complex64::new(1.0, 0.0);
    let mut rep = IdentityReport::default();
    let mut b = vec![Complex64::new(0.0, 0.0); dirs.len() * dirs.len()];
    let nd = dirs.len();
    for p in 0..n {
        for (a, _) in dirs.iter().enumerate() {
            let ca = vhat[a][p].conj() * scale;
            for c in 0..nd {
                b[a * nd + c] = ca * vhat[c][p];
            }
        }
        let bb = |k: Direction, l: Direction| b[k.index() * nd + l.index()];
        let mut eq0 = Complex64::new(0.0, 0.0);
        for &k in &dirs {
            let mut row = Complex64::new(0.0, 0.0);
            let mut col = Complex64::new(0.0, 0.0);
            for &l in &dirs {
                let bkl = bb(k, l);
                let ek = phase(&tables, p, k);
                let el = phase(&tables, p, l);
                let r1 = (bkl + ek * bb(k.reverse(), l)).norm();
                let r2 = (bkl + el.conj() * bb(k, l.reverse())).norm();
                let r3 = (bkl - ek * el.conj() * bb(k.reverse(), l.reverse())).norm();
                rep.chat_vector = rep.chat_vector.max(r1).max(r2).max(r3);
                row += bkl;
                col += bb(l, k);
                eq0 += (one - ek.conj()) * (one - el) * bkl;
            }
            rep.chat_divfree = rep.chat_divfree.max(row.norm()).max(col.norm());
        }
        rep.equiv0 = rep.equiv0.max(eq0.norm());
        for i in 0..d {
            for j in 0..d {
                let c = phihat[i][p].conj() * phihat[j][p] * scale;
                let ei = tables.phase(p, i);
                let ej = tables.phase(p, j);
                let pred = (one + ei.conj()) * (one + ej) * bb(Direction::pos(i), Direction::pos(j));
                rep.chat_from_b = rep.chat_from_b.max((c - pred).norm());
                if p == 0 {
                    let mut s = Complex64::new(0.0, 0.0);
                    for &k in &dirs {
                        for &l in &dirs {
                            let w = (k.component(i) * l.component(j)) as f64;
                            if w != 0.0 {
                                s += bb(k, l) * w;
                            }
                        }
                    }
                    rep.c_zero = rep.c_zero.max(s.norm());
                }
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_manhattan, GeneratorKind, GeneratorSpec};

    #[test]
    fn zero_field_has_zero_spectrum() {
        let dims = LatticeDims::new(2, 4).unwrap();
        let s = covariance_spectrum(&[DriftField::zero(dims)]).unwrap();
        assert_eq!(s.zero_mode(), 0.0);
        let h = hminus_functional(&s);
        assert_eq!(h.trace, 0.0);
        assert!(h.warning.is_none());
        assert_eq!(check_spectral_identities(&DriftField::zero(dims)).max(), 0.0);
    }

    #[test]
    fn dims_mismatch_is_reported() {
        let a = DriftField::zero(LatticeDims::new(2, 4).unwrap());
        let b = DriftField::zero(LatticeDims::new(2, 6).unwrap());
        assert!(matches!(
            covariance_spectrum(&[a, b]),
            Err(EnvError::DimsMismatch(..))
        ));
    }

    #[test]
    fn manhattan_diagonal_lives_on_the_axis_plane() {
        let dims = LatticeDims::new(2, 8).unwrap();
        let m = gen_manhattan(&GeneratorSpec::new(GeneratorKind::Manhattan, dims, 3)).unwrap();
        let s = covariance_spectrum(&[m.drift]).unwrap();
        for p in 0..dims.num_sites() {
            if dims.coord(p, 0) != 0 {
                assert!(s.at(p, 0, 0).norm() < 1e-10);
            }
            if dims.coord(p, 1) != 0 {
                assert!(s.at(p, 1, 1).norm() < 1e-10);
            }
        }
        assert!(s.zero_mode() < 1e-10);
        assert!(s.min_relative_eigenvalue() >= -1e-10);
    }

    #[test]
    fn finite_horizon_rwrs_approaches_ctilde() {
        let dims = LatticeDims::new(2, 8).unwrap();
        let v = gen_manhattan(&GeneratorSpec::new(GeneratorKind::Manhattan, dims, 4))
            .unwrap()
            .drift;
        let s = covariance_spectrum(&[v]).unwrap();
        let h = hminus_functional(&s);
        let short = rwrs_finite_time(&s, 1e-6);
        let long = rwrs_finite_time(&s, 1e9);
        for i in 0..2 {
            assert!(short[i][i].abs() < 1e-4);
            for j in 0..2 {
                assert!((long[i][j] - h.ctilde[i][j]).abs() < 1e-6);
            }
        }
    }
}
