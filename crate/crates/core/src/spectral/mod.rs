//! Fourier-multiplier operator calculus on the torus.
//!
//! Lattice gradients `∇_k f(x) = f(x+k) - f(x)` act as `m_k(p) = e^{-i p.k} - 1`,
//! the Laplacian `Δ = sum_k ∇_k` as `-2 D^(p)`. Riesz operators
//! `Γ_k = |Δ|^{-1/2} ∇_k` and `|Δ|^{±1/2}` are diagonal in Fourier space.
//! Inverse multipliers vanish at `p = 0`; operators that need them reject
//! inputs with a nonzero mean instead of projecting silently.

mod covariance;
mod fft;

pub use covariance::{
    check_spectral_identities, covariance_spectrum, hminus_functional, rwrs_finite_time,
    CovarianceSpectrum, HMinus, IdentityReport, SpectrumMode, ZERO_MODE_TOL,
};
pub use fft::{angle, dft, idft, idft_complex, FftPlan, FrequencyTables, SpectralField};

use num_complex::Complex64;

use crate::error::EnvError;
use crate::field::{axis_pairs, DriftField, ScalarLatticeField, StreamTensorField};
use crate::lattice::Direction;
use crate::validate::validate_drift;

/// `D^(p) = sum_j (1 - cos p_j)`.
pub fn dhat(p: &[f64]) -> f64 {
    p.iter().map(|pj| 1.0 - pj.cos()).sum()
}

/// Gradient multiplier `m_k(p) = e^{-i p.k} - 1`.
pub fn multiplier_grad(k: Direction, p: &[f64]) -> Complex64 {
    let pk = k.sign() * p[k.axis()];
    Complex64::new(pk.cos() - 1.0, -pk.sin())
}

/// Laplacian multiplier `-2 D^(p)`.
pub fn multiplier_lap(p: &[f64]) -> f64 {
    -2.0 * dhat(p)
}

/// `m_k` evaluated on the torus frequency grid.
#[inline]
pub(crate) fn grad_at(tables: &FrequencyTables, k: Direction, p: usize) -> Complex64 {
    let e = tables.phase(p, k.axis());
    // e^{-i p.k}: conj for +e_a, e for -e_a
    let e = if k.is_positive() { e.conj() } else { e };
    e - 1.0
}

fn require_mean_zero(f: &ScalarLatticeField) -> Result<(), EnvError> {
    if f.is_mean_zero() {
        Ok(())
    } else {
        Err(EnvError::NotMeanZero { sum: f.sum() })
    }
}

/// Applies a real-symmetric multiplier (`m(-p) = conj m(p)`) to a real field.
fn apply_multiplier(
    f: &ScalarLatticeField,
    mult: impl Fn(&FrequencyTables, usize) -> Complex64,
) -> ScalarLatticeField {
    let dims = f.dims();
    let plan = FftPlan::new(dims);
    let tables = FrequencyTables::new(dims);
    let mut coeffs = plan.forward_real(f.values());
    for (p, c) in coeffs.iter_mut().enumerate() {
        *c *= mult(&tables, p);
    }
    ScalarLatticeField::new(dims, plan.inverse_real(coeffs)).expect("shape follows dims")
}

/// Riesz operator `Γ_k f` for mean-zero `f`.
pub fn riesz(k: Direction, f: &ScalarLatticeField) -> Result<ScalarLatticeField, EnvError> {
    require_mean_zero(f)?;
    Ok(apply_multiplier(f, |t, p| {
        let dh = t.dhat(p);
        if p == 0 || dh == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            grad_at(t, k, p) / (2.0 * dh).sqrt()
        }
    }))
}

/// `|Δ|^{-1/2} f` for mean-zero `f`.
pub fn inv_sqrt_lap(f: &ScalarLatticeField) -> Result<ScalarLatticeField, EnvError> {
    require_mean_zero(f)?;
    Ok(apply_multiplier(f, |t, p| {
        let dh = t.dhat(p);
        if p == 0 || dh == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new((2.0 * dh).sqrt().recip(), 0.0)
        }
    }))
}

/// `|Δ|^{1/2} f`.
pub fn sqrt_lap(f: &ScalarLatticeField) -> ScalarLatticeField {
    apply_multiplier(f, |t, p| Complex64::new((2.0 * t.dhat(p)).sqrt(), 0.0))
}

/// Lattice gradient `∇_k f` evaluated in real space.
pub fn grad(k: Direction, f: &ScalarLatticeField) -> ScalarLatticeField {
    let dims = f.dims();
    let v = f.values();
    ScalarLatticeField::from_fn(dims, |x| v[dims.neighbor(x, k)] - v[x])
}

/// Stream tensor of a valid drift field.
///
/// `h_{e_i,e_j} = |Δ|^{-1/2}(Γ_{e_i} v_{e_j} - Γ_{e_j} v_{e_i})`, i.e.
/// `h^ = (m_i v^_j - m_j v^_i) / (2 D^)`. With this orientation the curl
/// `sum_l h_{k,l}` reproduces `v_k`.
pub fn helmholtz(v: &DriftField) -> Result<StreamTensorField, EnvError> {
    let report = validate_drift(v);
    if !report.passed() {
        return Err(EnvError::Invalid(Box::new(report)));
    }
    let dims = v.dims();
    let d = dims.d();
    let plan = FftPlan::new(dims);
    let tables = FrequencyTables::new(dims);
    let vhat: Vec<Vec<Complex64>> = (0..d).map(|i| plan.forward_real(v.positive(i))).collect();
    let pairs = axis_pairs(d)
        .into_iter()
        .map(|(i, j)| {
            let coeffs: Vec<Complex64> = (0..dims.num_sites())
                .map(|p| {
                    let dh = tables.dhat(p);
                    if p == 0 || dh == 0.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let mi = grad_at(&tables, Direction::pos(i), p);
                    let mj = grad_at(&tables, Direction::pos(j), p);
                    (mi * vhat[j][p] - mj * vhat[i][p]) / (2.0 * dh)
                })
                .collect();
            plan.inverse_real(coeffs)
        })
        .collect();
    StreamTensorField::new(dims, pairs)
}

/// `||  |Δ|^{-1/2} v_k ||^2` for every step `k`, ordered as [`Direction::all`].
pub fn hminus_norms(v: &DriftField) -> Result<Vec<f64>, EnvError> {
    let dims = v.dims();
    let n = dims.num_sites() as f64;
    let plan = FftPlan::new(dims);
    let tables = FrequencyTables::new(dims);
    Direction::all(dims.d())
        .map(|k| {
            let comp = ScalarLatticeField::new(dims, v.component(k))?;
            require_mean_zero(&comp)?;
            let coeffs = plan.forward_real(comp.values());
            let s: f64 = coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(p, c)| c.norm_sqr() / (2.0 * tables.dhat(p)))
                .sum();
            Ok(s / (n * n))
        })
        .collect()
}

/// `<f, (sum_l M_l ∇_l + sum_l ∇_{-l} M_l) f>` and the sup norm of the
/// operator applied to `f`, evaluated in real space.
pub fn commutation_residual(v: &DriftField, f: &ScalarLatticeField) -> (f64, f64) {
    let dims = v.dims();
    let vals = f.values();
    let out: Vec<f64> = (0..dims.num_sites())
        .map(|x| {
            Direction::all(dims.d())
                .map(|l| {
                    let fwd = dims.neighbor(x, l);
                    let back = dims.neighbor(x, l.reverse());
                    // M_l ∇_l f + ∇_{-l} M_l f
                    v.value(x, l) * (vals[fwd] - vals[x])
                        + (v.value(back, l) * vals[back] - v.value(x, l) * vals[x])
                })
                .sum()
        })
        .collect();
    let quad = crate::field::inner(vals, &out);
    let sup = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (quad, sup)
}
