//! Restarted GMRES with right preconditioning.

/// Outcome of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveInfo {
    pub iterations: usize,
    /// `||b - A x|| / ||b||` as tracked by the Arnoldi recurrence.
    pub relative_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct GmresParams {
    pub restart: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for GmresParams {
    fn default() -> Self {
        Self {
            restart: 60,
            max_iterations: 20_000,
            tolerance: 1e-12,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` starting from `x`, with `A` applied as `a(v, out)` and the
/// right preconditioner `M^-1` as `m(v, out)`.
pub fn gmres(
    a: impl Fn(&[f64], &mut [f64]),
    m: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    params: GmresParams,
) -> SolveInfo {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return SolveInfo {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let k = params.restart.max(1);
    let mut basis: Vec<Vec<f64>> = vec![vec![0.0; n]; k + 1];
    let mut h = vec![vec![0.0; k]; k + 1];
    let mut cs = vec![0.0; k];
    let mut sn = vec![0.0; k];
    let mut g = vec![0.0; k + 1];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut total = 0;
    let mut rel = f64::INFINITY;

    while total < params.max_iterations {
        // r = b - A x
        a(x, &mut w);
        for (r, (bi, wi)) in basis[0].iter_mut().zip(b.iter().zip(&w)) {
            *r = bi - wi;
        }
        let beta = norm(&basis[0]);
        rel = beta / bnorm;
        if rel <= params.tolerance {
            return SolveInfo {
                iterations: total,
                relative_residual: rel,
                converged: true,
            };
        }
        basis[0].iter_mut().for_each(|v| *v /= beta);
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut used = 0;
        for j in 0..k {
            m(&basis[j], &mut z);
            a(&z, &mut w);
            // modified Gram-Schmidt, applied twice for stability
            for col in h.iter_mut() {
                col[j] = 0.0;
            }
            for _ in 0..2 {
                for i in 0..=j {
                    let c = dot(&w, &basis[i]);
                    h[i][j] += c;
                    for (wv, bv) in w.iter_mut().zip(&basis[i]) {
                        *wv -= c * bv;
                    }
                }
            }
            let hn = norm(&w);
            h[j + 1][j] = hn;
            if hn > 0.0 {
                for (bv, wv) in basis[j + 1].iter_mut().zip(&w) {
                    *bv = wv / hn;
                }
            }
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let r = h[j][j].hypot(h[j + 1][j]);
            cs[j] = h[j][j] / r;
            sn[j] = h[j + 1][j] / r;
            h[j][j] = r;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            total += 1;
            rel = g[j + 1].abs() / bnorm;
            if rel <= params.tolerance || hn == 0.0 || total >= params.max_iterations {
                break;
            }
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|l| h[i][l] * y[l]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        w.iter_mut().for_each(|v| *v = 0.0);
        for (yi, bv) in y.iter().zip(&basis) {
            for (wv, b) in w.iter_mut().zip(bv) {
                *wv += yi * b;
            }
        }
        m(&w, &mut z);
        for (xv, zv) in x.iter_mut().zip(&z) {
            *xv += zv;
        }
    }
    // final true residual
    a(x, &mut w);
    let r: Vec<f64> = b.iter().zip(&w).map(|(bi, wi)| bi - wi).collect();
    rel = rel.max(norm(&r) / bnorm);
    SolveInfo {
        iterations: total,
        relative_residual: rel,
        converged: rel <= params.tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_nonsymmetric_tridiagonal_system() {
        let n = 50;
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let left = if i > 0 { v[i - 1] } else { 0.0 };
                let right = if i + 1 < n { v[i + 1] } else { 0.0 };
                out[i] = 4.0 * v[i] - 1.5 * left - 0.5 * right;
            }
        };
        let ident = |v: &[f64], out: &mut [f64]| out.copy_from_slice(v);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        let info = gmres(apply, ident, &b, &mut x, GmresParams::default());
        assert!(info.converged, "{info:?}");
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        for (a, b) in ax.iter().zip(&b) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut x = vec![1.0; 4];
        let info = gmres(
            |v, o| o.copy_from_slice(v),
            |v, o| o.copy_from_slice(v),
            &[0.0; 4],
            &mut x,
            GmresParams::default(),
        );
        assert!(info.converged);
        assert_eq!(x, vec![0.0; 4]);
    }
}
