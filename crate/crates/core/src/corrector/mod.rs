//! The environment-process generator on the torus, its resolvent and the
//! corrector.
//!
//! Viewed from the walker, the environment moves on the `L^d` shifts of the
//! torus with generator `G[x, x+k] = 1 + V_k(x)`, `G[x, x] = -2d`. Rows and
//! columns sum to zero, so the uniform measure is stationary, and the
//! symmetric part of `G` is the lattice Laplacian. The corrector solves
//! `G χ_i = -φ_i` on mean-zero fields; the effective diffusivity is the
//! quadratic-variation rate of `X + χ(η)`.

mod gmres;

pub use gmres::{gmres, GmresParams, SolveInfo};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CorrectorError;
use crate::exact::ExactSum;
use crate::field::{inner, DriftField, ScalarLatticeField};
use crate::lattice::{Direction, LatticeDims};
use crate::spectral::{FftPlan, FrequencyTables};
use crate::validate::validate_drift;

/// Sparse generator with `2d` off-diagonal entries per row.
#[derive(Debug, Clone)]
pub struct EnvGenerator {
    dims: LatticeDims,
    /// `rates[x * 2d + k.index()] = 1 + V_k(x)`
    rates: Vec<f64>,
    neighbors: Vec<usize>,
}

impl EnvGenerator {
    pub fn dims(&self) -> LatticeDims {
        self.dims
    }

    #[inline]
    pub fn rate(&self, x: usize, k: Direction) -> f64 {
        self.rates[x * 2 * self.dims.d() + k.index()]
    }

    /// `(G u)(x) = sum_k (1 + V_k(x)) u(x+k) - 2d u(x)`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let m = 2 * self.dims.d();
        let diag = m as f64;
        out.par_iter_mut().enumerate().for_each(|(x, o)| {
            let base = x * m;
            let mut s = -diag * u[x];
            for j in 0..m {
                s += self.rates[base + j] * u[self.neighbors[base + j]];
            }
            *o = s;
        });
    }

    /// `(G^T u)(y) = sum_k (1 + V_k(y-k)) u(y-k) - 2d u(y)`.
    pub fn apply_transpose(&self, u: &[f64], out: &mut [f64]) {
        let m = 2 * self.dims.d();
        out.iter_mut().for_each(|o| *o = 0.0);
        for x in 0..u.len() {
            let base = x * m;
            out[x] -= m as f64 * u[x];
            for j in 0..m {
                out[self.neighbors[base + j]] += self.rates[base + j] * u[x];
            }
        }
    }

    /// Largest `|row sum|`, summed exactly.
    pub fn max_row_sum(&self) -> f64 {
        let m = 2 * self.dims.d();
        (0..self.dims.num_sites())
            .map(|x| {
                let mut s = ExactSum::new();
                s.add(-(m as f64));
                self.rates[x * m..(x + 1) * m].iter().for_each(|&r| s.add(r));
                s.to_f64().abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|column sum|`, summed exactly.
    pub fn max_col_sum(&self) -> f64 {
        let m = 2 * self.dims.d();
        let n = self.dims.num_sites();
        let mut sums: Vec<ExactSum> = (0..n)
            .map(|_| {
                let mut s = ExactSum::new();
                s.add(-(m as f64));
                s
            })
            .collect();
        for x in 0..n {
            for j in 0..m {
                sums[self.neighbors[x * m + j]].add(self.rates[x * m + j]);
            }
        }
        sums.iter().map(|s| s.to_f64().abs()).fold(0.0, f64::max)
    }

    /// Smallest off-diagonal entry.
    pub fn min_rate(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `<f, A f>` for the skew part `A = (G - G^T)/2`.
    pub fn skew_form(&self, f: &[f64]) -> f64 {
        let n = f.len();
        let mut g = vec![0.0; n];
        let mut gt = vec![0.0; n];
        self.apply(f, &mut g);
        self.apply_transpose(f, &mut gt);
        let a: Vec<f64> = g.iter().zip(&gt).map(|(a, b)| 0.5 * (a - b)).collect();
        inner(f, &a)
    }

    /// Dense copy, for small tori.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dims.num_sites();
        let m = 2 * self.dims.d();
        let mut g = nalgebra::DMatrix::zeros(n, n);
        for x in 0..n {
            g[(x, x)] -= m as f64;
            for j in 0..m {
                g[(x, self.neighbors[x * m + j])] += self.rates[x * m + j];
            }
        }
        g
    }

    /// Sizes of the connected components of the positive-rate graph, largest first.
    ///
    /// With zero row and column sums every weakly connected component is
    /// closed, so more than one component means the chain is reducible.
    pub fn components(&self) -> Vec<usize> {
        let n = self.dims.num_sites();
        let m = 2 * self.dims.d();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for x in 0..n {
            for j in 0..m {
                if self.rates[x * m + j] > 0.0 {
                    let (a, b) = (find(&mut parent, x), find(&mut parent, self.neighbors[x * m + j]));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut sizes = std::collections::BTreeMap::new();
        for x in 0..n {
            *sizes.entry(find(&mut parent, x)).or_insert(0usize) += 1;
        }
        let mut out: Vec<usize> = sizes.into_values().collect();
        out.sort_unstable_by(|a, b| b.cmp(a));
        out
    }
}

/// Assembles `G` from a valid drift field.
pub fn build_generator(v: &DriftField) -> Result<EnvGenerator, CorrectorError> {
    let report = validate_drift(v);
    if !report.passed() {
        return Err(crate::error::EnvError::Invalid(Box::new(report)).into());
    }
    let dims = v.dims();
    let n = dims.num_sites();
    let mut rates = Vec::with_capacity(n * 2 * dims.d());
    let mut neighbors = Vec::with_capacity(n * 2 * dims.d());
    for x in 0..n {
        for k in Direction::all(dims.d()) {
            rates.push(v.rate(x, k));
            neighbors.push(dims.neighbor(x, k));
        }
    }
    Ok(EnvGenerator {
        dims,
        rates,
        neighbors,
    })
}

/// `(λ + 2 D^)^{-1}` in Fourier space, projected to mean zero.
struct LaplacePreconditioner {
    plan: FftPlan,
    weights: Vec<f64>,
}

impl LaplacePreconditioner {
    fn new(dims: LatticeDims, lambda: f64) -> Self {
        let tables = FrequencyTables::new(dims);
        let weights = (0..dims.num_sites())
            .map(|p| {
                let s = lambda + 2.0 * tables.dhat(p);
                if p == 0 && lambda == 0.0 {
                    0.0
                } else {
                    1.0 / s
                }
            })
            .collect();
        Self {
            plan: FftPlan::new(dims),
            weights,
        }
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let mut c: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.plan.forward_in_place(&mut c);
        for (ci, w) in c.iter_mut().zip(&self.weights) {
            *ci *= w;
        }
        self.plan.inverse_in_place(&mut c);
        for (o, ci) in out.iter_mut().zip(&c) {
            *o = ci.re;
        }
    }
}

fn project_mean_zero(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Solves `(λ I - G) u = f`; for `λ = 0` on the mean-zero subspace.
fn solve_shifted(
    g: &EnvGenerator,
    lambda: f64,
    f: &[f64],
    params: GmresParams,
) -> Result<(Vec<f64>, SolveInfo), CorrectorError> {
    let pre = LaplacePreconditioner::new(g.dims(), lambda);
    let mut rhs = f.to_vec();
    if lambda == 0.0 {
        project_mean_zero(&mut rhs);
    }
    let op = |v: &[f64], out: &mut [f64]| {
        g.apply(v, out);
        for (o, x) in out.iter_mut().zip(v) {
            *o = lambda * x - *o;
        }
    };
    let mut u = vec![0.0; f.len()];
    let info = gmres(op, |v, o| pre.apply(v, o), &rhs, &mut u, params);
    if lambda == 0.0 {
        project_mean_zero(&mut u);
    }
    if !info.converged {
        return Err(CorrectorError::SolverDivergence {
            residual: info.relative_residual,
            iterations: info.iterations,
        });
    }
    Ok((u, info))
}

fn solver_params() -> GmresParams {
    GmresParams {
        tolerance: 1e-12,
        ..GmresParams::default()
    }
}

/// `u_λ = (λ I - G)^{-1} f`.
pub fn resolvent(
    v: &DriftField,
    lambda: f64,
    f: &ScalarLatticeField,
) -> Result<ScalarLatticeField, CorrectorError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CorrectorError::BadLambda(lambda));
    }
    let g = build_generator(v)?;
    let (u, _) = solve_shifted(&g, lambda, f.values(), solver_params())?;
    Ok(ScalarLatticeField::new(v.dims(), u)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectorSolution {
    pub chi: Vec<ScalarLatticeField>,
    /// `max_x |(G χ_i + φ_i)(x)|` over all components.
    pub residual: f64,
    pub sigma2: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
}

impl CorrectorSolution {
    pub fn trace(&self) -> f64 {
        (0..self.sigma2.len()).map(|i| self.sigma2[i][i]).sum()
    }
}

/// `σ²_{ij} = L^-d sum_x sum_k (1 + V_k(x)) (k_i + ∇_k χ_i(x)) (k_j + ∇_k χ_j(x))`.
pub fn quadratic_variation(g: &EnvGenerator, chi: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dims = g.dims();
    let d = dims.d();
    let n = dims.num_sites();
    let mut s = vec![vec![0.0; d]; d];
    let mut incr = vec![0.0; d];
    for x in 0..n {
        for k in Direction::all(d) {
            let y = dims.neighbor(x, k);
            let r = g.rate(x, k);
            if r == 0.0 {
                continue;
            }
            for (i, inc) in incr.iter_mut().enumerate() {
                *inc = k.component(i) as f64 + chi[i][y] - chi[i][x];
            }
            for i in 0..d {
                for j in 0..d {
                    s[i][j] += r * incr[i] * incr[j];
                }
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            s[i][j] /= n as f64;
        }
    }
    // exact symmetry
    for i in 0..d {
        for j in 0..i {
            let m = 0.5 * (s[i][j] + s[j][i]);
            s[i][j] = m;
            s[j][i] = m;
        }
    }
    s
}

/// Corrector and effective diffusivity of an irreducible environment.
pub fn solve_corrector(v: &DriftField) -> Result<CorrectorSolution, CorrectorError> {
    let g = build_generator(v)?;
    let comps = g.components();
    if comps.len() > 1 {
        return Err(CorrectorError::Reducible {
            count: comps.len(),
            sizes: comps,
        });
    }
    let d = v.dims().d();
    let phis: Vec<ScalarLatticeField> = (0..d).map(|i| v.phi(i)).collect();
    let solved: Vec<(Vec<f64>, SolveInfo)> = (0..d)
        .into_par_iter()
        .map(|i| solve_shifted(&g, 0.0, phis[i].values(), solver_params()))
        .collect::<Result<_, _>>()?;
    let mut residual = 0.0f64;
    let mut tmp = vec![0.0; v.dims().num_sites()];
    for (i, (chi, _)) in solved.iter().enumerate() {
        g.apply(chi, &mut tmp);
        for (gx, p) in tmp.iter().zip(phis[i].values()) {
            residual = residual.max((gx + p).abs());
        }
    }
    let chi_vals: Vec<Vec<f64>> = solved.iter().map(|(c, _)| c.clone()).collect();
    let sigma2 = quadratic_variation(&g, &chi_vals);
    Ok(CorrectorSolution {
        chi: chi_vals
            .into_iter()
            .map(|c| ScalarLatticeField::new(v.dims(), c))
            .collect::<Result<_, _>>()?,
        residual,
        sigma2,
        iterations: solved.iter().map(|(_, s)| s.iterations).collect(),
    })
}

/// One line of the Kipnis-Varadhan table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KvRow {
    pub lambda: f64,
    pub component: usize,
    /// `λ ||u_λ||²`
    pub lambda_norm: f64,
    /// `||S^{1/2} u_λ||² = <u_λ, -Δ u_λ>`
    pub dirichlet: f64,
    /// `2 <u_λ, φ_i>`
    pub two_u_phi: f64,
    /// `||(λ - G) u_λ - φ_i|| / ||φ_i||`
    pub residual: f64,
}

fn neg_laplacian(dims: LatticeDims, u: &[f64]) -> Vec<f64> {
    let d = dims.d();
    (0..u.len())
        .map(|x| {
            Direction::all(d)
                .map(|k| u[x] - u[dims.neighbor(x, k)])
                .sum()
        })
        .collect()
}

/// Resolvent diagnostics `u_λ = (λ - G)^{-1} φ_i` over a grid of `λ`.
pub fn kv_diagnostics(v: &DriftField, lambdas: &[f64]) -> Result<Vec<KvRow>, CorrectorError> {
    if let Some(&bad) = lambdas.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(CorrectorError::BadLambda(bad));
    }
    let g = build_generator(v)?;
    let dims = v.dims();
    let d = dims.d();
    let jobs: Vec<(f64, usize)> = lambdas
        .iter()
        .flat_map(|&l| (0..d).map(move |i| (l, i)))
        .collect();
    jobs.into_par_iter()
        .map(|(lambda, i)| {
            let phi = v.phi(i);
            let (u, _) = solve_shifted(&g, lambda, phi.values(), solver_params())?;
            let mut gu = vec![0.0; u.len()];
            g.apply(&u, &mut gu);
            let res: f64 = gu
                .iter()
                .zip(&u)
                .zip(phi.values())
                .map(|((gx, ux), p)| (lambda * ux - gx - p).powi(2))
                .sum::<f64>()
                .sqrt();
            let pn = phi.values().iter().map(|p| p * p).sum::<f64>().sqrt();
            Ok(KvRow {
                lambda,
                component: i,
                lambda_norm: lambda * inner(&u, &u),
                dirichlet: inner(&u, &neg_laplacian(dims, &u)),
                two_u_phi: 2.0 * inner(&u, phi.values()),
                residual: if pn == 0.0 { 0.0 } else { res / pn },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{
gen_manhattan, gen_plaquette_iid, GeneratorKind, GeneratorSpec};

    fn plaquette(d: usize, l: usize, seed: u64) -> DriftField {
        let dims = LatticeDims::new(d, l).unwrap();
        gen_plaquette_iid(&GeneratorSpec::new(GeneratorKind::PlaquetteIid, dims, seed))
            .unwrap()
            .1
    }

    #[test]
    fn zero_drift_gives_ssrw() {
        let v = DriftField::zero(LatticeDims::new(2, 4).unwrap());
        let g = build_generator(&v).unwrap();
        let dense = g.to_dense();
        assert_eq!(dense.clone(), dense.transpose());
        let sol = solve_corrector(&v).unwrap();
        assert!(sol.chi.iter().all(|c| c.max_abs() == 0.0));
        assert_eq!(sol.sigma2, vec![vec![2.0, 0.0], vec![0.0, 2.0]]);
    }

    #[test]
    fn row_and_column_sums_vanish() {
        let g = build_generator(&plaquette(3, 4, 7)).unwrap();
        assert_eq!(g.max_row_sum(), 0.0);
        assert_eq!(g.max_col_sum(), 0.0);
        assert!(g.min_rate() >= 0.0);
    }

    #[test]
    fn symmetric_part_is_the_laplacian() {
        let v = plaquette(2, 4, 3);
        let dims = v.dims();
        let g = build_generator(&v).unwrap().to_dense();
        let s = &g + g.transpose();
        for x in 0..dims.num_sites() {
            for y in 0..dims.num_sites() {
                let adj = Direction::all(2).filter(|&k| dims.neighbor(x, k) == y).count() as f64;
                let expect = 2.0 * (adj - if x == y { 4.0 } else { 0.0 });
                assert_eq!(s[(x, y)], expect);
            }
        }
    }

    #[test]
    fn skew_part_has_zero_quadratic_form() {
        let v = plaquette(2, 8, 1);
        let g = build_generator(&v).unwrap();
        let f: Vec<f64> = (0..64).map(|x| ((x * 13 % 7) as f64).sin()).collect();
        assert!(g.skew_form(&f).abs() < 1e-13);
        let mut out = vec![0.0; 64];
        g.apply(&[1.0; 64], &mut out);
        assert!(out.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn corrector_matches_dense_solve() {
        let v = plaquette(2, 4, 11);
        let g = build_generator(&v).unwrap();
        let n = 16;
        let dense = g.to_dense() - nalgebra::DMatrix::from_element(n, n, 1.0 / n as f64);
        let lu = dense.lu();
        let sol = solve_corrector(&v).unwrap();
        for i in 0..2 {
            let rhs = nalgebra::DVector::from_iterator(n, v.phi(i).values().iter().map(|p| -p));
            let chi = lu.solve(&rhs).unwrap();
            for x in 0..n {
                assert!((chi[x] - sol.chi[i].values()[x]).abs() < 1e-10);
            }
        }
        assert!(sol.residual <= 1e-9);
    }

    #[test]
    fn sigma_diagonal_matches_phi_pairing() {
        let v = plaquette(2, 8, 5);
        let sol = solve_corrector(&v).unwrap();
        for i in 0..2 {
            let pairing = inner(sol.chi[i].values(), v.phi(i).values());
            assert!((sol.sigma2[i][i] - 2.0 - 2.0 * pairing).abs() < 1e-10);
            assert!(sol.sigma2[i][i] >= 2.0 - 1e-9);
        }
    }

    #[test]
    fn extreme_rates_stay_connected() {
        // 1 + V and 1 - V cannot both vanish, so every edge is live in at
        // least one direction
        let dims = LatticeDims::new(2, 4).unwrap();
        let bal = gen_manhattan(&GeneratorSpec::new(GeneratorKind::Manhattan, dims, 2)).unwrap();
        let g = build_generator(&bal.drift).unwrap();
        assert_eq!(g.min_rate(), 0.0);
        assert_eq!(g.components(), vec![16]);
    }

    #[test]
    fn resolvent_single_mode_for_zero_drift() {
        let dims = LatticeDims::new(2, 8).unwrap();
        let v = DriftField::zero(dims);
        let p = [crate::spectral::angle(1, 8), crate::spectral::angle(3, 8)];
        let f = ScalarLatticeField::from_fn(dims, |x| {
            (p[0] * dims.coord(x, 0) as f64 + p[1] * dims.coord(x, 1) as f64).cos()
        });
        let lambda = 0.3;
        let u = resolvent(&v, lambda, &f).unwrap();
        let scale = 1.0 / (lambda + 2.0 * crate::spectral::dhat(&p));
        for (a, b) in u.values().iter().zip(f.values()) {
            assert!((a - scale * b).abs() < 1e-11);
        }
        assert!(matches!(
            resolvent(&v, 0.0, &f),
            Err(CorrectorError::BadLambda(_))
        ));
    }

    #[test]
    fn kv_matches_corrector() {
        let v = plaquette(2, 4, 9);
        let sol = solve_corrector(&v).unwrap();
        let rows = kv_diagnostics(&v, &[1e-1, 1e-8]).unwrap();
        for r in rows.iter().filter(|r| r.lambda == 1e-8) {
            let i = r.component;
            assert!((r.two_u_phi - (sol.sigma2[i][i] - 2.0)).abs() < 1e-6);
            assert!(r.residual <= 1e-10);
        }
    }
}
