use divfree::generators::{generate, GeneratorKind, GeneratorSpec};
use divfree::spectral::{
    check_spectral_identities, covariance_spectrum, hminus_functional,
};
use divfree::{DriftField, LatticeDims};

/// `L^-d sum_{p != 0} Re C^_ij(p) / D^(p)` by direct summation over sites.
fn naive_ctilde(v: &DriftField) -> Vec<Vec<f64>> {
    let dims = v.dims();
    let (d, l, n) = (dims.d(), dims.side(), dims.num_sites());
    let phis: Vec<Vec<f64>> = (0..d).map(|i| v.phi(i).into_values()).collect();
    let coords: Vec<Vec<f64>> = (0..n)
        .map(|x| (0..d).map(|a| dims.coord(x, a) as f64).collect())
        .collect();
    let tau = 2.0 * std::f64::consts::PI / l as f64;
    let mut out = vec![vec![0.0; d]; d];
    for p in 1..n {
        let freq: Vec<f64> = coords[p].iter().map(|m| m * tau).collect();
        let dhat: f64 = freq.iter().map(|q| 1.0 - q.cos()).sum();
        let hat: Vec<(f64, f64)> = phis
            .iter()
            .map(|phi| {
                (0..n).fold((0.0, 0.0), |(re, im), x| {
                    let a: f64 = freq.iter().zip(&coords[x]).map(|(q, c)| q * c).sum();
                    (re + phi[x] * a.cos(), im + phi[x] * a.sin())
                })
            })
            .collect();
        for i in 0..d {
            for j in 0..d {
                // Re(conj(a) b)
                let re = hat[i].0 * hat[j].0 + hat[i].1 * hat[j].1;
                out[i][j] += re / n as f64 / dhat;
            }
        }
    }
    for row in &mut out {
        for x in row {
            *x /= n as f64;
        }
    }
    out
}

/// `2 L^-d <φ_i, (-Δ)^{-1} φ_j>` with the Laplacian inverted by conjugate
/// gradients in real space.
fn real_space_ctilde(v: &DriftField) -> Vec<Vec<f64>> {
    let dims = v.dims();
    let d = dims.d();
    let n = dims.num_sites();
    let neg_lap = |u: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|x| {
                dims.directions()
                    .map(|k| u[x] - u[dims.neighbor(x, k)])
                    .sum()
            })
            .collect()
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let solve = |b: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        for _ in 0..10 * n {
            if rr.sqrt() < 1e-14 {
                break;
            }
            let ap = neg_lap(&p);
            let alpha = rr / dot(&p, &ap);
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let next = dot(&r, &r);
            for k in 0..n {
                p[k] = r[k] + next / rr * p[k];
            }
            rr = next;
        }
        x
    };
    let phis: Vec<Vec<f64>> = (0..d).map(|i| v.phi(i).into_values()).collect();
    let sols: Vec<Vec<f64>> = phis.iter().map(|p| solve(p)).collect();
    (0..d)
        .map(|i| (0..d).map(|j| 2.0 * dot(&phis[i], &sols[j]) / n as f64).collect())
        .collect()
}

fn env(kind: GeneratorKind, d: usize, l: usize, seed: u64) -> DriftField {
    let dims = LatticeDims::new(d, l).unwrap();
    generate(&GeneratorSpec::new(kind, dims, seed)).unwrap().drift
}

#[test]
fn ctilde_matches_both_oracles() {
    for kind in [GeneratorKind::PlaquetteIid, GeneratorKind::Manhattan, GeneratorKind::HeightField] {
        for (d, l) in [(2, 4), (2, 6), (3, 4)] {
            let v = env(kind, d, l, 11);
            let h = hminus_functional(&covariance_spectrum(std::slice::from_ref(&v)).unwrap());
            let naive = naive_ctilde(&v);
            let cg = real_space_ctilde(&v);
            for i in 0..d {
                for j in 0..d {
                    assert!((h.ctilde[i][j] - naive[i][j]).abs() < 1e-10, "{kind} {d} {l}");
                    assert!((h.ctilde[i][j] - cg[i][j]).abs() < 1e-9, "{kind} {d} {l}");
                }
            }
        }
    }
}

#[test]
fn identities_hold_on_generated_fields() {
    for kind in [GeneratorKind::PlaquetteIid, GeneratorKind::Manhattan, GeneratorKind::HeightField] {
        for (d, l) in [(2, 8), (3, 4), (4, 4)] {
            let r = check_spectral_identities(&env(kind, d, l, 5));
            assert!(r.passed(1e-10), "{kind} d={d}: {r:?}");
        }
    }
}

#[test]
fn broken_divergence_shows_in_the_identities() {
    let dims = LatticeDims::new(2, 8).unwrap();
    let vals = (0..dims.num_sites())
        .map(|x| if dims.coord(x, 0).is_multiple_of(2) { 0.5 } else { 0.0 })
        .collect();
    let v = DriftField::new(dims, vec![vals, vec![0.0; dims.num_sites()]]).unwrap();
    let r = check_spectral_identities(&v);
    assert!(r.chat_divfree > 0.1, "{r:?}");
}

#[test]
fn zero_field_and_ensembles() {
    let dims = LatticeDims::new(2, 8).unwrap();
    let h = hminus_functional(&covariance_spectrum(&[DriftField::zero(dims)]).unwrap());
    assert_eq!(h.trace, 0.0);
    let fields: Vec<DriftField> = (0..4)
        .map(|s| env(GeneratorKind::Manhattan, 2, 8, s))
        .collect();
    let mean: f64 = fields
        .iter()
        .map(|f| hminus_functional(&covariance_spectrum(std::slice::from_ref(f)).unwrap()).trace)
        .sum::<f64>()
        / 4.0;
    let joint = hminus_functional(&covariance_spectrum(&fields).unwrap()).trace;
    assert!((mean - joint).abs() < 1e-12);
}
