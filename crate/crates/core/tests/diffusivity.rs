use divfree::corrector::solve_corrector;
use divfree::generators::{generate, GeneratorKind, GeneratorSpec};
use divfree::spectral::{covariance_spectrum, hminus_functional};
use divfree::stats::{bound_check, estimate_sigma2};
use divfree::walker::{simulate_ctmc, WalkConfig};
use divfree::{DriftField, LatticeDims};

fn env(kind: GeneratorKind, d: usize, l: usize, seed: u64) -> DriftField {
    let dims = LatticeDims::new(d, l).unwrap();
    generate(&GeneratorSpec::new(kind, dims, seed)).unwrap().drift
}

#[test]
fn zero_drift_diffuses_at_rate_two() {
    let v = DriftField::zero(LatticeDims::new(3, 4).unwrap());
    let sol = solve_corrector(&v).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 2.0 } else { 0.0 };
            assert!((sol.sigma2[i][j] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn corrector_respects_the_bounds() {
    for kind in [GeneratorKind::PlaquetteIid, GeneratorKind::Manhattan, GeneratorKind::HeightField] {
        for (d, l) in [(2, 8), (2, 16), (3, 4)] {
            for seed in 0..3 {
                let v = env(kind, d, l, seed);
                let sol = solve_corrector(&v).unwrap();
                assert!(sol.residual < 1e-9, "{kind} residual {}", sol.residual);
                let h = hminus_functional(&covariance_spectrum(std::slice::from_ref(&v)).unwrap());
                let b = bound_check(&sol.sigma2, &h.ctilde, 1e-9);
                assert!(b.passed, "{kind} d={d} L={l} seed={seed}: {b:?}");
                // a divergence-free drift never slows the walk down
                assert!(b.trace_lower_margin > 0.0 || h.trace == 0.0);
            }
        }
    }
}

#[test]
fn simulated_covariance_matches_the_corrector() {
    let v = env(GeneratorKind::PlaquetteIid, 2, 4, 9);
    let sigma2 = solve_corrector(&v).unwrap().sigma2;
    let t = 400.0;
    let trajs = simulate_ctmc(&v, &WalkConfig::ctmc(t, 20_000, 17)).unwrap();
    let ends: Vec<Vec<i64>> = trajs.into_iter().map(|t| t.displacement).collect();
    let est = estimate_sigma2(&ends, t, 1).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let diff = (est.sigma2[i][j] - sigma2[i][j]).abs();
            // finite-T bias is O(1/T) on a torus this small
            assert!(diff <= 4.0 * est.se[i][j] + 0.02, "({i},{j}) {diff}");
        }
    }
}
