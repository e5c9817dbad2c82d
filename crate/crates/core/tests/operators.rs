use divfree::generators::{generate, GeneratorKind, GeneratorSpec};
use divfree::rng;
use divfree::spectral::{commutation_residual, dft, grad, idft, inv_sqrt_lap, riesz, sqrt_lap};
use divfree::{Direction, LatticeDims, ScalarLatticeField};
use proptest::prelude::*;
use rand::Rng;

const TOL: f64 = 1e-10;

fn random_mean_zero(dims: LatticeDims, seed: u64) -> ScalarLatticeField {
    let mut r = rng::rng(seed);
    let vals = (0..dims.num_sites()).map(|_| r.random_range(-1.0..1.0)).collect();
    ScalarLatticeField::new(dims, vals).unwrap().centered()
}

fn shape() -> impl Strategy<Value = LatticeDims> {
    (2usize..=3, prop::sample::select(vec![4usize, 6, 8]))
        .prop_map(|(d, l)| LatticeDims::new(d, l).unwrap())
}

fn max_diff(a: &ScalarLatticeField, b: &ScalarLatticeField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn parseval(dims in shape(), seed in any::<u64>()) {
        let f = random_mean_zero(dims, seed);
        let n = dims.num_sites() as f64;
        let fhat = dft(&f);
        let spec: f64 = fhat.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() / (n * n);
        prop_assert!((spec - f.norm2()).abs() <= TOL * f.norm2().max(1.0));
        prop_assert!(max_diff(&idft(&fhat), &f) <= TOL);
    }

    #[test]
    fn riesz_is_a_contraction(dims in shape(), seed in any::<u64>()) {
        let f = random_mean_zero(dims, seed);
        for k in Direction::all(dims.d()) {
            let g = riesz(k, &f).unwrap();
            prop_assert!(g.norm2() <= f.norm2() * (1.0 + TOL));
        }
    }

    #[test]
    fn riesz_adjoint_is_the_reversed_step(dims in shape(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let f = random_mean_zero(dims, s1);
        let g = random_mean_zero(dims, s2);
        for k in Direction::all(dims.d()) {
            let lhs = riesz(k, &f).unwrap().inner(&g);
            let rhs = f.inner(&riesz(k.reverse(), &g).unwrap());
            prop_assert!((lhs - rhs).abs() <= TOL);
        }
    }

    #[test]
    fn riesz_squares_sum_to_identity(dims in shape(), seed in any::<u64>()) {
        let f = random_mean_zero(dims, seed);
        let mut acc = ScalarLatticeField::zeros(dims);
        for l in Direction::all(dims.d()) {
            let g = riesz(l, &riesz(l.reverse(), &f).unwrap()).unwrap();
            for (a, b) in acc.values_mut().iter_mut().zip(g.values()) {
                *a += 0.5 * b;
            }
        }
        prop_assert!(max_diff(&acc, &f) <= TOL);
    }

    #[test]
    fn half_laplacians_invert_each_other(dims in shape(), seed in any::<u64>()) {
        let f = random_mean_zero(dims, seed);
        let g = sqrt_lap(&inv_sqrt_lap(&f).unwrap());
        prop_assert!(max_diff(&g, &f) <= TOL);
    }

    #[test]
    fn riesz_factorises_the_gradient(dims in shape(), seed in any::<u64>()) {
        let f = random_mean_zero(dims, seed);
        for k in Direction::all(dims.d()) {
            let via = sqrt_lap(&riesz(k, &f).unwrap());
            prop_assert!(max_diff(&via, &grad(k, &f)) <= TOL);
        }
    }

    #[test]
    fn drift_multiplication_commutes_with_gradients(
        d in 2usize..=3,
        side in prop::sample::select(vec![4usize, 8]),
        kind in prop::sample::select(vec![GeneratorKind::PlaquetteIid, GeneratorKind::Manhattan, GeneratorKind::HeightField]),
        seed in any::<u64>(),
    ) {
        let dims = LatticeDims::new(d, side).unwrap();
        let v = generate(&GeneratorSpec::new(kind, dims, seed)).unwrap().drift;
        let f = random_mean_zero(dims, seed ^ 1);
        let (quad, sup) = commutation_residual(&v, &f);
        prop_assert!(quad.abs() <= TOL);
        prop_assert!(sup <= TOL);
    }
}

#[test]
fn nonzero_mean_inputs_are_rejected() {
    let dims = LatticeDims::new(2, 4).unwrap();
    let f = ScalarLatticeField::from_fn(dims, |x| x as f64);
    assert!(riesz(Direction::pos(0), &f).is_err());
    assert!(inv_sqrt_lap(&f).is_err());
}
