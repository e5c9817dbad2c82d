//! Constructions of admissible environments.
//!
//! * i.i.d. plaquette stream tensors (each stored `H_{e_i,e_j}(x)` is an
//!   oriented elementary cycle of strength `±amplitude`),
//! * randomly oriented Manhattan lattices,
//! * stream tensors built from a 1-Lipschitz height field on the dual torus.
//!
//! All built-in generators emit dyadic rationals by default so validation is
//! exact.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::GenError;
use crate::field::{axis_pairs, DriftField, ScalarLatticeField, StreamTensorField};
use crate::lattice::{Direction, LatticeDims, Site};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    PlaquetteIid,
    Manhattan,
    HeightField,
    FromFile,
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorKind::PlaquetteIid => "plaquette_iid",
            GeneratorKind::Manhattan => "manhattan",
            GeneratorKind::HeightField => "height_field",
            GeneratorKind::FromFile => "from_file",
        })
    }
}

impl FromStr for GeneratorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plaquette_iid" | "plaquette" => Ok(GeneratorKind::PlaquetteIid),
            "manhattan" => Ok(GeneratorKind::Manhattan),
            "height_field" | "height" => Ok(GeneratorKind::HeightField),
            "from_file" => Ok(GeneratorKind::FromFile),
            other => Err(format!("unknown generator kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub dims: LatticeDims,
    /// Plaquette bound on `|h|`; `None` picks [`default_amplitude`].
    pub amplitude: Option<f64>,
    pub seed: u64,
    /// Manhattan: exactly half of the lines in each direction.
    pub balanced: bool,
    /// Plaquette: uniform on `[-a, a]` instead of the two-point law.
    pub continuous: bool,
    /// Height field: range of the i.i.d. integer seed field before clamping.
    pub height_range: i64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, dims: LatticeDims, seed: u64) -> Self {
        Self {
            kind,
            dims,
            amplitude: None,
            seed,
            balanced: true,
            continuous: false,
            height_range: 4,
        }
    }

    pub fn with_amplitude(mut self, a: f64) -> Self {
        self.amplitude = Some(a);
        self
    }

    pub fn with_balanced(mut self, balanced: bool) -> Self {
        self.balanced = balanced;
        self
    }
}

/// Largest multiple of 1/64 strictly below `1/(2d)`.
pub fn default_amplitude(d: usize) -> f64 {
    let k = (64.0 / (2.0 * d as f64)).ceil() - 1.0;
    k / 64.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GeneratorWarning {
    /// Unbalanced Manhattan lattice: `sum_y u_i(y) != 0` injects a net drift.
    NetDrift { axis: usize, orientation_sum: i64 },
}

impl fmt::Display for GeneratorWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorWarning::NetDrift {
                axis,
                orientation_sum,
            } => write!(
                f,
                "net drift along axis {}: orientation sum {orientation_sum}",
                axis + 1
            ),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub drift: DriftField,
    pub stream: Option<StreamTensorField>,
    pub warnings: Vec<GeneratorWarning>,
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated, GenError> {
    match spec.kind {
        GeneratorKind::PlaquetteIid => {
            let (h, v) = gen_plaquette_iid(spec)?;
            Ok(Generated {
                drift: v,
                stream: Some(h),
                warnings: vec![],
            })
        }
        GeneratorKind::Manhattan => {
            let m = gen_manhattan(spec)?;
            Ok(Generated {
                drift: m.drift,
                stream: None,
                warnings: m.warnings,
            })
        }
        GeneratorKind::HeightField => {
            let psi = random_lipschitz_height(spec.dims, spec.seed, spec.height_range);
            let (h, v) = gen_height_field(&psi)?;
            Ok(Generated {
                drift: v,
                stream: Some(h),
                warnings: vec![],
            })
        }
        GeneratorKind::FromFile => Err(GenError::NeedsFile(spec.kind.to_string())),
    }
}

/// i.i.d. plaquette stream tensor and its curl.
pub fn gen_plaquette_iid(
    spec: &GeneratorSpec,
) -> Result<(StreamTensorField, DriftField), GenError> {
    let dims = spec.dims;
    let d = dims.d();
    let limit = 1.0 / (2.0 * d as f64);
    let amplitude = spec.amplitude.unwrap_or_else(|| default_amplitude(d));
    if !(amplitude <= limit) || amplitude < 0.0 {
        return Err(GenError::AmplitudeTooLarge { amplitude, limit });
    }
    let mut rng = rng::rng(spec.seed);
    let n = dims.num_sites();
    let pairs = axis_pairs(d)
        .iter()
        .map(|_| {
            (0..n)
                .map(|_| {
                    if spec.continuous {
                        rng.random_range(-amplitude..=amplitude)
                    } else if rng.random::<bool>() {
                        amplitude
                    } else {
                        -amplitude
                    }
                })
                .collect()
        })
        .collect();
    let h = StreamTensorField::new(dims, pairs)?;
    let v = h.curl()?;
    Ok((h, v))
}

/// Orientations `u_i` on the `(d-1)`-dimensional cross sections.
#[derive(Debug, Clone, PartialEq)]
pub struct ManhattanOrientations {
    dims: LatticeDims,
    /// `u[i][y]` with `y` the row-major index of `x` with coordinate `i` removed.
    u: Vec<Vec<i8>>,
}

impl ManhattanOrientations {
    pub fn new(dims: LatticeDims, u: Vec<Vec<i8>>) -> Result<Self, GenError> {
        let per_axis = dims.num_sites() / dims.side();
        for (axis, line) in u.iter().enumerate() {
            if line.len() != per_axis || line.iter().any(|&s| s != 1 && s != -1) {
                return Err(GenError::OrientationShape {
                    axis,
                    expected: per_axis,
                    got: line.len(),
                });
            }
        }
        if u.len() != dims.d() {
            return Err(GenError::OrientationShape {
                axis: u.len(),
                expected: dims.d(),
                got: u.len(),
            });
        }
        Ok(Self { dims, u })
    }

    /// Constant orientation per axis.
    pub fn constant(dims: LatticeDims, signs: &[i8]) -> Result<Self, GenError> {
        let per_axis = dims.num_sites() / dims.side();
        Self::new(dims, signs.iter().map(|&s| vec![s; per_axis]).collect())
    }

    pub fn axis(&self, i: usize) -> &[i8] {
        &self.u[i]
    }

    /// Index of `x` with coordinate `axis` deleted.
    pub fn line_index(dims: LatticeDims, x: usize, axis: usize) -> usize {
        let l = dims.side();
        (0..dims.d())
            .filter(|&a| a != axis)
            .fold(0, |acc, a| acc * l + dims.coord(x, a))
    }

    pub fn drift(&self) -> DriftField {
        let dims = self.dims;
        let comps = (0..dims.d())
            .map(|i| {
                (0..dims.num_sites())
                    .map(|x| self.u[i][Self::line_index(dims, x, i)] as f64)
                    .collect()
            })
            .collect();
        DriftField::new(dims, comps).expect("shape follows dims")
    }

    pub fn net_drift_warnings(&self) -> Vec<GeneratorWarning> {
        self.u
            .iter()
            .enumerate()
            .filter_map(|(axis, line)| {
                let s: i64 = line.iter().map(|&v| v as i64).sum();
                (s != 0).then_some(GeneratorWarning::NetDrift {
                    axis,
                    orientation_sum: s,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ManhattanField {
    pub drift: DriftField,
    pub orientations: ManhattanOrientations,
    pub warnings: Vec<GeneratorWarning>,
}

/// Randomly oriented Manhattan lattice: `V_{±e_i}(x) = ±u_i(x without x_i)`.
pub fn gen_manhattan(spec: &GeneratorSpec) -> Result<ManhattanField, GenError> {
    let dims = spec.dims;
    let per_axis = dims.num_sites() / dims.side();
    if spec.balanced && per_axis % 2 == 1 {
        return Err(GenError::UnbalancedTorus { count: per_axis });
    }
    let mut rng = rng::rng(spec.seed);
    let u = (0..dims.d())
        .map(|_| {
            if spec.balanced {
                let mut line: Vec<i8> = (0..per_axis)
                    .map(|y| if y < per_axis / 2 { 1 } else { -1 })
                    .collect();
                line.shuffle(&mut rng);
                line
            } else {
                (0..per_axis)
                    .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                    .collect()
            }
        })
        .collect();
    manhattan_from_orientations(ManhattanOrientations::new(dims, u)?)
}

/// Manhattan field with caller-chosen orientations.
pub fn manhattan_from_orientations(
    orientations: ManhattanOrientations,
) -> Result<ManhattanField, GenError> {
    Ok(ManhattanField {
        drift: orientations.drift(),
        warnings: orientations.net_drift_warnings(),
        orientations,
    })
}

/// Checks the 1-Lipschitz condition on all dual edges of the torus.
pub fn check_lipschitz(psi: &ScalarLatticeField) -> Result<(), GenError> {
    let dims = psi.dims();
    let vals = psi.values();
    for y in 0..dims.num_sites() {
        for axis in 0..dims.d() {
            let z = dims.neighbor(y, Direction::pos(axis));
            if (vals[y] - vals[z]).abs() > 1.0 {
                return Err(GenError::NotLipschitz {
                    from: dual_label(&dims.site(y)),
                    to: dual_label(&dims.site(z)),
                    a: vals[y],
                    b: vals[z],
                });
            }
        }
    }
    Ok(())
}

fn dual_label(site: &Site) -> String {
    let parts: Vec<String> = site.coords.iter().map(|c| format!("{c}.5")).collect();
    format!("({})", parts.join(","))
}

/// Stream tensor `H_{e_i,e_j}(x) = psi(x + (1/2,...,1/2)) / d` and its curl.
///
/// `psi[y]` is the value at the dual site `y + (1/2,...,1/2)`. In two
/// dimensions `x + (e_1+e_2)/2` is exactly that dual site; in higher
/// dimensions each plaquette centre is mapped to the dual site obtained by
/// shifting the remaining coordinates by `+1/2`, which keeps `H(x)` and
/// `H(x - e_j)` on neighbouring dual sites.
pub fn gen_height_field(
    psi: &ScalarLatticeField,
) -> Result<(StreamTensorField, DriftField), GenError> {
    check_lipschitz(psi)?;
    let dims = psi.dims();
    let d = dims.d() as f64;
    let base: Vec<f64> = psi.values().iter().map(|v| v / d).collect();
    let pairs = axis_pairs(dims.d()).iter().map(|_| base.clone()).collect();
    let h = StreamTensorField::new(dims, pairs)?;
    let v = h.curl()?;
    Ok((h, v))
}

/// A random integer-valued 1-Lipschitz field on the dual torus.
///
/// Draws i.i.d. integers in `[-range, range]` and lowers each value to at
/// most `neighbour + 1` until nothing changes. The result is the largest
/// 1-Lipschitz minorant of the seed field.
pub fn random_lipschitz_height(dims: LatticeDims, seed: u64, range: i64) -> ScalarLatticeField {
    let mut rng = rng::rng(seed);
    let n = dims.num_sites();
    let mut vals: Vec<i64> = (0..n).map(|_| rng.random_range(-range..=range)).collect();
    loop {
        let mut changed = false;
        for y in 0..n {
            for k in dims.directions() {
                let z = dims.neighbor(y, k);
                if vals[y] > vals[z] + 1 {
                    vals[y] = vals[z] + 1;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    ScalarLatticeField::new(dims, vals.into_iter().map(|v| v as f64).collect())
        .expect("shape follows dims")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::{validate_drift_with, CheckKind};

    fn dims(d: usize, l: usize) -> LatticeDims {
        LatticeDims::new(d, l).unwrap()
    }

    #[test]
    fn default_amplitudes_are_dyadic_and_admissible() {
        for d in 2..=5 {
            let a = default_amplitude(d);
            assert!(a > 0.0 && a < 1.0 / (2.0 * d as f64));
            assert_eq!((a * 64.0).fract(), 0.0);
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_drift() {
        let spec = GeneratorSpec::new(GeneratorKind::PlaquetteIid, dims(2, 8), 3).with_amplitude(0.0);
        let (_, v) = gen_plaquette_iid(&spec).unwrap();
        assert_eq!(v.max_abs(), 0.0);
    }

    #[test]
    fn amplitude_bound_is_enforced() {
        let spec = GeneratorSpec::new(GeneratorKind::PlaquetteIid, dims(2, 8), 3).with_amplitude(0.26);
        assert!(matches!(
            gen_plaquette_iid(&spec),
            Err(GenError::AmplitudeTooLarge { .. })
        ));
    }

    #[test]
    fn plaquette_max_drift_bound() {
        let spec = GeneratorSpec::new(GeneratorKind::PlaquetteIid, dims(2, 16), 11).with_amplitude(0.24);
        let (_, v) = gen_plaquette_iid(&spec).unwrap();
        assert!(v.max_abs() <= 0.96);
        assert!(validate_drift_with(&v, 0.0).passed());
    }

    #[test]
    fn plaquette_is_deterministic() {
        let spec = GeneratorSpec::new(GeneratorKind::PlaquetteIid, dims(3, 8), 42);
        let (h1, v1) = gen_plaquette_iid(&spec).unwrap();
        let (h2, v2) = gen_plaquette_iid(&spec).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(v1, v2);
    }

    #[test]
    fn constant_manhattan_orientations_cancel() {
        let dm = dims(2, 8);
        let o = ManhattanOrientations::constant(dm, &[1, -1]).unwrap();
        let m = manhattan_from_orientations(o).unwrap();
        for x in 0..dm.num_sites() {
            assert_eq!(m.drift.value(x, Direction::pos(0)), 1.0);
            assert_eq!(m.drift.value(x, Direction::neg(0)), -1.0);
            assert_eq!(m.drift.value(x, Direction::pos(1)), -1.0);
            assert_eq!(m.drift.value(x, Direction::neg(1)), 1.0);
        }
        let r = validate_drift_with(&m.drift, 0.0);
        assert_eq!(r.get(CheckKind::Divergence).residual, 0.0);
        assert_eq!(r.get(CheckKind::Antisymmetry).residual, 0.0);
        // constant orientations carry a net drift
        assert_eq!(m.warnings.len(), 2);
    }

    #[test]
    fn manhattan_phi_is_two_on_forward_rows() {
        let dm = dims(2, 8);
        let spec = GeneratorSpec::new(GeneratorKind::Manhattan, dm, 5);
        let m = gen_manhattan(&spec).unwrap();
        for x in 0..dm.num_sites() {
            let u = m.orientations.axis(0)[ManhattanOrientations::line_index(dm, x, 0)];
            let phi = m.drift.drift_vector(&dm.site(x));
            assert_eq!(phi[0], 2.0 * u as f64);
        }
    }

    #[test]
    fn balanced_manhattan_has_exact_zero_mean() {
        for d in 2..=4 {
            let spec = GeneratorSpec::new(GeneratorKind::Manhattan, dims(d, 6), 9);
            let m = gen_manhattan(&spec).unwrap();
            assert!(m.warnings.is_empty());
            for i in 0..d {
                assert_eq!(m.drift.positive(i).iter().sum::<f64>(), 0.0);
            }
            assert!(validate_drift_with(&m.drift, 0.0).exact());
        }
    }

    #[test]
    fn balanced_needs_even_lines() {
        let spec = GeneratorSpec::new(GeneratorKind::Manhattan, dims(2, 5), 1);
        assert!(matches!(
            gen_manhattan(&spec),
            Err(GenError::UnbalancedTorus { count: 5 })
        ));
    }

    #[test]
    fn unbalanced_manhattan_warns_on_net_drift() {
        let dm = dims(2, 8);
        for seed in 0..20 {
            let spec = GeneratorSpec::new(GeneratorKind::Manhattan, dm, seed).with_balanced(false);
            let m = gen_manhattan(&spec).unwrap();
            for axis in 0..2 {
                let s: i64 = m.orientations.axis(axis).iter().map(|&v| v as i64).sum();
                let warned = m.warnings.iter().any(|w| {
                    matches!(w, GeneratorWarning::NetDrift { axis: a, orientation_sum } if *a == axis && *orientation_sum == s)
                });
                assert_eq!(warned, s != 0);
            }
        }
    }

    #[test]
    fn constant_height_gives_zero_drift() {
        let psi = ScalarLatticeField::from_fn(dims(3, 4), |_| 7.0);
        let (_, v) = gen_height_field(&psi).unwrap();
        assert_eq!(v.max_abs(), 0.0);
    }

    #[test]
    fn alternating_height_is_lipschitz_and_bounded() {
        let dm = dims(2, 8);
        let psi = ScalarLatticeField::from_fn(dm, |y| (dm.coord(y, 0) % 2) as f64);
        let (_, v) = gen_height_field(&psi).unwrap();
        assert!(v.max_abs() <= 1.0);
        assert!(validate_drift_with(&v, 0.0).passed());
    }

    #[test]
    fn steep_height_is_rejected_with_edge() {
        let dm = dims(2, 4);
        let mut psi = ScalarLatticeField::zeros(dm);
        psi.values_mut()[dm.index_of(&Site { coords: vec![1, 2] })] = 3.0;
        match gen_height_field(&psi) {
            Err(GenError::NotLipschitz { from, to, .. }) => {
                assert!(from.contains("1.5,2.5") || to.contains("1.5,2.5"), "{from} {to}");
            }
            other => panic!("expected NotLipschitz, got {other:?}"),
        }
    }

    #[test]
    fn random_heights_are_lipschitz() {
        for d in 2..=4 {
            let psi = random_lipschitz_height(dims(d, 6), 17, 5);
            check_lipschitz(&psi).unwrap();
            let (_, v) = gen_height_field(&psi).unwrap();
            assert!(v.max_abs() <= 1.0);
        }
    }
}
