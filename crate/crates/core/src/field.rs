//! Lattice fields on the torus: scalar fields, drift fields and stream tensors.
//!
//! Drift fields store only `V_{e_i}(x)`; the values for `-e_i` follow from
//! edge antisymmetry `V_{-e_i}(x) = -V_{e_i}(x - e_i)`. Stream tensors store only
//! `H_{e_i,e_j}(x)` for `i < j` and derive every other index pair from the
//! antisymmetry and shift symmetries. Nothing derived is ever stored.

use serde::{Deserialize, Serialize};

use crate::error::EnvError;
use crate::lattice::{Direction, LatticeDims, Site};

/// One real value per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarLatticeField {
    dims: LatticeDims,
    values: Vec<f64>,
}

impl ScalarLatticeField {
    pub fn new(dims: LatticeDims, values: Vec<f64>) -> Result<Self, EnvError> {
        if values.len() != dims.num_sites() {
            return Err(EnvError::ShapeMismatch {
                expected: dims.num_sites(),
                got: values.len(),
            });
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: LatticeDims) -> Self {
        Self {
            dims,
            values: vec![0.0; dims.num_sites()],
        }
    }

    pub fn from_fn(dims: LatticeDims, f: impl Fn(usize) -> f64) -> Self {
        Self {
            dims,
            values: (0..dims.num_sites()).map(f).collect(),
        }
    }

    pub fn dims(&self) -> LatticeDims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sum(&self) -> f64 {
        crate::exact::exact_sum(self.values.iter().copied())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `|sum_x f(x)| <= 1e-10 * L^d * max|f|`.
    pub fn is_mean_zero(&self) -> bool {
        let tol = 1e-10 * self.values.len() as f64 * self.max_abs();
        self.sum().abs() <= tol
    }

    /// Subtracts the spatial mean.
    pub fn centered(mut self) -> Self {
        let mean = self.sum() / self.values.len() as f64;
        self.values.iter_mut().for_each(|v| *v -= mean);
        self
    }

    /// Torus inner product normalized by `L^-d`.
    pub fn inner(&self, other: &Self) -> f64 {
        inner(&self.values, &other.values)
    }

    pub fn norm2(&self) -> f64 {
        self.inner(self)
    }
}

/// `L^-d sum_x f(x) g(x)`.
pub fn inner(f: &[f64], g: &[f64]) -> f64 {
    debug_assert_eq!(f.len(), g.len());
    f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / f.len() as f64
}

/// A periodic drift field given by `V_{e_i}(x)` for each positive direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftField {
    dims: LatticeDims,
    /// `positive[i][x] = V_{e_i}(x)`
    positive: Vec<Vec<f64>>,
}

impl DriftField {
    pub fn new(dims: LatticeDims, positive: Vec<Vec<f64>>) -> Result<Self, EnvError> {
        if positive.len() != dims.d() {
            return Err(EnvError::ShapeMismatch {
                expected: dims.d(),
                got: positive.len(),
            });
        }
        for comp in &positive {
            if comp.len() != dims.num_sites() {
                return Err(EnvError::ShapeMismatch {
                    expected: dims.num_sites(),
                    got: comp.len(),
                });
            }
        }
        Ok(Self { dims, positive })
    }

    pub fn zero(dims: LatticeDims) -> Self {
        Self {
            dims,
            positive: vec![vec![0.0; dims.num_sites()]; dims.d()],
        }
    }

    pub fn dims(&self) -> LatticeDims {
        self.dims
    }

    /// Stored component `V_{e_axis}` over all sites.
    pub fn positive(&self, axis: usize) -> &[f64] {
        &self.positive[axis]
    }

    pub fn positive_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.positive[axis]
    }

    /// `V_k(x)` for any step `k`, by site index.
    #[inline]
    pub fn value(&self, x: usize, k: Direction) -> f64 {
        if k.is_positive() {
            self.positive[k.axis()][x]
        } else {
            -self.positive[k.axis()][self.dims.neighbor(x, k)]
        }
    }

    /// `V_k(x)` for any step `k`.
    pub fn expand_drift(&self, x: &Site, k: Direction) -> f64 {
        self.value(self.dims.index_of(x), k)
    }

    /// The full field `x -> V_k(x)`.
    pub fn component(&self, k: Direction) -> Vec<f64> {
        (0..self.dims.num_sites()).map(|x| self.value(x, k)).collect()
    }

    /// Local drift `phi(x) = sum_k k V_k(x)`; `phi_i = V_{e_i} - V_{-e_i}`.
    pub fn drift_vector(&self, x: &Site) -> Vec<f64> {
        let idx = self.dims.index_of(x);
        (0..self.dims.d())
            .map(|i| self.phi_at(idx, i))
            .collect()
    }

    #[inline]
    pub fn phi_at(&self, x: usize, axis: usize) -> f64 {
        self.value(x, Direction::pos(axis)) - self.value(x, Direction::neg(axis))
    }

    /// The scalar field `phi_i`.
    pub fn phi(&self, axis: usize) -> ScalarLatticeField {
        ScalarLatticeField::from_fn(self.dims, |x| self.phi_at(x, axis))
    }

    /// Jump rate `1 + V_k(x)`.
    #[inline]
    pub fn rate(&self, x: usize, k: Direction) -> f64 {
        1.0 + self.value(x, k)
    }

    pub fn max_abs(&self) -> f64 {
        self.positive
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Antisymmetric stream tensor `H_{k,l}(x)` stored as `H_{e_i,e_j}` for `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamTensorField {
    dims: LatticeDims,
    /// indexed by [`pair_index`]
    pairs: Vec<Vec<f64>>,
}

/// Position of the axis pair `(i, j)`, `i < j`, in lexicographic order.
pub fn pair_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < d);
    // pairs before row i: sum_{r<i} (d-1-r)
    i * (2 * d - i - 1) / 2 + (j - i - 1)
}

/// All axis pairs `i < j` in storage order.
pub fn axis_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(d * (d - 1) / 2);
    for i in 0..d {
        for j in i + 1..d {
            out.push((i, j));
        }
    }
    out
}

impl StreamTensorField {
    pub fn new(dims: LatticeDims, pairs: Vec<Vec<f64>>) -> Result<Self, EnvError> {
        let d = dims.d();
        let npairs = d * (d - 1) / 2;
        if pairs.len() != npairs {
            return Err(EnvError::ShapeMismatch {
                expected: npairs,
                got: pairs.len(),
            });
        }
        for p in &pairs {
            if p.len() != dims.num_sites() {
                return Err(EnvError::ShapeMismatch {
                    expected: dims.num_sites(),
                    got: p.len(),
                });
            }
        }
        Ok(Self { dims, pairs })
    }

    pub fn zero(dims: LatticeDims) -> Self {
        let d = dims.d();
        Self {
            dims,
            pairs: vec![vec![0.0; dims.num_sites()]; d * (d - 1) / 2],
        }
    }

    pub fn dims(&self) -> LatticeDims {
        self.dims
    }

    /// Stored component `H_{e_i,e_j}` for `i < j`.
    pub fn pair(&self, i: usize, j: usize) -> &[f64] {
        &self.pairs[pair_index(self.dims.d(), i, j)]
    }

    pub fn pair_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let p = pair_index(self.dims.d(), i, j);
        &mut self.pairs[p]
    }

    pub fn stored(&self) -> &[Vec<f64>] {
        &self.pairs
    }

    /// `H_{e_i,e_j}(x)` for any ordered pair of distinct axes.
    #[inline]
    fn positive_pair(&self, x: usize, i: usize, j: usize) -> f64 {
        if i < j {
            self.pair(i, j)[x]
        } else {
            -self.pair(j, i)[x]
        }
    }

    /// `H_{k,l}(x)` for arbitrary steps, by site index.
    ///
    /// `H_{s e_i, t e_j}(x) = s t H_{e_i,e_j}(x - [s<0] e_i - [t<0] e_j)`, and
    /// `H_{k,l} = 0` whenever `k` and `l` share an axis.
    pub fn value(&self, x: usize, k: Direction, l: Direction) -> f64 {
        if k.axis() == l.axis() {
            return 0.0;
        }
        let mut y = x;
        if !k.is_positive() {
            y = self.dims.neighbor(y, k);
        }
        if !l.is_positive() {
            y = self.dims.neighbor(y, l);
        }
        k.sign() * l.sign() * self.positive_pair(y, k.axis(), l.axis())
    }

    pub fn expand(&self, x: &Site, k: Direction, l: Direction) -> f64 {
        self.value(self.dims.index_of(x), k, l)
    }

    /// The drift `V_k(x) = sum_l H_{k,l}(x)`.
    ///
    /// Pairs `l = ±e_j` are combined first, `H_{e_i,e_j}(x) - H_{e_i,e_j}(x - e_j)`,
    /// so dyadic inputs give exact outputs. Values within the float tolerance
    /// of `±1` are clamped.
    pub fn curl(&self) -> Result<DriftField, EnvError> {
        let dims = self.dims;
        let d = dims.d();
        let n = dims.num_sites();
        let mut positive = vec![vec![0.0; n]; d];
        for (i, comp) in positive.iter_mut().enumerate() {
            for (x, out) in comp.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in (0..d).filter(|&j| j != i) {
                    let back = dims.neighbor(x, Direction::neg(j));
                    acc += self.positive_pair(x, i, j) - self.positive_pair(back, i, j);
                }
                if acc.abs() > 1.0 + crate::validate::FLOAT_TOL {
                    return Err(EnvError::OutOfRange {
                        site: dims.site(x).to_string(),
                        direction: Direction::pos(i).to_string(),
                        value: acc,
                    });
                }
                // roundoff above |V| = 1 from float tensors
                *out = acc.clamp(-1.0, 1.0);
            }
        }
        DriftField::new(dims, positive)
    }

    pub fn max_abs(&self) -> f64 {
        self.pairs
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(d: usize, l: usize) -> LatticeDims {
        LatticeDims::new(d, l).unwrap()
    }

    #[test]
    fn pair_indexing() {
        for d in 2..=5 {
            for (p, (i, j)) in axis_pairs(d).into_iter().enumerate() {
                assert_eq!(pair_index(d, i, j), p);
            }
        }
    }

    #[test]
    fn zero_field_expands_to_zero() {
        let v = DriftField::zero(dims(3, 4));
        for x in 0..64 {
            for k in Direction::all(3) {
                assert_eq!(v.value(x, k), 0.0);
            }
        }
    }

    #[test]
    fn negative_direction_is_forced() {
        let dm = dims(2, 4);
        let mut v = DriftField::zero(dm);
        v.positive_mut(0)[0] = 0.25;
        // x = e_1 has coordinates (1, 0)
        let x = Site { coords: vec![1, 0] };
        assert_eq!(v.expand_drift(&x, Direction::neg(0)), -0.25);
    }

    #[test]
    fn single_plaquette_curl() {
        // H_{e1,e2}(0) = 1/4: an oriented unit cycle 0 -> e1 -> e1+e2 -> e2 -> 0
        let dm = dims(2, 4);
        let mut h = StreamTensorField::zero(dm);
        h.pair_mut(0, 1)[0] = 0.25;
        let v = h.curl().unwrap();
        let at = |c: [usize; 2], k: Direction| v.expand_drift(&Site { coords: c.to_vec() }, k);
        assert_eq!(at([0, 0], Direction::pos(0)), 0.25);
        assert_eq!(at([0, 1], Direction::pos(0)), -0.25);
        assert_eq!(at([0, 0], Direction::pos(1)), -0.25);
        assert_eq!(at([1, 0], Direction::pos(1)), 0.25);
        assert_eq!(at([1, 0], Direction::neg(0)), -0.25);
        assert_eq!(at([1, 1], Direction::neg(0)), 0.25);
        assert_eq!(at([0, 1], Direction::neg(1)), 0.25);
        assert_eq!(at([1, 1], Direction::neg(1)), -0.25);
        let nonzero = (0..16)
            .flat_map(|x| Direction::all(2).map(move |k| (x, k)))
            .filter(|&(x, k)| v.value(x, k) != 0.0)
            .count();
        assert_eq!(nonzero, 8);
    }

    #[test]
    fn tensor_symmetries_hold_exhaustively() {
        let dm = dims(3, 4);
        let n = dm.num_sites();
        let pairs = (0..3)
            .map(|p| (0..n).map(|x| ((x * 7 + p * 3) % 5) as f64 / 8.0 - 0.25).collect())
            .collect();
        let h = StreamTensorField::new(dm, pairs).unwrap();
        for x in 0..n {
            for k in Direction::all(3) {
                for l in Direction::all(3) {
                    let hkl = h.value(x, k, l);
                    assert_eq!(h.value(x, l, k), -hkl);
                    let xk = dm.neighbor(x, k.reverse());
                    assert_eq!(h.value(x, k.reverse(), l), -h.value(xk, k, l));
                    let xl = dm.neighbor(x, l.reverse());
                    assert_eq!(h.value(x, k, l.reverse()), -h.value(xl, k, l));
                }
            }
        }
    }
}
