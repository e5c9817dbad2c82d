//! Torus geometry: dimensions, sites and the nearest-neighbour step set.
//!
//! Sites are addressed by a flat row-major index: the last coordinate varies
//! fastest, so `index = sum_i x_i * L^(d-1-i)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::EnvError;

/// Smallest supported torus side.
pub const MIN_SIDE: usize = 4;
/// Supported dimensions.
pub const DIMS: std::ops::RangeInclusive<usize> = 2..=5;
/// Largest number of sites we are willing to address (keeps `i64` coordinate
/// arithmetic and `u32` row pointers comfortable).
pub const MAX_SITES: usize = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeDims {
    d: usize,
    #[serde(rename = "L")]
    side: usize,
}

impl LatticeDims {
    pub fn new(d: usize, side: usize) -> Result<Self, EnvError> {
        if !DIMS.contains(&d) {
            return Err(EnvError::UnsupportedDimension(d));
        }
        if side < MIN_SIDE {
            return Err(EnvError::SideTooSmall(side));
        }
        match side.checked_pow(d as u32) {
            Some(n) if n <= MAX_SITES => Ok(Self { d, side }),
            _ => Err(EnvError::TooManySites { d, side }),
        }
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn num_sites(&self) -> usize {
        self.side.pow(self.d as u32)
    }

    /// Index distance between sites that differ by one along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.d - 1 - axis) as u32)
    }

    #[inline]
    pub fn coord(&self, index: usize, axis: usize) -> usize {
        (index / self.stride(axis)) % self.side
    }

    pub fn site(&self, index: usize) -> Site {
        Site {
            coords: (0..self.d).map(|a| self.coord(index, a)).collect(),
        }
    }

    pub fn index_of(&self, site: &Site) -> usize {
        debug_assert_eq!(site.coords.len(), self.d);
        site.coords
            .iter()
            .fold(0, |acc, &c| acc * self.side + (c % self.side))
    }

    /// Index of `index + k` on the torus.
    #[inline]
    pub fn neighbor(&self, index: usize, k: Direction) -> usize {
        let stride = self.stride(k.axis());
        let c = (index / stride) % self.side;
        if k.is_positive() {
            if c + 1 == self.side {
                index - (self.side - 1) * stride
            } else {
                index + stride
            }
        } else if c == 0 {
            index + (self.side - 1) * stride
        } else {
            index - stride
        }
    }

    /// All `2d` unit steps, ordered `+e_0, -e_0, +e_1, -e_1, ...`.
    pub fn directions(&self) -> impl Iterator<Item = Direction> + Clone {
        Direction::all(self.d)
    }

    /// Index of the site obtained by adding an arbitrary integer offset.
    pub fn offset(&self, index: usize, offset: &[i64]) -> usize {
        let l = self.side as i64;
        let mut out = 0usize;
        for (axis, &o) in offset.iter().enumerate() {
            let c = self.coord(index, axis) as i64;
            out = out * self.side + (c + o).rem_euclid(l) as usize;
        }
        out
    }
}

impl fmt::Display for LatticeDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} L={}", self.d, self.side)
    }
}

/// A torus site with canonical coordinates in `[0, L)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    pub coords: Vec<usize>,
}

impl Site {
    pub fn origin(d: usize) -> Self {
        Self { coords: vec![0; d] }
    }

    /// Reduces arbitrary integer coordinates modulo `side`.
    pub fn wrapped(coords: &[i64], side: usize) -> Self {
        Self {
            coords: coords
                .iter()
                .map(|&c| c.rem_euclid(side as i64) as usize)
                .collect(),
        }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A unit step `±e_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Direction {
    axis: u8,
    negative: bool,
}

impl Direction {
    pub fn new(axis: usize, positive: bool) -> Self {
        Self {
            axis: axis as u8,
            negative: !positive,
        }
    }

    pub fn pos(axis: usize) -> Self {
        Self::new(axis, true)
    }

    pub fn neg(axis: usize) -> Self {
        Self::new(axis, false)
    }

    pub fn all(d: usize) -> impl Iterator<Item = Direction> + Clone {
        (0..2 * d).map(Direction::from_index)
    }

    /// Inverse of [`Direction::index`].
    #[inline]
    pub fn from_index(i: usize) -> Self {
        Self {
            axis: (i / 2) as u8,
            negative: i % 2 == 1,
        }
    }

    /// Position in the `+e_0, -e_0, +e_1, ...` ordering.
    #[inline]
    pub fn index(self) -> usize {
        2 * self.axis as usize + self.negative as usize
    }

    #[inline]
    pub fn axis(self) -> usize {
        self.axis as usize
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        !self.negative
    }

    #[inline]
    pub fn sign(self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }

    #[inline]
    pub fn reverse(self) -> Self {
        Self {
            axis: self.axis,
            negative: !self.negative,
        }
    }

    /// Coordinate `k_i` of the step vector.
    #[inline]
    pub fn component(self, i: usize) -> i64 {
        if i == self.axis as usize {
            if self.negative {
                -1
            } else {
                1
            }
        } else {
            0
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.negative { '-' } else { '+' };
        write!(f, "{s}e{}", self.axis + 1)
    }
}
