//! Random walks in periodic divergence-free drift fields.
//!
//! The crate covers the whole numerical chain on a `d`-dimensional torus of
//! side `L`: admissible environments and their generators, the Fourier
//! multiplier calculus with the stream-tensor decomposition and the H₋₁
//! functional, walk simulation, the exact corrector problem and the
//! statistical checks built on top of them.


pub mod corrector;
pub mod error;
pub mod exact;
pub mod field;
pub mod generators;
pub mod io;
pub mod lattice;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod walker;

pub mod validate;


pub use error::{CorrectorError, EnvError, GenError, LoadError, StatsError, WalkError};
pub use field::{DriftField, ScalarLatticeField, StreamTensorField};
pub use lattice::{Direction, LatticeDims, Site};
