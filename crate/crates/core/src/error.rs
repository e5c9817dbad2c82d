use thiserror::Error;

use crate::validate::ValidationReport;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("dimension {0} not supported (expected 2..=5)")]
    UnsupportedDimension(usize),
    #[error("torus side {0} too small (need at least 4)")]
    SideTooSmall(usize),
    #[error("L^d too large for d={d}, L={side}")]
    TooManySites { d: usize, side: usize },
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("drift value {value} out of [-1,1] at site {site} direction {direction}")]
    OutOfRange {
        site: String,
        direction: String,
        value: f64,
    },
    #[error("field is not mean-zero (sum = {sum:e})")]
    NotMeanZero { sum: f64 },
    #[error("lattice dimensions differ: {0} vs {1}")]
    DimsMismatch(String, String),
    #[error("invalid drift field: {0}")]
    Invalid(Box<ValidationReport>),
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("amplitude {amplitude} exceeds 1/(2d) = {limit}")]
    AmplitudeTooLarge { amplitude: f64, limit: f64 },
    #[error("balanced Manhattan orientations need L^(d-1) even, got {count}")]
    UnbalancedTorus { count: usize },
    #[error("height field not 1-Lipschitz across dual edge {from} -> {to}: |{a} - {b}| > 1")]
    NotLipschitz {
        from: String,
        to: String,
        a: f64,
        b: f64,
    },
    #[error("orientation field for axis {axis} has {got} entries, expected {expected}")]
    OrientationShape {
        axis: usize,
        expected: usize,
        got: usize,
    },
    #[error("generator kind {0} needs an input file; use load_environment")]
    NeedsFile(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read environment file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("environment failed validation: {0}")]
    Validation(Box<ValidationReport>),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("operation needs record mode {needed}, trajectory has {found}")]
    RecordModeMismatch { needed: String, found: String },
    #[error("invalid walk configuration: {0}")]
    Config(String),
    #[error("rates at site {site} sum to {sum}, expected {expected}")]
    RateConservation { site: usize, sum: f64, expected: f64 },
}

#[derive(Debug, Error)]
pub enum CorrectorError {
    #[error("iterative solver stalled at relative residual {residual:e} after {iterations} iterations")]
    SolverDivergence { residual: f64, iterations: usize },
    #[error("environment chain is reducible: {count} communicating classes (sizes {sizes:?})")]
    Reducible { count: usize, sizes: Vec<usize> },
    #[error("resolvent parameter must be positive, got {0}")]
    BadLambda(f64),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {need} samples, got {got}")]
    InsufficientSamples { need: usize, got: usize },
    #[error("n_max = {n_max} exceeds the wrap-around guard (L/4)^2 = {limit}")]
    HorizonTooLong { n_max: usize, limit: usize },
    #[error("invalid input: {0}")]
    Input(String),
}
