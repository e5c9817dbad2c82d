//! Environment file format.
//!
//! ```json
//! {"dims": {"d": 2, "L": 4}, "kind": "drift", "data": ["0.25", "-0.25", ...]}
//! ```
//!
//! `data` is a flat row-major array with shape `[L; d] ++ [components]`:
//! sites in row-major order (last coordinate fastest) and, within a site, the
//! stored components in axis order (`V_{e_1}..V_{e_d}` for drifts,
//! `H_{e_i,e_j}` for `i < j` in lexicographic order for stream tensors).
//! Values are decimal strings in shortest round-trip form, so every double
//! (in particular every dyadic rational) survives a save/load cycle bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EnvError, LoadError};
use crate::field::{DriftField, StreamTensorField};
use crate::lattice::LatticeDims;
use crate::validate::{validate_drift, CheckKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Drift,
    Stream,
}

#[derive(Serialize, Deserialize)]
struct DimsJson {
    d: usize,
    #[serde(rename = "L")]
    side: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvJson {
    dims: DimsJson,
    kind: EnvKind,
    data: Vec<String>,
}

/// Either kind of environment file content.
#[derive(Debug, Clone, PartialEq)]
pub enum Environment {
    Drift(DriftField),
    Stream(StreamTensorField),
}

impl Environment {
    pub fn dims(&self) -> LatticeDims {
        match self {
            Environment::Drift(v) => v.dims(),
            Environment::Stream(h) => h.dims(),
        }
    }

    /// The drift field, taking the curl for stream tensors.
    pub fn drift(&self) -> Result<DriftField, EnvError> {
        match self {
            Environment::Drift(v) => Ok(v.clone()),
            Environment::Stream(h) => h.curl(),
        }
    }
}

fn interleave(components: &[Vec<f64>]) -> Vec<String> {
    let n = components.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(n * components.len());
    for x in 0..n {
        for c in components {
            out.push(format_value(c[x]));
        }
    }
    out
}

/// Shortest decimal string that parses back to the same double.
pub fn format_value(v: f64) -> String {
    // Rust's `Display` for f64 is shortest round-trip.
    format!("{v}")
}

pub fn drift_to_json(v: &DriftField) -> String {
    let dims = v.dims();
    let comps: Vec<Vec<f64>> = (0..dims.d()).map(|i| v.positive(i).to_vec()).collect();
    to_json(dims, EnvKind::Drift, &comps)
}

pub fn stream_to_json(h: &StreamTensorField) -> String {
    to_json(h.dims(), EnvKind::Stream, h.stored())
}

pub fn environment_to_json(env: &Environment) -> String {
    match env {
        Environment::Drift(v) => drift_to_json(v),
        Environment::Stream(h) => stream_to_json(h),
    }
}

fn to_json(dims: LatticeDims, kind: EnvKind, comps: &[Vec<f64>]) -> String {
    let doc = EnvJson {
        dims: DimsJson {
            d: dims.d(),
            side: dims.side(),
        },
        kind,
        data: interleave(comps),
    };
    serde_json::to_string(&doc).expect("environment documents always serialize")
}

/// Parses and validates an environment document.
pub fn parse_environment(text: &str) -> Result<Environment, LoadError> {
    let doc: EnvJson = serde_json::from_str(text).map_err(|e| LoadError::Parse(e.to_string()))?;
    let dims = LatticeDims::new(doc.dims.d, doc.dims.side)?;
    let d = dims.d();
    let ncomp = match doc.kind {
        EnvKind::Drift => d,
        EnvKind::Stream => d * (d - 1) / 2,
    };
    let n = dims.num_sites();
    if doc.data.len() != n * ncomp {
        return Err(LoadError::Parse(format!(
            "data has {} entries, expected {} (L^d = {n} sites x {ncomp} components)",
            doc.data.len(),
            n * ncomp
        )));
    }
    let mut comps = vec![Vec::with_capacity(n); ncomp];
    for (pos, s) in doc.data.iter().enumerate() {
        let value: f64 = s
            .trim()
            .parse()
            .map_err(|_| LoadError::Parse(format!("data[{pos}] = {s:?} is not a number")))?;
        if !value.is_finite() {
            return Err(LoadError::Parse(format!("data[{pos}] is not finite")));
        }
        comps[pos % ncomp].push(value);
    }
    let env = match doc.kind {
        EnvKind::Drift => Environment::Drift(DriftField::new(dims, comps)?),
        EnvKind::Stream => Environment::Stream(StreamTensorField::new(dims, comps)?),
    };
    let drift = match env.drift() {
        Ok(v) => v,
        Err(EnvError::OutOfRange { .. }) => {
            // surface the bound violation through the full report
            let h = match &env {
                Environment::Stream(h) => h,
                Environment::Drift(_) => unreachable!("drift fields have no curl step"),
            };
            let v = unchecked_curl(h);
            return Err(LoadError::Validation(Box::new(validate_drift(&v))));
        }
        Err(e) => return Err(e.into()),
    };
    let report = validate_drift(&drift);
    if !report.passed() {
        return Err(LoadError::Validation(Box::new(report)));
    }
    debug_assert!(report.get(CheckKind::Divergence).passed);
    Ok(env)
}

fn unchecked_curl(h: &StreamTensorField) -> DriftField {
    use crate::lattice::Direction;
    let dims = h.dims();
    let d = dims.d();
    let comps = (0..d)
        .map(|i| {
            (0..dims.num_sites())
                .map(|x| {
                    Direction::all(d)
                        .map(|l| h.value(x, Direction::pos(i), l))
                        .sum()
                })
                .collect()
        })
        .collect();
    DriftField::new(dims, comps).expect("shape follows dims")
}

pub fn load_environment(path: impl AsRef<Path>) -> Result<Environment, LoadError> {
    let text = fs::read_to_string(path)?;
    parse_environment(&text)
}

pub fn save_environment(path: impl AsRef<Path>, env: &Environment) -> std::io::Result<()> {
    fs::write(path, environment_to_json(env))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_file_is_a_parse_error() {
        let v = DriftField::zero(LatticeDims::new(2, 4).unwrap());
        let json = drift_to_json(&v);
        let cut = &json[..json.len() / 2];
        assert!(matches!(parse_environment(cut), Err(LoadError::Parse(_))));
    }

    #[test]
    fn wrong_length_is_a_parse_error() {
        let text = r#"{"dims":{"d":2,"L":4},"kind":"drift","data":["0"]}"#;
        assert!(matches!(parse_environment(text), Err(LoadError::Parse(_))));
    }

    #[test]
    fn divergence_violation_names_site() {
        let dims = LatticeDims::new(2, 4).unwrap();
        let mut v = DriftField::zero(dims);
        v.positive_mut(0)[dims.index_of(&crate::lattice::Site { coords: vec![2, 3] })] = 0.5;
        match parse_environment(&drift_to_json(&v)) {
            Err(LoadError::Validation(r)) => {
                let div = r.get(CheckKind::Divergence);
                assert!(!div.passed);
                assert_eq!(div.site.as_deref(), Some(&[2usize, 3][..]));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn value_strings_roundtrip() {
        for v in [0.1, 15.0 / 64.0, -1.0, 1e-300, 1.0 / 3.0] {
            assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
        }
    }
}
