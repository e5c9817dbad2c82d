//! Subcommand key tables, config files and resolved parameters.
//!
//! A config file is flat `key = value` text. Keys before the first
//! `[section]` apply to every subcommand that knows them; keys inside
//! `[name]` apply to subcommand `name` only. Every key is also a flag
//! (`lambda_grid` becomes `--lambda-grid`), and flags win over the file.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Text,
    Int,
    Float,
    Bool,
    Choice(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    Required,
    Optional,
    Value(&'static str),
}

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub kind: ValueKind,
    pub default: Fallback,
    pub help: &'static str,
}

impl Key {
    pub fn flag(&self) -> String {
        self.name.replace('_', "-")
    }
}

#[derive(Debug)]
pub struct CommandSpec {
    pub name: &'static str,
    pub about: &'static str,
    pub keys: &'static [Key],
}

impl CommandSpec {
    pub fn key(&self, name: &str) -> Option<&Key> {
        self.keys.iter().find(|k| k.name == name)
    }
}

const fn key(name: &'static str, kind: ValueKind, default: Fallback, help: &'static str) -> Key {
    Key {
        name,
        kind,
        default,
        help,
    }
}

use Fallback::{Optional, Required, Value};
use ValueKind::{Bool, Choice, Float, Int, Text};

const KINDS: &[&str] = &["plaquette_iid", "manhattan", "height_field", "from_file"];

const SEED: Key = key("seed", Int, Value("0"), "master seed");
const ENV: Key = key("env", Text, Required, "environment JSON file");
const OUT: Key = key("out", Text, Required, "output path");

pub static COMMANDS: &[CommandSpec] = &[
    CommandSpec {
        name: "generate",
        about: "Generate an environment and write it as JSON",
        keys: &[
            key("kind", Choice(KINDS), Required, "generator"),
            key("d", Int, Optional, "dimension"),
            key("L", Int, Optional, "torus side"),
            SEED,
            key("amplitude", Float, Optional, "plaquette amplitude (default: largest dyadic below 1/(2d))"),
            key("balanced", Bool, Value("true"), "Manhattan: half of the lines each way"),
            key("continuous", Bool, Value("false"), "plaquette: uniform values instead of two-point"),
            key("height_range", Int, Value("4"), "height field: range of the seed integers"),
            key("input", Text, Optional, "from_file: environment to load"),
            key("format", Choice(&["drift", "stream"]), Value("drift"), "stored representation"),
            OUT,
        ],
    },
    CommandSpec {
        name: "simulate",
        about: "Run walks and write endpoints as CSV",
        keys: &[
            key("env", Text, Required, "environment JSON file, or a comma-separated list"),
            key("walk", Choice(&["ctmc", "lazy"]), Value("ctmc"), "continuous-time or lazy walk"),
            key("T", Float, Optional, "time horizon (ctmc)"),
            key("steps", Int, Optional, "step count (lazy)"),
            key("samples", Int, Value("10000"), "trajectories per environment"),
            SEED,
            key("record", Choice(&["endpoint", "full_path", "decomposition"]), Value("endpoint"), "what to record"),
            key("start", Choice(&["uniform", "origin"]), Value("uniform"), "start site"),
            OUT,
        ],
    },
    CommandSpec {
        name: "rwrs",
        about: "Monte Carlo random-walk-in-random-scenery functional",
        keys: &[
            ENV,
            key("T", Float, Required, "time horizon"),
            key("samples", Int, Value("10000"), "walks"),
            SEED,
            OUT,
        ],
    },
    CommandSpec {
        name: "hminus",
        about: "Covariance spectrum, C~ and spectral identity residuals",
        keys: &[
            key("env", Text, Optional, "environment JSON file"),
            key("ensemble", Int, Value("0"), "average over this many generated environments"),
            key("kind", Choice(KINDS), Optional, "generator for the ensemble"),
            key("d", Int, Optional, "ensemble dimension"),
            key("L", Int, Optional, "ensemble torus side"),
            key("amplitude", Float, Optional, "ensemble plaquette amplitude"),
            key("balanced", Bool, Value("true"), "ensemble Manhattan balancing"),
            SEED,
            OUT,
        ],
    },
    CommandSpec {
        name: "corrector",
        about: "Solve the corrector equations and report sigma^2",
        keys: &[ENV, OUT],
    },
    CommandSpec {
        name: "kvdiag",
        about: "Resolvent diagnostics over a grid of lambda",
        keys: &[
            ENV,
            key("lambda_grid", Text, Value("1e-1:1e-8"), "a:b (decades), a:b:n (log-spaced) or a comma list"),
            OUT,
        ],
    },
    CommandSpec {
        name: "analyze",
        about: "Diffusivity report from simulated endpoints",
        keys: &[
            key("endpoints", Text, Required, "endpoint CSV, or a comma-separated list"),
            key("T", Text, Required, "horizon of each endpoint file"),
            key("env", Text, Optional, "environment JSON file"),
            key("ctilde", Text, Optional, "hminus report"),
            key("sigma", Text, Optional, "corrector report"),
            SEED,
            OUT,
        ],
    },
    CommandSpec {
        name: "heatkernel",
        about: "Exact lazy-walk heat kernel decay",
        keys: &[
            ENV,
            key("nmax", Int, Value("100"), "last step"),
            key("start", Int, Value("0"), "start site index"),
            key("out", Text, Required, "output path (.json for a JSON report, CSV otherwise)"),
        ],
    },
    CommandSpec {
        name: "isoperimetry",
        about: "Check 4d Q(S, S^c) = |boundary S| on random sets",
        keys: &[
            ENV,
            key("sets", Int, Value("100"), "number of random sets"),
            SEED,
            OUT,
        ],
    },
    CommandSpec {
        name: "plotdata",
        about: "Tidy CSV (and optional SVG) from an analyze, heatkernel or hminus report",
        keys: &[
            key("report", Text, Required, "report JSON"),
            key("svg", Text, Optional, "also write a line plot here"),
            OUT,
        ],
    },
    CommandSpec {
        name: "pipeline",
        about: "Run every section of a config file in order",
        keys: &[key("manifest", Text, Value("pipeline.manifest"), "combined manifest path")],
    },
    CommandSpec {
        name: "rerun",
        about: "Re-execute a manifest and compare outputs",
        keys: &[
            key("manifest", Text, Required, "manifest to replay"),
            key("check", Bool, Value("true"), "fail unless outputs match the recorded hashes"),
        ],
    },
];

/// Sections run by `pipeline`, in order.
pub const PIPELINE_ORDER: &[&str] = &[
    "generate",
    "hminus",
    "corrector",
    "kvdiag",
    "simulate",
    "rwrs",
    "analyze",
    "heatkernel",
    "isoperimetry",
    "plotdata",
];

pub fn command(name: &str) -> Option<&'static CommandSpec> {
    COMMANDS.iter().find(|c| c.name == name)
}

/// Parsed config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub global: BTreeMap<String, String>,
    pub sections: Vec<(String, BTreeMap<String, String>)>,
}

impl ConfigFile {
    pub fn section(&self, name: &str) -> Option<&BTreeMap<String, String>> {
        self.sections.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    /// `#` and `;` start comment lines.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = ConfigFile::default();
        let mut current: Option<usize> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').map(str::trim).ok_or_else(|| {
                    CliError::key(line, format!("line {}: malformed section header", lineno + 1))
                })?;
                if command(name).is_none() {
                    return Err(CliError::key(
                        name,
                        format!("line {}: unknown section [{name}]", lineno + 1),
                    ));
                }
                if cfg.section(name).is_some() {
                    return Err(CliError::key(
                        name,
                        format!("line {}: section [{name}] repeated", lineno + 1),
                    ));
                }
                cfg.sections.push((name.to_string(), BTreeMap::new()));
                current = Some(cfg.sections.len() - 1);
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::key(line, format!("line {}: expected key = value", lineno + 1))
            })?;
            let (k, v) = (k.trim().replace('-', "_"), v.trim().to_string());
            if k.is_empty() {
                return Err(CliError::key("", format!("line {}: empty key", lineno + 1)));
            }
            let map = match current {
                Some(i) => &mut cfg.sections[i].1,
                None => &mut cfg.global,
            };
            if map.insert(k.clone(), v).is_some() {
                return Err(CliError::key(&k, format!("line {}: key {k} repeated", lineno + 1)));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }
}

/// Fully resolved parameters of one subcommand.
#[derive(Debug, Clone)]
pub struct Params {
    pub command: &'static CommandSpec,
    pub values: BTreeMap<String, String>,
}

impl Params {
    /// Merges global keys, section keys and flag overrides, then checks
    /// names, types and required keys. Global keys unknown to the command
    /// are ignored; section and flag keys must be known.
    pub fn resolve(
        command: &'static CommandSpec,
        global: Option<&BTreeMap<String, String>>,
        section: Option<&BTreeMap<String, String>>,
        flags: &BTreeMap<String, String>,
    ) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        if let Some(g) = global {
            for (k, v) in g {
                if command.key(k).is_some() {
                    values.insert(k.clone(), v.clone());
                }
            }
        }
        for (k, v) in section.into_iter().flatten().chain(flags) {
            if command.key(k).is_none() {
                return Err(CliError::key(
                    k,
                    format!("unknown key {k:?} for {}", command.name),
                ));
            }
            values.insert(k.clone(), v.clone());
        }
        for key in command.keys {
            match (values.get(key.name), key.default) {
                (Some(v), _) => check_value(key, v)?,
                (None, Value(d)) => {
                    values.insert(key.name.to_string(), d.to_string());
                }
                (None, Required) => {
                    return Err(CliError::key(
                        key.name,
                        format!("missing required key {:?} for {}", key.name, command.name),
                    ))
                }
                (None, Optional) => {}
            }
        }
        Ok(Params { command, values })
    }

    pub fn has(&self, k: &str) -> bool {
        self.values.contains_key(k)
    }

    pub fn str(&self, k: &str) -> Result<&str, CliError> {
        self.values
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| CliError::key(k, format!("missing key {k:?}")))
    }

    pub fn opt_str(&self, k: &str) -> Option<&str> {
        self.values.get(k).map(String::as_str)
    }

    pub fn parse<T: std::str::FromStr>(&self, k: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.str(k)?;
        s.parse()
            .map_err(|e| CliError::key(k, format!("invalid value {s:?} for {k}: {e}")))
    }

    pub fn opt<T: std::str::FromStr>(&self, k: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if self.has(k) {
            self.parse(k).map(Some)
        } else {
            Ok(None)
        }
    }

    /// Canonical text: `[name]` then sorted `key = value` lines.
    pub fn canonical(&self) -> String {
        let mut s = format!("[{}]\n", self.command.name);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

fn check_value(key: &Key, v: &str) -> Result<(), CliError> {
    let bad = |what: &str| {
        Err(CliError::key(
            key.name,
            format!("invalid value {v:?} for {}: expected {what}", key.name),
        ))
    };
    match key.kind {
        Text => {
            if v.is_empty() {
                return bad("a non-empty value");
            }
        }
        Int => {
            if v.parse::<u64>().is_err() {
                return bad("a non-negative integer");
            }
        }
        Float => match v.parse::<f64>() {
            Ok(x) if x.is_finite() => {}
            _ => return bad("a finite number"),
        },
        Bool => {
            if v != "true" && v != "false" {
                return bad("true or false");
            }
        }
        Choice(opts) => {
            if !opts.contains(&v) {
                return bad(&format!("one of {}", opts.join(", ")));
            }
        }
    }
    Ok(())
}

/// SHA-256 over the canonical text of every section.
pub fn config_hash(sections: &[Params]) -> String {
    let mut h = Sha256::new();
    for p in sections {
        h.update(p.canonical().as_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn sections_and_globals() {
        let cfg = ConfigFile::parse(
            "seed = 5\n# note\n[generate]\nkind = manhattan\nd = 2\nL = 8\nout = e.json\n",
        )
        .unwrap();
        assert_eq!(cfg.global["seed"], "5");
        let p = Params::resolve(
            command("generate").unwrap(),
            Some(&cfg.global),
            cfg.section("generate"),
            &flags(&[("L", "16")]),
        )
        .unwrap();
        assert_eq!(p.values["seed"], "5");
        assert_eq!(p.values["L"], "16");
        assert_eq!(p.values["balanced"], "true");
        assert!(!p.has("amplitude"));
    }

    #[test]
    fn errors_name_the_key() {
        let cmd = command("generate").unwrap();
        let err = |f: &[(&str, &str)]| match Params::resolve(cmd, None, None, &flags(f)) {
            Err(CliError::Invalid { key, .. }) => key.unwrap(),
            other => panic!("{other:?}"),
        };
        assert_eq!(err(&[("kind", "manhattan")]), "out");
        assert_eq!(err(&[("kind", "spiral"), ("out", "x")]), "kind");
        assert_eq!(err(&[("kind", "manhattan"), ("out", "x"), ("d", "two")]), "d");
        assert_eq!(err(&[("kind", "manhattan"), ("out", "x"), ("colour", "red")]), "colour");
        match ConfigFile::parse("[generate]\nkind manhattan\n") {
            Err(CliError::Invalid { key: Some(k), .. }) => assert_eq!(k, "kind manhattan"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_ignores_key_order() {
        let cmd = command("corrector").unwrap();
        let a = Params::resolve(cmd, None, None, &flags(&[("env", "e"), ("out", "o")])).unwrap();
        let b = Params::resolve(cmd, None, None, &flags(&[("out", "o"), ("env", "e")])).unwrap();
        assert_eq!(config_hash(std::slice::from_ref(&a)), config_hash(&[b]));
        let c = Params::resolve(cmd, None, None, &flags(&[("env", "f"), ("out", "o")])).unwrap();
        assert_ne!(config_hash(&[a]), config_hash(&[c]));
    }
}
