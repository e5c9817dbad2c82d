//! Run manifests.
//!
//! A manifest is a config file whose comment header records the tool
//! version, the config hash and the SHA-256 of every output, so it can be
//! fed back to `rerun` as is:
//!
//! ```text
//! # divfree manifest
//! # version = 0.1.0
//! # config_hash = 3f1c...
//! # seed = 7
//! # output = 9ab0...  env.json
//! [generate]
//! L = 16
//! ...
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::{config_hash, ConfigFile, Params};
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn file_sha256(path: &str) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Extra `# name = value` header lines.
pub type Notes = Vec<(String, String)>;

pub fn render(sections: &[Params], outputs: &[String], notes: &Notes) -> Result<String, CliError> {
    let mut s = String::from("# divfree manifest\n");
    s.push_str(&format!("# version = {VERSION}\n"));
    s.push_str(&format!("# config_hash = {}\n", config_hash(sections)));
    for p in sections {
        if let Some(seed) = p.opt_str("seed") {
            s.push_str(&format!("# seed = {} {seed}\n", p.command.name));
        }
    }
    for (k, v) in notes {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    for out in outputs {
        s.push_str(&format!("# output = {}  {out}\n", file_sha256(out)?));
    }
    for p in sections {
        s.push_str(&p.canonical());
    }
    Ok(s)
}

pub fn write(
    path: &str,
    sections: &[Params],
    outputs: &[String],
    notes: &Notes,
) -> Result<(), CliError> {
    let text = render(sections, outputs, notes)?;
    if let Some(dir) = Path::new(path).parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(path, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub config: ConfigFile,
    pub config_hash: Option<String>,
    /// `(sha256, path)` pairs.
    pub outputs: Vec<(String, String)>,
}

pub fn parse(text: &str) -> Result<Manifest, CliError> {
    let config = ConfigFile::parse(text)?;
    let mut config_hash = None;
    let mut outputs = Vec::new();
    for line in text.lines() {
        let Some(rest) = line.trim().strip_prefix('#') else {
            continue;
        };
        let Some((k, v)) = rest.split_once('=') else {
            continue;
        };
        match k.trim() {
            "config_hash" => config_hash = Some(v.trim().to_string()),
            "output" => {
                let (sha, p) = v.trim().split_once("  ").ok_or_else(|| {
                    CliError::key("output", format!("malformed output line {line:?}"))
                })?;
                outputs.push((sha.to_string(), p.to_string()));
            }
            _ => {}
        }
    }
    Ok(Manifest {
        config,
        config_hash,
        outputs,
    })
}

pub fn load(path: &str) -> Result<Manifest, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::command;
    use std::collections::BTreeMap;

    #[test]
    fn render_then_parse() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o.txt").to_string_lossy().into_owned();
        std::fs::write(&out, "abc").unwrap();
        let flags: BTreeMap<String, String> = [("env", "e.json"), ("out", out.as_str())]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let p = Params::resolve(command("corrector").unwrap(), None, None, &flags).unwrap();
        let text = render(std::slice::from_ref(&p), std::slice::from_ref(&out), &vec![]).unwrap();
        let m = parse(&text).unwrap();
        assert_eq!(m.config_hash.unwrap(), config_hash(&[p]));
        assert_eq!(
            m.outputs,
            vec![(
                "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad".to_string(),
                out
            )]
        );
        assert_eq!(m.config.section("corrector").unwrap()["env"], "e.json");
    }
}
