//! Command line driver for the `divfree` toolkit.
//!
//! Every run writes `<out>.manifest` next to its primary output. Feeding a
//! manifest to `divfree rerun` repeats the run and checks that every output
//! is byte-identical.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::collections::BTreeMap;
use std::ffi::OsString;

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::{Arg, ArgMatches, Command};

use config::{command, config_hash, CommandSpec, ConfigFile, Params, COMMANDS, PIPELINE_ORDER};
use error::CliError;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "DIVFREE_WORKERS";

fn cli() -> Command {
    let mut cmd = Command::new("divfree")
        .version(manifest::VERSION)
        .about("Random walks in divergence-free random environments")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for spec in COMMANDS {
        let mut sub = Command::new(spec.name)
            .about(spec.about)
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("FILE")
                    .help("config file; flags override its values"),
            )
            .arg(
                Arg::new("workers")
                    .long("workers")
                    .value_name("N")
                    .help("worker threads (default: $DIVFREE_WORKERS or all cores)"),
            );
        for k in spec.keys {
            sub = sub.arg(
                Arg::new(k.name)
                    .long(&*Box::leak(k.flag().into_boxed_str()))
                    .value_name("VALUE")
                    .help(k.help),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn clap_error(e: clap::Error) -> CliError {
    let key = match e.get(ContextKind::InvalidArg) {
        Some(ContextValue::String(s)) => s
            .trim_start_matches('-')
            .split([' ', '='])
            .next()
            .unwrap_or("")
            .replace('-', "_"),
        _ => String::new(),
    };
    let message = e
        .to_string()
        .lines()
        .next()
        .unwrap_or("invalid arguments")
        .trim_start_matches("error: ")
        .to_string();
    CliError::Invalid {
        key: (!key.is_empty()).then_some(key),
        message,
    }
}

fn flags(spec: &CommandSpec, m: &ArgMatches) -> BTreeMap<String, String> {
    spec.keys
        .iter()
        .filter_map(|k| {
            m.get_one::<String>(k.name)
                .map(|v| (k.name.to_string(), v.clone()))
        })
        .collect()
}

fn workers(flag: Option<&String>, cfg: Option<&String>) -> Result<usize, CliError> {
    let (src, key) = match (flag, cfg) {
        (Some(v), _) | (None, Some(v)) => (Some(v.clone()), "workers"),
        (None, None) => (std::env::var(WORKERS_ENV).ok(), WORKERS_ENV),
    };
    match src {
        None => Ok(0),
        Some(s) => s
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::key(key, format!("invalid worker count {s:?}"))),
    }
}

fn in_pool<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Runtime {
            key: Some("workers".into()),
            message: e.to_string(),
        })?;
    Ok(pool.install(f))
}

/// Runs one resolved section and writes `<out>.manifest`.
fn run_section(p: &Params) -> Result<commands::Outcome, CliError> {
    let outcome = commands::execute(p)?;
    let out = p.str("out")?;
    manifest::write(
        &format!("{out}.manifest"),
        std::slice::from_ref(p),
        &outcome.outputs,
        &outcome.notes,
    )?;
    for o in &outcome.outputs {
        println!("wrote {o}");
    }
    Ok(outcome)
}

/// Fills keys of a pipeline section from the outputs of earlier ones.
fn chain(
    name: &str,
    section: &mut BTreeMap<String, String>,
    done: &BTreeMap<&str, Params>,
) {
    let out_of = |s: &str| done.get(s).and_then(|p| p.opt_str("out")).map(str::to_string);
    let mut fill = |key: &str, v: Option<String>| {
        if let Some(v) = v {
            section.entry(key.to_string()).or_insert(v);
        }
    };
    match name {
        "hminus" | "corrector" | "kvdiag" | "simulate" | "rwrs" | "heatkernel"
        | "isoperimetry" => fill("env", out_of("generate")),
        "analyze" => {
            fill("env", out_of("generate"));
            fill("endpoints", out_of("simulate"));
            fill(
                "T",
                done.get("simulate")
                    .and_then(|p| p.opt_str("T"))
                    .map(str::to_string),
            );
            fill("ctilde", out_of("hminus"));
            fill("sigma", out_of("corrector"));
        }
        "plotdata" => fill("report", out_of("analyze")),
        _ => {}
    }
}

fn pipeline(cfg: &ConfigFile, manifest_path: &str) -> Result<(), CliError> {
    if let Some((name, _)) = cfg
        .sections
        .iter()
        .find(|(n, _)| !PIPELINE_ORDER.contains(&n.as_str()))
    {
        return Err(CliError::key(name, format!("[{name}] cannot run inside a pipeline")));
    }
    let mut done: BTreeMap<&str, Params> = BTreeMap::new();
    let mut ran = Vec::new();
    let mut outputs = Vec::new();
    for &name in PIPELINE_ORDER {
        let Some(section) = cfg.section(name) else {
            continue;
        };
        let mut section = section.clone();
        section.remove("workers");
        chain(name, &mut section, &done);
        let spec = command(name).expect("pipeline sections are commands");
        let p = Params::resolve(spec, Some(&cfg.global), Some(&section), &BTreeMap::new())
            .map_err(|e| prefix(e, name))?;
        let outcome = run_section(&p)?;
        outputs.extend(outcome.outputs);
        ran.push(p.clone());
        done.insert(name, p);
    }
    if ran.is_empty() {
        return Err(CliError::key("config", "config has no runnable sections"));
    }
    manifest::write(manifest_path, &ran, &outputs, &vec![])?;
    println!("wrote {manifest_path}");
    Ok(())
}

fn prefix(e: CliError, section: &str) -> CliError {
    match e {
        CliError::Invalid {
            key: Some(k),
            message,
        } => CliError::Invalid {
            key: Some(format!("{section}.{k}")),
            message,
        },
        other => other,
    }
}

fn rerun(path: &str, check: bool) -> Result<(), CliError> {
    let m = manifest::load(path)?;
    let sections = m
        .config
        .sections
        .iter()
        .map(|(name, values)| {
            let spec = command(name).expect("sections are validated on parse");
            Params::resolve(spec, None, Some(values), &BTreeMap::new()).map_err(|e| prefix(e, name))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if sections.is_empty() {
        return Err(CliError::key("manifest", "manifest has no sections"));
    }
    let hash = config_hash(&sections);
    match &m.config_hash {
        Some(h) if *h != hash => {
            return Err(CliError::key(
                "config_hash",
                format!("manifest sections hash to {hash}, header says {h}"),
            ))
        }
        None if check => return Err(CliError::key("config_hash", "manifest has no config hash")),
        _ => {}
    }
    for p in &sections {
        run_section(p)?;
    }
    if check {
        for (sha, out) in &m.outputs {
            let got = manifest::file_sha256(out)?;
            if got != *sha {
                return Err(CliError::NotReproduced {
                    path: out.clone(),
                    expected: sha.clone(),
                    got,
                });
            }
        }
        println!("reproduced {} outputs", m.outputs.len());
    }
    Ok(())
}

fn dispatch(name: &str, m: &ArgMatches) -> Result<(), CliError> {
    let spec = command(name).expect("subcommands come from the table");
    let mut cfg = match m.get_one::<String>("config") {
        Some(path) => ConfigFile::load(path).map_err(|e| e.at("config"))?,
        None => ConfigFile::default(),
    };
    let cfg_workers = cfg
        .section(name)
        .and_then(|s| s.get("workers"))
        .or_else(|| cfg.global.get("workers"))
        .cloned();
    cfg.global.remove("workers");
    for (_, s) in cfg.sections.iter_mut() {
        s.remove("workers");
    }
    let n = workers(m.get_one::<String>("workers"), cfg_workers.as_ref())?;
    let own = flags(spec, m);
    match name {
        "pipeline" => {
            let p = Params::resolve(spec, None, cfg.section(name), &own)?;
            if m.get_one::<String>("config").is_none() {
                return Err(CliError::key("config", "pipeline needs --config"));
            }
            let path = p.str("manifest")?.to_string();
            in_pool(n, || pipeline(&cfg, &path))?
        }
        "rerun" => {
            let p = Params::resolve(spec, None, cfg.section(name), &own)?;
            let path = p.str("manifest")?.to_string();
            let check: bool = p.parse("check")?;
            in_pool(n, || rerun(&path, check))?
        }
        _ => {
            let p = Params::resolve(spec, Some(&cfg.global), cfg.section(name), &own)?;
            in_pool(n, || run_section(&p).map(|_| ()))?
        }
    }
}

/// Parses `args` (including the program name), runs and returns the exit
/// code. Errors go to standard error as one JSON object.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = match cli().try_get_matches_from(args) {
        Ok(m) => {
            let (name, sub) = m.subcommand().expect("a subcommand is required");
            dispatch(name, sub)
        }
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = e.print();
                return 0;
            }
            ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                let _ = e.print();
                return error::EXIT_INVALID;
            }
            _ => Err(clap_error(e)),
        },
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
