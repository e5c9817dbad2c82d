//! Subcommand bodies. Each takes resolved parameters, writes its outputs and
//! returns their paths.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use divfree::corrector::{kv_diagnostics, solve_corrector};
use divfree::generators::{generate, GeneratorKind, GeneratorSpec};
use divfree::io::{drift_to_json, format_value, load_environment, stream_to_json, Environment};
use divfree::rng;
use divfree::spectral::{
    check_spectral_identities, covariance_spectrum, helmholtz, hminus_functional, hminus_norms,
    rwrs_finite_time, IdentityReport,
};
use divfree::stats::{
    bound_check, estimate_sigma2, heat_kernel, increases_beyond, isoperimetry, msd, quannealed,
    DiffusivityReport,
};
use divfree::walker::{rwrs_matrix, simulate_ctmc, simulate_lazy, RecordMode, StartMode, WalkConfig};
use divfree::{DriftField, EnvError, GenError, LatticeDims, StatsError};

use crate::config::Params;
use crate::error::CliError;
use crate::manifest::Notes;

/// Tolerance on the spectral identity residuals.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Tolerance of the bound check on exact corrector output.
pub const EXACT_BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<String>,
    pub notes: Notes,
}

impl Outcome {
    fn one(path: &str) -> Self {
        Outcome {
            outputs: vec![path.to_string()],
            notes: vec![],
        }
    }

    fn note(mut self, k: &str, v: impl Into<String>) -> Self {
        self.notes.push((k.to_string(), v.into()));
        self
    }
}

pub fn execute(p: &Params) -> Result<Outcome, CliError> {
    match p.command.name {
        "generate" => cmd_generate(p),
        "simulate" => cmd_simulate(p),
        "rwrs" => cmd_rwrs(p),
        "hminus" => cmd_hminus(p),
        "corrector" => cmd_corrector(p),
        "kvdiag" => cmd_kvdiag(p),
        "analyze" => cmd_analyze(p),
        "heatkernel" => cmd_heatkernel(p),
        "isoperimetry" => cmd_isoperimetry(p),
        "plotdata" => cmd_plotdata(p),
        other => Err(CliError::key(other, format!("{other} is not a runnable section"))),
    }
}

pub fn write_text(path: &str, text: &str) -> Result<(), CliError> {
    if let Some(dir) = Path::new(path).parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(path, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &str, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    write_text(path, &s)
}

fn read_json(path: &str, key: &str) -> Result<Json, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::key(key, format!("{path}: {e}")))
}

fn load_drift(path: &str, key: &str) -> Result<DriftField, CliError> {
    let env = load_environment(path).map_err(|e| CliError::from(e).at(key))?;
    env.drift().map_err(|e| CliError::from(e).at(key))
}

fn dims_error(e: EnvError) -> CliError {
    let key = match e {
        EnvError::UnsupportedDimension(_) => "d",
        _ => "L",
    };
    CliError::from(e).at(key)
}

fn gen_error(e: GenError) -> CliError {
    let key = match e {
        GenError::AmplitudeTooLarge { .. } => "amplitude",
        GenError::UnbalancedTorus { .. } => "balanced",
        _ => "kind",
    };
    CliError::from(e).at(key)
}

fn stats_error(e: StatsError, key: &str) -> CliError {
    CliError::from(e).at(key)
}

fn generator_spec(p: &Params, dims: LatticeDims, seed: u64) -> Result<GeneratorSpec, CliError> {
    let kind: GeneratorKind = p.parse("kind")?;
    let mut spec = GeneratorSpec::new(kind, dims, seed).with_balanced(p.parse("balanced")?);
    if let Some(a) = p.opt::<f64>("amplitude")? {
        spec = spec.with_amplitude(a);
    }
    if let Some(c) = p.opt::<bool>("continuous")? {
        spec.continuous = c;
    }
    if let Some(r) = p.opt::<i64>("height_range")? {
        spec.height_range = r;
    }
    Ok(spec)
}

fn required_dims(p: &Params) -> Result<LatticeDims, CliError> {
    let d: usize = p
        .opt("d")?
        .ok_or_else(|| CliError::key("d", "missing key \"d\""))?;
    let l: usize = p
        .opt("L")?
        .ok_or_else(|| CliError::key("L", "missing key \"L\""))?;
    LatticeDims::new(d, l).map_err(dims_error)
}

fn cmd_generate(p: &Params) -> Result<Outcome, CliError> {
    let out = p.str("out")?;
    let kind: GeneratorKind = p.parse("kind")?;
    let mut notes = Notes::new();
    let (drift, stream) = if kind == GeneratorKind::FromFile {
        let input = p
            .opt_str("input")
            .ok_or_else(|| CliError::key("input", "kind from_file needs an input file"))?;
        match load_environment(input).map_err(|e| CliError::from(e).at("input"))? {
            Environment::Drift(v) => (v, None),
            Environment::Stream(h) => (h.curl().map_err(|e| CliError::from(e).at("input"))?, Some(h)),
        }
    } else {
        let spec = generator_spec(p, required_dims(p)?, p.parse("seed")?)?;
        let g = generate(&spec).map_err(gen_error)?;
        for w in &g.warnings {
            eprintln!("warning: {w}");
            notes.push(("warning".into(), w.to_string()));
        }
        (g.drift, g.stream)
    };
    let text = match p.str("format")? {
        "stream" => match stream {
            Some(h) => stream_to_json(&h),
            None => stream_to_json(&helmholtz(&drift)?),
        },
        _ => drift_to_json(&drift),
    };
    write_text(out, &(text + "\n"))?;
    Ok(Outcome {
        outputs: vec![out.to_string()],
        notes,
    })
}

fn cmd_simulate(p: &Params) -> Result<Outcome, CliError> {
    let out = p.str("out")?;
    let paths: Vec<&str> = p.str("env")?.split(',').map(str::trim).collect();
    let fields = paths
        .iter()
        .map(|e| load_drift(e, "env"))
        .collect::<Result<Vec<_>, _>>()?;
    let d = fields[0].dims().d();
    if fields.iter().any(|f| f.dims().d() != d) {
        return Err(CliError::key("env", "all environments must have the same dimension"));
    }
    let record: RecordMode = p.parse("record")?;
    let start = match p.str("start")? {
        "origin" => StartMode::Origin,
        _ => StartMode::Uniform,
    };
    let samples: usize = p.parse("samples")?;
    let seed: u64 = p.parse("seed")?;
    let multi = fields.len() > 1;

    let mut csv = String::new();
    if multi {
        csv.push_str("env_index,");
    }
    csv.push_str("sample_index");
    for i in 1..=d {
        write!(csv, ",x_{i}").unwrap();
    }
    csv.push_str(",jump_count");
    if record == RecordMode::Decomposition {
        for c in ["y", "z"] {
            for i in 1..=d {
                write!(csv, ",{c}_{i}").unwrap();
            }
        }
    }
    csv.push('\n');
    let mut path_lines = String::new();

    for (r, v) in fields.iter().enumerate() {
        let s = if multi { rng::derive_seed(seed, r as u64) } else { seed };
        let trajs = match p.str("walk")? {
            "lazy" => {
                let steps: u64 = p
                    .opt("steps")?
                    .ok_or_else(|| CliError::key("steps", "lazy walk needs steps"))?;
                let cfg = WalkConfig::lazy(steps, samples, s).with_record(record).with_start(start);
                simulate_lazy(v, &cfg).map_err(|e| CliError::from(e).at("samples"))?
            }
            _ => {
                let t: f64 = p
                    .opt("T")?
                    .ok_or_else(|| CliError::key("T", "continuous-time walk needs T"))?;
                let cfg = WalkConfig::ctmc(t, samples, s).with_record(record).with_start(start);
                simulate_ctmc(v, &cfg).map_err(|e| CliError::from(e).at("T"))?
            }
        };
        for (i, tr) in trajs.iter().enumerate() {
            if multi {
                write!(csv, "{r},").unwrap();
            }
            write!(csv, "{i}").unwrap();
            for x in &tr.displacement {
                write!(csv, ",{x}").unwrap();
            }
            write!(csv, ",{}", tr.jumps).unwrap();
            if record == RecordMode::Decomposition {
                let y = tr.y().unwrap_or_else(|| vec![0.0; d]);
                let z = tr.z.clone().unwrap_or_else(|| vec![0.0; d]);
                for val in y.iter().chain(&z) {
                    write!(csv, ",{}", format_value(*val)).unwrap();
                }
            }
            csv.push('\n');
            if record == RecordMode::FullPath {
                let events: Vec<(f64, usize)> = tr
                    .events
                    .iter()
                    .flatten()
                    .map(|e| (e.time, e.direction.index()))
                    .collect();
                let line = serde_json::json!({
                    "env_index": r,
                    "sample_index": i,
                    "start": tr.start,
                    "events": events,
                });
                path_lines.push_str(&line.to_string());
                path_lines.push('\n');
            }
        }
    }
    write_text(out, &csv)?;
    let mut outcome = Outcome::one(out);
    if record == RecordMode::FullPath {
        let pp = format!("{out}.paths.jsonl");
        write_text(&pp, &path_lines)?;
        outcome.outputs.push(pp);
    }
    Ok(outcome)
}

fn cmd_rwrs(p: &Params) -> Result<Outcome, CliError> {
    let out = p.str("out")?;
    let v = load_drift(p.str("env")?, "env")?;
    let t: f64 = p.parse("T")?;
    let samples: usize = p.parse("samples")?;
    let est = rwrs_matrix(&v, t, samples, p.parse("seed")?).map_err(|e| CliError::from(e).at("T"))?;
    let spec = covariance_spectrum(std::slice::from_ref(&v))?;
    let h = hminus_functional(&spec);
    let expected = rwrs_finite_time(&spec, t);
    let expected_trace: f64 = (0..expected.len()).map(|i| expected[i][i]).sum();
    let report = serde_json::json!({
        "T": t,
        "samples": samples,
        "matrix": est.matrix,
        "trace": est.trace,
        "finite_t_expected": expected,
        "finite_t_trace": expected_trace,
        "ctilde_trace": h.trace,
    });
    write_json(out, &report)?;
    Ok(Outcome::one(out))
}

/// Output of `hminus`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HminusReport {
    pub d: usize,
    #[serde(rename = "L")]
    pub side: usize,
    pub realizations: usize,
    pub ctilde: Vec<Vec<f64>>,
    pub trace: f64,
    pub zero_mode: f64,
    pub min_eigenvalue: f64,
    pub warning: Option<String>,
    /// `|| |Δ|^{-1/2} V_k ||²` per step direction, averaged over realizations.
    pub hminus_norms: Vec<f64>,
    /// Largest residual of each identity over the realizations.
    pub identities: IdentityReport,
    pub identities_passed: bool,
}

fn max_identities(reports: &[IdentityReport]) -> IdentityReport {
    reports.iter().fold(IdentityReport::default(), |a, b| IdentityReport {
        chat_vector: a.chat_vector.max(b.chat_vector),
        chat_divfree: a.chat_divfree.max(b.chat_divfree),
        equiv0: a.equiv0.max(b.equiv0),
        c_zero: a.c_zero.max(b.c_zero),
        chat_from_b: a.chat_from_b.max(b.chat_from_b),
    })
}

fn cmd_hminus(p: &Params) -> Result<Outcome, CliError> {
    let out = p.str("out")?;
    let r: usize = p.parse("ensemble")?;
    let fields: Vec<DriftField> = if r == 0 {
        let env = p
            .opt_str("env")
            .ok_or_else(|| CliError::key("env", "env is required unless ensemble > 0"))?;
        vec![load_drift(env, "env")?]
    } else {
        if !p.has("kind") {
            return Err(CliError::key("kind", "an ensemble needs a generator kind"));
        }
        let dims = match p.opt_str("env") {
            Some(env) => load_drift(env, "env")?.dims(),
            None => required_dims(p)?,
        };
        let seed: u64 = p.parse("seed")?;
        let specs = (0..r)
            .map(|i| generator_spec(p, dims, rng::derive_seed(seed, i as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        specs
            .par_iter()
            .map(|s| generate(s).map(|g| g.drift).map_err(gen_error))
            .collect::<Result<Vec<_>, _>>()?
    };
    let spec = covariance_spectrum(&fields)?;
    let h = hminus_functional(&spec);
    let per_field = fields
        .par_iter()
        .map(|v| Ok((hminus_norms(v)?, check_spectral_identities(v))))
        .collect::<Result<Vec<_>, EnvError>>()?;
    let m = 2 * fields[0].dims().d();
    let mut norms = vec![0.0; m];
    for (n, _) in &per_field {
        for (acc, x) in norms.iter_mut().zip(n) {
            *acc += x;
        }
    }
    for x in &mut norms {
        *x /= fields.len() as f64;
    }
    let ids: Vec<IdentityReport> = per_field.iter().map(|(_, r)| *r).collect();
    let identities = max_identities(&ids);
    let dims = fields[0].dims();
    let report = HminusReport {
        d: dims.d(),
        side: dims.side(),
        realizations: fields.len(),
        min_eigenvalue: h.min_eigenvalue(),
        ctilde: h.ctilde,
        trace: h.trace,
        zero_mode: h.zero_mode,
        warning: h.warning,
        hminus_norms: norms,
        identities,
        identities_passed: identities.passed(IDENTITY_TOL),
    };
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    write_json(out, &report)?;
    Ok(Outcome::one(out).note("trace_ctilde", format_value(report.trace)))
}

/// Output of `corrector`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectorReport {
    pub sigma2: Vec<Vec<f64>>,
    pub trace: f64,
    pub iterations: Vec<usize>,
    pub residual: f64,
    pub ctilde: Vec<Vec<f64>>,
    pub ctilde_trace: f64,
    pub bound_check: divfree::stats::BoundCheck,
}

fn cmd_corrector(p: &Params) -> Result<Outcome, CliError> {
    let out = p.str("out")?;
    let v = load_drift(p.str("env")?, "env")?;
    let sol = solve_corrector(&v).map_err(|e| CliError::from(e).at("env"))?;
    let h = hminus_functional(&covariance_spectrum(std::slice::from_ref(&v))?);
    let report = CorrectorReport {
        bound_check: bound_check(&sol.sigma2, &h.ctilde, EXACT_BOUND_TOL),
        trace: sol.trace(),
        sigma2: sol.sigma2,
        iterations: sol.iterations,
        residual: sol.residual,
        ctilde: h.ctilde,
        ctilde_trace: h.trace,
    };
    write_json(out, &report)?;
    Ok(Outcome::one(out).note("trace_sigma2", format_value(report.trace)))
}

/// `a:b` (one point per decade), `a:b:n` (n log-spaced points) or `a,b,c`.
pub fn parse_lambda_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = |m: &str| CliError::key("lambda_grid", format!("invalid lambda grid {s:?}: {m}"));
    let num = |x: &str| -> Result<f64, CliError> {
        match x.trim().parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
            _ => Err(bad("values must be positive numbers")),
        }
    };
    if s.contains(',') || !s.contains(':') {
        return s.split(',').map(num).collect();
    }
    let parts: Vec<&str> = s.split(':').collect();
    let (a, b) = (num(parts[0])?, num(parts.get(1).copied().unwrap_or(""))?);
    let (la, lb) = (a.log10(), b.log10());
    let n = match parts.len() {
        2 => (la - lb).abs().round() as usize + 1,
        3 => parts[2]
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 2)
            .ok_or_else(|| bad("point count must be an integer >= 2"))?,
        _ => return Err(bad("expected a:b or a:b:n")),
    };
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n)
        .map(|i| {
            let e = la + (lb - la) * i as f64 / (n - 1) as f64;
            10f64.powf(e)
        })
        .collect())
}

fn cmd_kvdiag(p: &Params) -> Result<Outcome, CliError> {
    let out = p.str("out")?;
    let v = load_drift(p.str("env")?, "env")?;
    let grid = parse_lambda_grid(p.str("lambda_grid")?)?;
    let rows = kv_diagnostics(&v, &grid).map_err(|e| CliError::from(e).at("lambda_grid"))?;
    let mut csv = String::from("lambda,component,lambda_norm,dirichlet,two_u_phi,residual\n");
    for r in rows {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            format_value(r.lambda),
            r.component + 1,
            format_value(r.lambda_norm),
            format_value(r.dirichlet),
            format_value(r.two_u_phi),
            format_value(r.residual)
        )
        .unwrap();
    }
    write_text(out, &csv)?;
    Ok(Outcome::one(out))
}

/// Endpoint table read back from `simulate` output.
pub struct EndpointTable {
    pub env_index: Option<Vec<usize>>,
    pub endpoints: Vec<Vec<i64>>,
}

pub fn read_endpoints(path: &str) -> Result<EndpointTable, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |m: String| CliError::key("endpoints", format!("{path}: {m}"));
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| bad("empty file".into()))?
        .split(',')
        .collect();
    let env_col = header.iter().position(|&h| h == "env_index");
    let x_cols: Vec<usize> = (1..)
        .map_while(|i| header.iter().position(|&h| h == format!("x_{i}")))
        .collect();
    if x_cols.is_empty() {
        return Err(bad("no x_1 column".into()));
    }
    let mut env_index = env_col.map(|_| Vec::new());
    let mut endpoints = Vec::new();
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let cell = |c: usize| -> Result<&str, CliError> {
            cells
                .get(c)
                .copied()
                .ok_or_else(|| bad(format!("row {} is short", n + 2)))
        };
        let parse_err = |c: &str| bad(format!("row {}: bad value {c:?}", n + 2));
        let x = x_cols
            .iter()
            .map(|&c| {
                let s = cell(c)?;
                s.parse::<i64>().map_err(|_| parse_err(s))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let (Some(c), Some(ix)) = (env_col, env_index.as_mut()) {
            let s = cell(c)?;
            ix.push(s.parse::<usize>().map_err(|_| parse_err(s))?);
        }
        endpoints.push(x);
    }
    Ok(EndpointTable {
        env_index,
        endpoints,
    })
}

fn matrix_field(doc: &Json, field: &str, key: &str) -> Result<Vec<Vec<f64>>, CliError> {
    serde_json::from_value(doc.get(field).cloned().unwrap_or(Json::Null))
        .map_err(|e| CliError::key(key, format!("report has no usable {field:?} matrix: {e}")))
}

fn cmd_analyze(p: &Params) -> Result<Outcome, CliError> {
    let out = p.str("out")?;
    let files: Vec<&str> = p.str("endpoints")?.split(',').map(str::trim).collect();
    let times = p
        .str("T")?
        .split(',')
        .map(|t| match t.trim().parse::<f64>() {
            Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
            _ => Err(CliError::key("T", format!("invalid horizon {t:?}"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if times.len() != files.len() {
        return Err(CliError::key(
            "T",
            format!("{} horizons for {} endpoint files", times.len(), files.len()),
        ));
    }
    let tables = files
        .iter()
        .map(|f| read_endpoints(f))
        .collect::<Result<Vec<_>, _>>()?;
    let mut notes = Vec::new();
    let msd_curve = tables
        .iter()
        .zip(&times)
        .map(|(tb, &t)| msd(&tb.endpoints, t).map_err(|e| stats_error(e, "endpoints")))
        .collect::<Result<Vec<_>, _>>()?;
    let (last, t_last) = (tables.last().expect("at least one file"), *times.last().unwrap());
    let sigma2_hat = estimate_sigma2(&last.endpoints, t_last, p.parse("seed")?)
        .map_err(|e| stats_error(e, "endpoints"))?;
    let d = sigma2_hat.sigma2.len();

    let sigma2_exact = match p.opt_str("sigma") {
        Some(path) => Some(matrix_field(&read_json(path, "sigma")?, "sigma2", "sigma")?),
        None => None,
    };
    let ctilde = match (p.opt_str("ctilde"), p.opt_str("env")) {
        (Some(path), _) => Some(matrix_field(&read_json(path, "ctilde")?, "ctilde", "ctilde")?),
        (None, Some(env)) => {
            let v = load_drift(env, "env")?;
            Some(hminus_functional(&covariance_spectrum(std::slice::from_ref(&v))?).ctilde)
        }
        (None, None) => None,
    };
    for (m, key) in [(&sigma2_exact, "sigma"), (&ctilde, "ctilde")] {
        if m.as_ref().is_some_and(|m| m.len() != d) {
            return Err(CliError::key(key, format!("matrix is not {d}x{d}")));
        }
    }
    let bound = match (&sigma2_exact, &ctilde) {
        (Some(s), Some(c)) => {
            notes.push("bound check on corrector sigma2".to_string());
            Some(bound_check(s, c, EXACT_BOUND_TOL))
        }
        (None, Some(c)) => {
            notes.push("bound check on Monte Carlo sigma2 with tolerance 4 SE".to_string());
            Some(bound_check(&sigma2_hat.sigma2, c, 4.0 * sigma2_hat.max_se()))
        }
        _ => {
            notes.push("no C~ available; bound check skipped".to_string());
            None
        }
    };
    let reference = sigma2_exact.clone().unwrap_or_else(|| sigma2_hat.sigma2.clone());
    let quannealed_rows = match &last.env_index {
        Some(ix) if ix.iter().any(|&i| i != ix[0]) => {
            let mut groups: BTreeMap<usize, Vec<Vec<i64>>> = BTreeMap::new();
            for (i, x) in ix.iter().zip(&last.endpoints) {
                groups.entry(*i).or_default().push(x.clone());
            }
            let per_env: Vec<Vec<Vec<i64>>> = groups.into_values().collect();
            quannealed(&per_env, t_last, &reference)
        }
        _ => vec![],
    };
    let report = DiffusivityReport {
        msd_trend_increasing: (msd_curve.len() > 1).then(|| increases_beyond(&msd_curve, 4.0)),
        msd_curve,
        clt: sigma2_hat.ks.clone(),
        sigma2_hat: Some(sigma2_hat),
        sigma2_exact,
        ctilde,
        bound_check: bound,
        quannealed: quannealed_rows,
        notes,
    };
    write_json(out, &report)?;
    let passed = report.bound_check.as_ref().map(|b| b.passed);
    Ok(Outcome::one(out).note(
        "bound_check",
        passed.map_or("skipped".to_string(), |b| if b { "passed" } else { "failed" }.to_string()),
    ))
}

fn cmd_heatkernel(p: &Params) -> Result<Outcome, CliError> {
    let out = p.str("out")?;
    let v = load_drift(p.str("env")?, "env")?;
    let start: usize = p.parse("start")?;
    if start >= v.dims().num_sites() {
        return Err(CliError::key("start", format!("site {start} is outside the torus")));
    }
    let rep = heat_kernel(&v, start, p.parse("nmax")?).map_err(|e| stats_error(e, "nmax"))?;
    if out.ends_with(".json") {
        write_json(out, &rep)?;
    } else {
        let mut csv = String::from("n,sup_p,sup_times_n_half_d,mass_error\n");
        for r in &rep.rows {
            writeln!(
                csv,
                "{},{},{},{}",
                r.n,
                format_value(r.sup_p),
                format_value(r.sup_times_n_half_d),
                format_value(r.mass_error)
            )
            .unwrap();
        }
        write_text(out, &csv)?;
    }
    Ok(Outcome::one(out).note("exponent", format_value(rep.exponent)))
}

fn cmd_isoperimetry(p: &Params) -> Result<Outcome, CliError> {
    let out = p.str("out")?;
    let v = load_drift(p.str("env")?, "env")?;
    let sets: usize = p.parse("sets")?;
    let seed: u64 = p.parse("seed")?;
    let n = v.dims().num_sites();
    let rows: Vec<serde_json::Value> = (0..sets as u64)
        .into_par_iter()
        .map(|s| {
            let mut r = rng::stream(seed, s);
            let in_set: Vec<bool> = (0..n).map(|_| r.random::<bool>()).collect();
            let iso = isoperimetry(&v, &in_set);
            serde_json::json!({
                "size": in_set.iter().filter(|&&b| b).count(),
                "q": iso.q,
                "boundary": iso.boundary,
                "exact": iso.exact,
            })
        })
        .collect();
    let all_exact = rows.iter().all(|r| r["exact"] == Json::Bool(true));
    write_json(
        out,
        &serde_json::json!({"sets": sets, "all_exact": all_exact, "rows": rows}),
    )?;
    Ok(Outcome::one(out).note("all_exact", all_exact.to_string()))
}

/// Tidy table extracted from a report.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Whether the first two columns make sense as a line plot.
    pub plottable: bool,
}

pub fn tidy(report: &Json) -> Result<Table, CliError> {
    let num = |v: &Json| v.as_f64().map_or_else(|| "NA".to_string(), format_value);
    let arr = |v: &Json| v.as_array().cloned().unwrap_or_default();
    if let Some(curve) = report.get("msd_curve") {
        return Ok(Table {
            columns: vec!["T", "msd_over_t", "se"],
            rows: arr(curve)
                .iter()
                .map(|r| vec![num(&r["t"]), num(&r["msd_over_t"]), num(&r["se"])])
                .collect(),
            plottable: true,
        });
    }
    if report.get("exponent").is_some() && report.get("rows").is_some() {
        return Ok(Table {
            columns: vec!["n", "sup_p", "sup_times_n_half_d"],
            rows: arr(&report["rows"])
                .iter()
                .map(|r| vec![num(&r["n"]), num(&r["sup_p"]), num(&r["sup_times_n_half_d"])])
                .collect(),
            plottable: true,
        });
    }
    if let (Some(c), Some(_)) = (report.get("ctilde"), report.get("realizations")) {
        let mut rows = Vec::new();
        for (i, row) in arr(c).iter().enumerate() {
            for (j, x) in arr(row).iter().enumerate() {
                rows.push(vec![(i + 1).to_string(), (j + 1).to_string(), num(x)]);
            }
        }
        return Ok(Table {
            columns: vec!["i", "j", "ctilde"],
            rows,
            plottable: false,
        });
    }
    Err(CliError::SchemaMismatch(
        "expected an analyze, heatkernel or hminus report".into(),
    ))
}

fn svg_plot(t: &Table) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let pts: Vec<(f64, f64)> = t
        .rows
        .iter()
        .filter_map(|r| Some((r[0].parse().ok()?, r[1].parse().ok()?)))
        .collect();
    let fold = |f: fn(&(f64, f64)) -> f64| {
        pts.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
            (a.min(x), b.max(x))
        })
    };
    let (x0, x1) = fold(|p| p.0);
    let (y0, y1) = fold(|p| p.1);
    let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(f64::MIN_POSITIVE) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0).max(f64::MIN_POSITIVE) * (h - 2.0 * pad);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{pad}\" y1=\"{yb}\" x2=\"{xr}\" y2=\"{yb}\" stroke=\"black\"/>\n\
         <line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{yb}\" stroke=\"black\"/>\n\
         <text x=\"{xm}\" y=\"{yl}\" text-anchor=\"middle\">{xc}</text>\n\
         <text x=\"12\" y=\"{ym}\" transform=\"rotate(-90 12 {ym})\" text-anchor=\"middle\">{yc}</text>\n",
        yb = h - pad,
        xr = w - pad,
        xm = w / 2.0,
        yl = h - 12.0,
        ym = h / 2.0,
        xc = t.columns[0],
        yc = t.columns[1],
    );
    if !pts.is_empty() {
        let line: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{}\"/>",
            line.join(" ")
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn cmd_plotdata(p: &Params) -> Result<Outcome, CliError> {
    let out = p.str("out")?;
    let report = read_json(p.str("report")?, "report")?;
    let table = tidy(&report)?;
    let mut csv = table.columns.join(",");
    csv.push('\n');
    for r in &table.rows {
        csv.push_str(&r.join(","));
        csv.push('\n');
    }
    write_text(out, &csv)?;
    let mut outcome = Outcome::one(out).note("columns", table.columns.join(","));
    if let Some(svg) = p.opt_str("svg") {
        if !table.plottable {
            return Err(CliError::key("svg", "this report has no line plot"));
        }
        write_text(svg, &svg_plot(&table))?;
        outcome.outputs.push(svg.to_string());
    }
    Ok(outcome)
}
