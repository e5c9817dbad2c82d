//! Walk simulation in a fixed periodic environment.
//!
//! * continuous time: from `x` jump to `x + k` at rate `1 + V_k(x)`; the
//!   total rate is `2d` everywhere, so the number of jumps on `[0, T]` is
//!   `Poisson(2dT)` independently of the path,
//! * lazy discrete time: stay with probability 1/2, otherwise step to `x + k`
//!   with probability `(1 + V_k(x)) / (4d)`,
//! * the simple walk with total rate `2d` integrating the scenery `φ`.
//!
//! Trajectory `i` draws from its own generator seeded by
//! `derive_seed(master_seed, i)`. Positions and directions come from one
//! stream and jump times from a second one, so the endpoint of a trajectory
//! does not depend on the record mode or on the number of worker threads.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::WalkError;
use crate::field::DriftField;
use crate::lattice::{Direction, LatticeDims};
use crate::rng;

/// Seed offset for the jump-time stream.
const TIME_STREAM: u64 = 0x7469_6d65_7374_726d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    Endpoint,
    FullPath,
    Decomposition,
}

impl std::str::FromStr for RecordMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "endpoint" => Ok(RecordMode::Endpoint),
            "full_path" | "path" => Ok(RecordMode::FullPath),
            "decomposition" => Ok(RecordMode::Decomposition),
            other => Err(format!("unknown record mode {other:?}")),
        }
    }
}

impl std::fmt::Display for RecordMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RecordMode::Endpoint => "endpoint",
            RecordMode::FullPath => "full_path",
            RecordMode::Decomposition => "decomposition",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    /// Uniform random site, i.e. a uniformly random shift of the environment.
    Uniform,
    /// Every trajectory starts at site index 0.
    Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    Time(f64),
    Steps(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub horizon: Horizon,
    pub samples: usize,
    pub master_seed: u64,
    pub record: RecordMode,
    pub start: StartMode,
}

impl WalkConfig {
    pub fn ctmc(time: f64, samples: usize, master_seed: u64) -> Self {
        Self {
            horizon: Horizon::Time(time),
            samples,
            master_seed,
            record: RecordMode::Endpoint,
            start: StartMode::Uniform,
        }
    }

    pub fn lazy(steps: u64, samples: usize, master_seed: u64) -> Self {
        Self {
            horizon: Horizon::Steps(steps),
            ..Self::ctmc(0.0, samples, master_seed)
        }
    }

    pub fn with_record(mut self, record: RecordMode) -> Self {
        self.record = record;
        self
    }

    pub fn with_start(mut self, start: StartMode) -> Self {
        self.start = start;
        self
    }

    fn check(&self) -> Result<(), WalkError> {
        if self.samples == 0 {
            return Err(WalkError::Config("samples must be at least 1".into()));
        }
        if let Horizon::Time(t) = self.horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(WalkError::Config(format!("horizon T = {t} must be positive")));
            }
        }
        Ok(())
    }
}

/// One jump (or lazy step) of a recorded path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Jump time; the step number for the lazy walk.
    pub time: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Site index of `X(0)` on the torus.
    pub start: usize,
    /// `X(T) - X(0)` in `Z^d`.
    pub displacement: Vec<i64>,
    pub jumps: u64,
    pub events: Option<Vec<Event>>,
    /// `Z(T) = int_0^T φ(η_s) ds`; for the lazy walk the compensator
    /// `sum_{m<n} φ(X_m) / (4d)`.
    pub z: Option<Vec<f64>>,
}

impl Trajectory {
    /// `Y(T) = X(T) - X(0) - Z(T)`.
    pub fn y(&self) -> Option<Vec<f64>> {
        self.z.as_ref().map(|z| {
            self.displacement
                .iter()
                .zip(z)
                .map(|(&x, &z)| x as f64 - z)
                .collect()
        })
    }

    /// Displacement rebuilt from the event list.
    pub fn replay(&self, d: usize) -> Option<Vec<i64>> {
        let events = self.events.as_ref()?;
        let mut x = vec![0i64; d];
        for e in events {
            x[e.direction.axis()] += e.direction.sign() as i64;
        }
        Some(x)
    }
}

/// Per-site cumulative jump weights `sum_{m <= j} (1 + V_{k_m}(x))`.
#[derive(Debug, Clone)]
pub struct JumpTable {
    dims: LatticeDims,
    cumulative: Vec<f64>,
    neighbors: Vec<usize>,
    phi: Vec<f64>,
}

impl JumpTable {
    /// Builds the table and checks `sum_k (1 + V_k(x)) = 2d` with nonnegative rates.
    pub fn new(v: &DriftField) -> Result<Self, WalkError> {
        let dims = v.dims();
        let d = dims.d();
        let m = 2 * d;
        let n = dims.num_sites();
        let total = m as f64;
        let mut cumulative = Vec::with_capacity(n * m);
        let mut neighbors = Vec::with_capacity(n * m);
        let mut phi = Vec::with_capacity(n * d);
        for x in 0..n {
            let mut acc = 0.0;
            for k in Direction::all(d) {
                let r = v.rate(x, k);
                if r < 0.0 {
                    return Err(WalkError::RateConservation {
                        site: x,
                        sum: r,
                        expected: 0.0,
                    });
                }
                acc += r;
                cumulative.push(acc);
                neighbors.push(dims.neighbor(x, k));
            }
            if (acc - total).abs() > 1e-12 {
                return Err(WalkError::RateConservation {
                    site: x,
                    sum: acc,
                    expected: total,
                });
            }
            for i in 0..d {
                phi.push(v.phi_at(x, i));
            }
        }
        Ok(Self {
            dims,
            cumulative,
            neighbors,
            phi,
        })
    }

    pub fn dims(&self) -> LatticeDims {
        self.dims
    }

    /// Direction index for `u` uniform on `[0, 2d)`.
    #[inline]
    pub fn pick(&self, x: usize, u: f64) -> usize {
        let m = 2 * self.dims.d();
        let row = &self.cumulative[x * m..(x + 1) * m];
        let mut last = m - 1;
        for (j, &c) in row.iter().enumerate() {
            if u < c {
                return j;
            }
        }
        // u hit the top of the range after rounding: take the last live direction
        while last > 0 && row[last] == row[last - 1] {
            last -= 1;
        }
        last
    }

    #[inline]
    pub fn neighbor(&self, x: usize, j: usize) -> usize {
        self.neighbors[x * 2 * self.dims.d() + j]
    }

    #[inline]
    pub fn phi(&self, x: usize) -> &[f64] {
        let d = self.dims.d();
        &self.phi[x * d..(x + 1) * d]
    }

    /// Jump probability `(1 + V_k(x)) / (2d)` of direction index `j`.
    pub fn probability(&self, x: usize, j: usize) -> f64 {
        let m = 2 * self.dims.d();
        let row = &self.cumulative[x * m..(x + 1) * m];
        let lo = if j == 0 { 0.0 } else { row[j - 1] };
        (row[j] - lo) / m as f64
    }
}

fn start_site(dims: LatticeDims, mode: StartMode, rng: &mut ChaCha8Rng) -> usize {
    match mode {
        StartMode::Uniform => rng.random_range(0..dims.num_sites()),
        StartMode::Origin => 0,
    }
}

/// `T * E_m / sum E` for `m = 0..=n`: the gaps between `n` uniform points on `[0, T]`.
fn spacings(n: u64, time: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..=n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|x| time * x / total).collect()
}

fn ctmc_one(table: &JumpTable, cfg: &WalkConfig, time: f64, index: u64) -> Trajectory {
    let dims = table.dims;
    let d = dims.d();
    let m = (2 * d) as f64;
    let mut rng = rng::stream(cfg.master_seed, index);
    let start = start_site(dims, cfg.start, &mut rng);
    let jumps = Poisson::new(m * time)
        .map(|p| p.sample(&mut rng) as u64)
        .unwrap_or(0);
    let gaps = match cfg.record {
        RecordMode::Endpoint => None,
        _ => {
            let mut trng = rng::stream(rng::derive_seed(cfg.master_seed, TIME_STREAM), index);
            Some(spacings(jumps, time, &mut trng))
        }
    };
    let mut x = start;
    let mut disp = vec![0i64; d];
    let mut z = vec![0.0; d];
    let mut events = matches!(cfg.record, RecordMode::FullPath | RecordMode::Decomposition)
        .then(|| Vec::with_capacity(jumps as usize));
    let mut clock = 0.0;
    for step in 0..jumps as usize {
        if let Some(g) = &gaps {
            let dt = g[step];
            for (zi, p) in z.iter_mut().zip(table.phi(x)) {
                *zi += p * dt;
            }
            clock += dt;
        }
        let j = table.pick(x, rng.random::<f64>() * m);
        let k = Direction::from_index(j);
        disp[k.axis()] += k.sign() as i64;
        x = table.neighbor(x, j);
        if let Some(ev) = events.as_mut() {
            ev.push(Event {
                time: clock,
                direction: k,
            });
        }
    }
    if let Some(g) = &gaps {
        let dt = g[jumps as usize];
        for (zi, p) in z.iter_mut().zip(table.phi(x)) {
            *zi += p * dt;
        }
    }
    Trajectory {
        start,
        displacement: disp,
        jumps,
        events,
        z: (cfg.record == RecordMode::Decomposition).then_some(z),
    }
}

/// Continuous-time walk, one trajectory per sample.
pub fn simulate_ctmc(v: &DriftField, cfg: &WalkConfig) -> Result<Vec<Trajectory>, WalkError> {
    cfg.check()?;
    let time = match cfg.horizon {
        Horizon::Time(t) => t,
        Horizon::Steps(_) => {
            return Err(WalkError::Config(
                "continuous-time walk needs a time horizon".into(),
            ))
        }
    };
    let table = JumpTable::new(v)?;
    Ok((0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| ctmc_one(&table, cfg, time, i))
        .collect())
}

fn lazy_one(table: &JumpTable, cfg: &WalkConfig, steps: u64, index: u64) -> Trajectory {
    let dims = table.dims;
    let d = dims.d();
    let m = (2 * d) as f64;
    let mut rng = rng::stream(cfg.master_seed, index);
    let start = start_site(dims, cfg.start, &mut rng);
    let mut x = start;
    let mut disp = vec![0i64; d];
    let mut z = vec![0.0; d];
    let mut jumps = 0;
    let mut events = (cfg.record != RecordMode::Endpoint).then(Vec::new);
    for n in 0..steps {
        if cfg.record == RecordMode::Decomposition {
            for (zi, p) in z.iter_mut().zip(table.phi(x)) {
                *zi += p / (2.0 * m);
            }
        }
        let u: f64 = rng.random();
        if u < 0.5 {
            continue;
        }
        let j = table.pick(x, (u - 0.5) * 2.0 * m);
        let k = Direction::from_index(j);
        disp[k.axis()] += k.sign() as i64;
        x = table.neighbor(x, j);
        jumps += 1;
        if let Some(ev) = events.as_mut() {
            ev.push(Event {
                time: n as f64,
                direction: k,
            });
        }
    }
    Trajectory {
        start,
        displacement: disp,
        jumps,
        events,
        z: (cfg.record == RecordMode::Decomposition).then_some(z),
    }
}

/// Lazy discrete-time walk.
pub fn simulate_lazy(v: &DriftField, cfg: &WalkConfig) -> Result<Vec<Trajectory>, WalkError> {
    cfg.check()?;
    let steps = match cfg.horizon {
        Horizon::Steps(n) => n,
        Horizon::Time(_) => {
            return Err(WalkError::Config("lazy walk needs a step count".into()))
        }
    };
    let table = JumpTable::new(v)?;
    Ok((0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| lazy_one(&table, cfg, steps, i))
        .collect())
}

/// Continuous-time displacements at increasing times from one run per sample.
///
/// `out[c][s]` is `X(times[c]) - X(0)` of sample `s`. Jump counts on
/// successive intervals are independent Poisson variables.
pub fn ctmc_checkpoints(
    v: &DriftField,
    times: &[f64],
    samples: usize,
    master_seed: u64,
    start: StartMode,
) -> Result<Vec<Vec<Vec<i64>>>, WalkError> {
    if samples == 0 || times.is_empty() {
        return Err(WalkError::Config("need samples >= 1 and at least one time".into()));
    }
    if times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(WalkError::Config("checkpoint times must be positive and increasing".into()));
    }
    let table = JumpTable::new(v)?;
    let d = v.dims().d();
    let m = (2 * d) as f64;
    let per_sample: Vec<Vec<Vec<i64>>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(master_seed, i);
            let mut x = start_site(table.dims, start, &mut rng);
            let mut disp = vec![0i64; d];
            let mut prev = 0.0;
            times
                .iter()
                .map(|&t| {
                    let jumps = Poisson::new(m * (t - prev))
                        .map(|p| p.sample(&mut rng) as u64)
                        .unwrap_or(0);
                    prev = t;
                    for _ in 0..jumps {
                        let j = table.pick(x, rng.random::<f64>() * m);
                        let k = Direction::from_index(j);
                        disp[k.axis()] += k.sign() as i64;
                        x = table.neighbor(x, j);
                    }
                    disp.clone()
                })
                .collect()
        })
        .collect();
    Ok((0..times.len())
        .map(|c| per_sample.iter().map(|s| s[c].clone()).collect())
        .collect())
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            value: mean,
            se: (var / n as f64).sqrt(),
            samples: n,
        }
    }

    /// `|value - target| <= k * se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

/// `int_0^T Φ(S_t) dt` for one simple-walk path with total rate `2d`.
fn rwrs_one(table: &JumpTable, time: f64, seed: u64, index: u64) -> Vec<f64> {
    let dims = table.dims;
    let d = dims.d();
    let m = 2 * d;
    let mut rng = rng::stream(seed, index);
    let mut x = rng.random_range(0..dims.num_sites());
    let jumps = Poisson::new(m as f64 * time)
        .map(|p| p.sample(&mut rng) as u64)
        .unwrap_or(0);
    let gaps = spacings(jumps, time, &mut rng);
    let mut acc = vec![0.0; d];
    for (step, dt) in gaps.iter().enumerate() {
        for (a, p) in acc.iter_mut().zip(table.phi(x)) {
            *a += p * dt;
        }
        if step < jumps as usize {
            x = table.neighbor(x, rng.random_range(0..m));
        }
    }
    acc
}

/// `T^-1 E |int_0^T Φ(S_t) dt|^2` for the simple walk `S` (total rate `2d`,
/// uniform start), integrated exactly between jumps.
pub fn simulate_rwrs(
    v: &DriftField,
    time: f64,
    samples: usize,
    seed: u64,
) -> Result<Estimate, WalkError> {
    rwrs_matrix(v, time, samples, seed).map(|r| r.trace)
}

/// Per-entry estimates of `T^-1 E[I_i I_j]` and of the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwrsEstimate {
    pub matrix: Vec<Vec<Estimate>>,
    pub trace: Estimate,
}

pub fn rwrs_matrix(
    v: &DriftField,
    time: f64,
    samples: usize,
    seed: u64,
) -> Result<RwrsEstimate, WalkError> {
    if samples == 0 || !(time > 0.0) {
        return Err(WalkError::Config("need T > 0 and samples >= 1".into()));
    }
    let table = JumpTable::new(v)?;
    let d = v.dims().d();
    let ints: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| rwrs_one(&table, time, seed, i))
        .collect();
    let entry = |f: &dyn Fn(&[f64]) -> f64| {
        let xs: Vec<f64> = ints.iter().map(|s| f(s) / time).collect();
        Estimate::from_samples(&xs)
    };
    let matrix = (0..d)
        .map(|i| (0..d).map(|j| entry(&|s| s[i] * s[j])).collect())
        .collect();
    let trace = entry(&|s| s.iter().map(|x| x * x).sum());
    Ok(RwrsEstimate { matrix, trace })
}

/// `Y` and `Z` sampled at `0`, at every jump time and at `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub times: Vec<f64>,
    pub x: Vec<Vec<i64>>,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
}

/// Splits a recorded continuous-time path into `Y = X - Z` and
/// `Z(t) = int_0^t φ(η_s) ds`.
pub fn decompose(
    traj: &Trajectory,
    v: &DriftField,
    time: f64,
) -> Result<Decomposition, WalkError> {
    let events = traj.events.as_ref().ok_or_else(|| WalkError::RecordModeMismatch {
        needed: "full_path or decomposition".into(),
        found: "endpoint".into(),
    })?;
    let dims = v.dims();
    let d = dims.d();
    let mut site = traj.start;
    let mut last = 0.0;
    let mut xpos = vec![0i64; d];
    let mut z = vec![0.0; d];
    let mut out = Decomposition {
        times: vec![0.0],
        x: vec![xpos.clone()],
        y: vec![vec![0.0; d]],
        z: vec![z.clone()],
    };
    let push = |t: f64, xpos: &[i64], z: &[f64], out: &mut Decomposition| {
        out.times.push(t);
        out.x.push(xpos.to_vec());
        out.z.push(z.to_vec());
        out.y
            .push(xpos.iter().zip(z).map(|(&a, &b)| a as f64 - b).collect());
    };
    for e in events {
        for (i, zi) in z.iter_mut().enumerate() {
            *zi += v.phi_at(site, i) * (e.time - last);
        }
        last = e.time;
        xpos[e.direction.axis()] += e.direction.sign() as i64;
        site = dims.neighbor(site, e.direction);
        push(e.time, &xpos, &z, &mut out);
    }
    for (i, zi) in z.iter_mut().enumerate() {
        *zi += v.phi_at(site, i) * (time - last);
    }
    push(time, &xpos, &z, &mut out);
    Ok(out)
}

/// Departures from `site` by direction, counted over recorded paths.
pub fn departure_counts(trajs: &[Trajectory], dims: LatticeDims, site: usize) -> Vec<u64> {
    let mut counts = vec![0u64; 2 * dims.d()];
    for t in trajs {
        let Some(events) = &t.events else { continue };
        let mut x = t.start;
        for e in events {
            if x == site {
                counts[e.direction.index()] += 1;
            }
            x = dims.neighbor(x, e.direction);
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_plaquette_iid, GeneratorKind, GeneratorSpec};

    fn plaquette(l: usize, seed: u64) -> DriftField {
        let dims = LatticeDims::new(2, l).unwrap();
        gen_plaquette_iid(&GeneratorSpec::new(GeneratorKind::PlaquetteIid, dims, seed))
            .unwrap()
            .1
    }

    #[test]
    fn pick_respects_zero_rates() {
        use crate::generators::{manhattan_from_orientations, ManhattanOrientations};
        let dims = LatticeDims::new(2, 4).unwrap();
        let o = ManhattanOrientations::constant(dims, &[1, -1]).unwrap();
        let v = manhattan_from_orientations(o).unwrap().drift;
        let t = JumpTable::new(&v).unwrap();
        for x in 0..dims.num_sites() {
            let p: f64 = (0..4).map(|j| t.probability(x, j)).sum();
            assert!((p - 1.0).abs() < 1e-15);
            for u in [0.0, 1.0, 2.0, 3.999, 4.0] {
                assert!(t.probability(x, t.pick(x, u)) > 0.0);
            }
        }
    }

    #[test]
    fn endpoint_replay_matches() {
        let v = plaquette(8, 1);
        let cfg = WalkConfig::ctmc(20.0, 50, 3).with_record(RecordMode::FullPath);
        for t in simulate_ctmc(&v, &cfg).unwrap() {
            assert_eq!(t.replay(2).unwrap(), t.displacement);
            assert_eq!(t.events.as_ref().unwrap().len() as u64, t.jumps);
        }
    }

    #[test]
    fn record_mode_does_not_change_endpoints() {
        let v = plaquette(8, 2);
        let a = simulate_ctmc(&v, &WalkConfig::ctmc(10.0, 20, 5)).unwrap();
        let b = simulate_ctmc(
            &v,
            &WalkConfig::ctmc(10.0, 20, 5).with_record(RecordMode::Decomposition),
        )
        .unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.displacement, y.displacement);
            assert_eq!(x.start, y.start);
        }
    }

    #[test]
    fn zero_drift_has_zero_compensator() {
        let v = DriftField::zero(LatticeDims::new(2, 4).unwrap());
        let cfg = WalkConfig::ctmc(5.0, 10, 1).with_record(RecordMode::Decomposition);
        for t in simulate_ctmc(&v, &cfg).unwrap() {
            assert!(t.z.as_ref().unwrap().iter().all(|&z| z == 0.0));
            let y = t.y().unwrap();
            assert_eq!(y, t.displacement.iter().map(|&x| x as f64).collect::<Vec<_>>());
        }
        assert_eq!(simulate_rwrs(&v, 5.0, 10, 1).unwrap().value, 0.0);
    }

    #[test]
    fn decompose_needs_a_path() {
        let v = plaquette(4, 1);
        let t = simulate_ctmc(&v, &WalkConfig::ctmc(1.0, 1, 1)).unwrap();
        assert!(matches!(
            decompose(&t[0], &v, 1.0),
            Err(WalkError::RecordModeMismatch { .. })
        ));
    }

    #[test]
    fn decompose_agrees_with_inline_compensator() {
        let v = plaquette(8, 4);
        let cfg = WalkConfig::ctmc(30.0, 10, 9).with_record(RecordMode::Decomposition);
        for t in simulate_ctmc(&v, &cfg).unwrap() {
            let dec = decompose(&t, &v, 30.0).unwrap();
            let z_end = dec.z.last().unwrap();
            for (a, b) in z_end.iter().zip(t.z.as_ref().unwrap()) {
                assert!((a - b).abs() < 1e-9);
            }
            let x_end = dec.x.last().unwrap();
            assert_eq!(x_end, &t.displacement);
        }
    }

    #[test]
    fn lazy_zero_steps_stay_put() {
        let v = plaquette(4, 1);
        for t in simulate_lazy(&v, &WalkConfig::lazy(0, 5, 1)).unwrap() {
            assert_eq!(t.displacement, vec![0, 0]);
            assert_eq!(t.jumps, 0);
        }
    }

    #[test]
    fn wrong_horizon_is_a_config_error() {
        let v = plaquette(4, 1);
        assert!(simulate_lazy(&v, &WalkConfig::ctmc(1.0, 1, 1)).is_err());
        assert!(simulate_ctmc(&v, &WalkConfig::lazy(1, 1, 1)).is_err());
        assert!(simulate_ctmc(&v, &WalkConfig::ctmc(1.0, 0, 1)).is_err());
    }

    #[test]
    fn checkpoints_are_nested_and_diffusive_without_drift() {
        let v = DriftField::zero(LatticeDims::new(2, 64).unwrap());
        let out = ctmc_checkpoints(&v, &[1.0, 4.0], 4000, 9, StartMode::Origin).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].len(), 4000);
        for (c, t) in [(0, 1.0), (1, 4.0)] {
            let sq: Vec<f64> = out[c]
                .iter()
                .map(|x| x.iter().map(|&a| (a * a) as f64).sum::<f64>() / t)
                .collect();
            assert!(Estimate::from_samples(&sq).within(4.0, 5.0));
        }
        assert!(ctmc_checkpoints(&v, &[2.0, 1.0], 10, 1, StartMode::Origin).is_err());
    }
}
