//! Time-to-solution estimation and schedule scans.
//!
//! Each instance is annealed repeatedly until the accumulated success
//! fraction reaches a target, giving `s = successes / repetitions` and the
//! mean number of repetitions `tau = 1 / s`. Repetition `r` of instance `i`
//! always draws from the stream `(master, Anneal, i, r)`, and repetitions are
//! accumulated in index order, so records do not depend on thread count.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annealers::{Annealer, AnnealerConfig};
use crate::error::{Error, Result};
use crate::instances::CouplingInstance;
use crate::rng::{self, Stage};

pub const DEFAULT_TARGET_SUCCESSES: f64 = 100.0;
pub const DEFAULT_CAP: u64 = 1_000_000;
pub const DEFAULT_QUANTILES: [f64; 4] = [0.5, 0.75, 0.9, 0.99];
pub const DEFAULT_BOOTSTRAP: usize = 1000;

/// Ground energies keyed by instance id.
pub type GroundEnergies = BTreeMap<u64, i64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtsOptions {
    pub target_successes: f64,
    pub cap: u64,
}

impl Default for TtsOptions {
    fn default() -> Self {
        Self {
            target_successes: DEFAULT_TARGET_SUCCESSES,
            cap: DEFAULT_CAP,
        }
    }
}

impl TtsOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_successes > 0.0) {
            return Err(Error::invalid(format!(
                "target successes must be positive, got {}",
                self.target_successes
            )));
        }
        if (self.cap as f64) < self.target_successes {
            return Err(Error::invalid(format!(
                "cap {} is below the target of {} successes",
                self.cap, self.target_successes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtsRecord {
    pub instance_id: u64,
    pub s: f64,
    pub tau: f64,
    pub repetitions: u64,
    /// Sum of per-run success fractions.
    pub successes: f64,
    /// The cap was hit without a single success; `s = 1 / cap`.
    pub is_upper_bound: bool,
}

impl TtsRecord {
    /// Total effort `t_a * tau` in sweeps.
    pub fn effort(&self, t_a: u64) -> f64 {
        t_a as f64 * self.tau
    }
}

/// Nudges `s` by at most [`RECIPROCAL_ULPS`] ulps so that `(1 / s) * s == 1`
/// holds exactly. The nearest such neighbour is chosen, preferring smaller.
fn reciprocal_pair(s: f64) -> (f64, f64) {
    let exact = |c: f64| c > 0.0 && c <= 1.0 && (1.0 / c) * c == 1.0;
    let (mut down, mut up) = (s, s);
    for _ in 0..=RECIPROCAL_ULPS {
        if exact(down) {
            return (down, 1.0 / down);
        }
        if exact(up) {
            return (up, 1.0 / up);
        }
        down = down.next_down();
        up = up.next_up();
    }
    (s, 1.0 / s)
}

/// Around `1/sqrt(2)` the nearest such value can be ~4e4 ulps away, still
/// under 1e-11 relative and far below the sampling error of `s`.
const RECIPROCAL_ULPS: usize = 1 << 20;

/// Repeats `annealer` on `instance` until the accumulated success fraction
/// reaches the target or `cap` repetitions have run.
pub fn estimate_tau<A: Annealer + ?Sized>(
    instance: &CouplingInstance,
    annealer: &A,
    e0: i64,
    opts: &TtsOptions,
    master_seed: u64,
) -> Result<TtsRecord> {
    opts.validate()?;
    let id = instance.id();
    let mut successes = 0.0;
    let mut repetitions = 0;
    while successes < opts.target_successes && repetitions < opts.cap {
        let mut rng = rng::stream(master_seed, Stage::Anneal, id, repetitions);
        successes += annealer.run(instance, e0, &mut rng).success_fraction;
        repetitions += 1;
    }
    if successes == 0.0 {
        return Ok(TtsRecord {
            instance_id: id,
            s: 1.0 / opts.cap as f64,
            tau: opts.cap as f64,
            repetitions,
            successes,
            is_upper_bound: true,
        });
    }
    let (s, tau) = reciprocal_pair(successes / repetitions as f64);
    Ok(TtsRecord {
        instance_id: id,
        s,
        tau,
        repetitions,
        successes,
        is_upper_bound: false,
    })
}

/// One record per instance in input order. A missing ground energy yields
/// an error entry for that instance only.
pub fn batch_tts<A: Annealer + ?Sized>(
    instances: &[CouplingInstance],
    e0: &GroundEnergies,
    annealer: &A,
    opts: &TtsOptions,
    master_seed: u64,
) -> Vec<Result<TtsRecord>> {
    instances
        .par_iter()
        .map(|inst| {
            let &energy = e0.get(&inst.id()).ok_or(Error::MissingGroundEnergy(inst.id()))?;
            estimate_tau(inst, annealer, energy, opts, master_seed)
        })
        .collect()
}

/// Like [`batch_tts`] but fails on the first error, in instance order.
pub fn batch_tts_strict<A: Annealer + ?Sized>(
    instances: &[CouplingInstance],
    e0: &GroundEnergies,
    annealer: &A,
    opts: &TtsOptions,
    master_seed: u64,
) -> Result<Vec<TtsRecord>> {
    batch_tts(instances, e0, annealer, opts, master_seed).into_iter().collect()
}

/// Runs `f` on a dedicated pool with `threads` workers, or on the global
/// pool when `threads` is `None`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

pub fn write_records<W: Write>(out: W, records: &[TtsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("csv: {e}")))
}

pub fn read_records<R: Read>(input: R, source: &str) -> Result<Vec<TtsRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    rd.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                path: source.to_string(),
                line: i + 2,
                msg: e.to_string(),
            })
        })
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}

/// Nearest-rank quantile `x[ceil(q n) - 1]` of an ascending sample.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Efforts in ascending order with upper-bound records placed last.
fn sorted_efforts(records: &[TtsRecord], t_a: u64) -> Vec<f64> {
    let mut keyed: Vec<(bool, f64)> = records.iter().map(|r| (r.is_upper_bound, r.effort(t_a))).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<f64> = keyed.into_iter().map(|k| k.1).collect();
    // Keep the ordering monotone even if a bound is smaller than a finite value.
    for i in 1..out.len() {
        if out[i] < out[i - 1] {
            out[i] = out[i - 1];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub quantiles: Vec<f64>,
    pub bootstrap: usize,
    pub confidence: f64,
    pub tts: TtsOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            quantiles: DEFAULT_QUANTILES.to_vec(),
            bootstrap: DEFAULT_BOOTSTRAP,
            confidence: 0.95,
            tts: TtsOptions::default(),
        }
    }
}

impl ScanOptions {
    fn validate(&self) -> Result<()> {
        self.tts.validate()?;
        if self.quantiles.is_empty() || self.quantiles.iter().any(|q| !(*q > 0.0 && *q <= 1.0)) {
            return Err(Error::invalid("quantile levels must lie in (0, 1]"));
        }
        if self.quantiles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("quantile levels must be strictly increasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    /// Scanned value (`t_a` or `beta`).
    pub value: f64,
    /// Annealing time whose records produced this point.
    pub t_a: u64,
    pub quantiles: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub median: f64,
    pub upper_bounds: usize,
    pub records: Vec<TtsRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// `"t_a"` or `"beta"`.
    pub axis: String,
    pub grid: Vec<f64>,
    pub quantile_levels: Vec<f64>,
    pub points: Vec<ScanPoint>,
    /// Grid value minimizing the median effort.
    pub optimum: f64,
    pub optimum_t_a: u64,
    /// Quantile levels whose minimum lies at a different grid value, paired
    /// with that value.
    pub disagreements: Vec<(f64, f64)>,
}

fn summarize(value: f64, t_a: u64, records: Vec<TtsRecord>, opts: &ScanOptions, seed: u64) -> ScanPoint {
    let efforts = sorted_efforts(&records, t_a);
    let quantiles = opts.quantiles.iter().map(|&q| nearest_rank(&efforts, q)).collect();
    let (ci_low, ci_high) = bootstrap_intervals(&efforts, &opts.quantiles, opts.bootstrap, opts.confidence, seed);
    ScanPoint {
        value,
        t_a,
        quantiles,
        ci_low,
        ci_high,
        median: nearest_rank(&efforts, 0.5),
        upper_bounds: records.iter().filter(|r| r.is_upper_bound).count(),
        records,
    }
}

/// Percentile bootstrap intervals for each quantile level.
pub fn bootstrap_intervals(sorted: &[f64], levels: &[f64], resamples: usize, confidence: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    if resamples == 0 || sorted.is_empty() {
        let q: Vec<f64> = levels.iter().map(|&l| nearest_rank(sorted, l)).collect();
        return (q.clone(), q);
    }
    let n = sorted.len();
    let mut rng = rng::from_seed(seed);
    let mut draws = vec![Vec::with_capacity(resamples); levels.len()];
    let mut buf = vec![0.0; n];
    for _ in 0..resamples {
        // Sorting indices is cheaper than sorting values and keeps ties stable.
        let mut idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        idx.sort_unstable();
        for (b, &i) in buf.iter_mut().zip(&idx) {
            *b = sorted[i];
        }
        for (d, &l) in draws.iter_mut().zip(levels) {
            d.push(nearest_rank(&buf, l));
        }
    }
    let alpha = (1.0 - confidence) / 2.0;
    draws
        .into_iter()
        .map(|mut d| {
            d.sort_by(f64::total_cmp);
            (nearest_rank(&d, alpha), nearest_rank(&d, 1.0 - alpha))
        })
        .unzip()
}

fn pick_optimum(axis: &str, points: Vec<ScanPoint>, levels: Vec<f64>) -> ScanResult {
    let argmin = |key: &dyn Fn(&ScanPoint) -> f64| {
        (0..points.len()).fold(0, |best, i| if key(&points[i]) < key(&points[best]) { i } else { best })
    };
    let best = argmin(&|p| p.median);
    let disagreements = levels
        .iter()
        .enumerate()
        .filter_map(|(qi, &q)| {
            let i = argmin(&|p| p.quantiles[qi]);
            (points[i].quantiles[qi] < points[best].quantiles[qi]).then(|| (q, points[i].value))
        })
        .collect();
    ScanResult {
        axis: axis.to_string(),
        grid: points.iter().map(|p| p.value).collect(),
        quantile_levels: levels,
        optimum: points[best].value,
        optimum_t_a: points[best].t_a,
        disagreements,
        points,
    }
}

fn check_grid<T: PartialOrd + Copy>(grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("scan grid is empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("scan grid must be strictly ascending"));
    }
    Ok(())
}

/// Scans annealing times; `make(t_a)` builds the annealer for each grid
/// point. Each point reuses the same repetition streams.
pub fn scan_annealing_time<A: Annealer, F: Fn(u64) -> A>(
    instances: &[CouplingInstance],
    e0: &GroundEnergies,
    grid: &[u64],
    make: F,
    opts: &ScanOptions,
    master_seed: u64,
) -> Result<ScanResult> {
    check_grid(grid)?;
    opts.validate()?;
    if instances.is_empty() {
        return Err(Error::invalid("no instances to scan"));
    }
    let points = grid
        .iter()
        .enumerate()
        .map(|(i, &t_a)| {
            let annealer = make(t_a);
            let records = batch_tts_strict(instances, e0, &annealer, &opts.tts, master_seed)?;
            let seed = rng::stream_seed(master_seed, Stage::Bootstrap, t_a, i as u64);
            Ok(summarize(t_a as f64, t_a, records, opts, seed))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pick_optimum("t_a", points, opts.quantiles.clone()))
}

/// Scans inverse temperatures. At each `beta` an inner annealing-time scan
/// over `ta_grid` picks `t_a_opt`, and that point represents the `beta`.
pub fn scan_beta<A: Annealer, F: Fn(f64, u64) -> A>(
    instances: &[CouplingInstance],
    e0: &GroundEnergies,
    beta_grid: &[f64],
    ta_grid: &[u64],
    make: F,
    opts: &ScanOptions,
    master_seed: u64,
) -> Result<ScanResult> {
    check_grid(beta_grid)?;
    let points = beta_grid
        .iter()
        .map(|&beta| {
            let inner = scan_annealing_time(instances, e0, ta_grid, |t_a| make(beta, t_a), opts, master_seed)?;
            let mut best = inner
                .points
                .into_iter()
                .find(|p| p.t_a == inner.optimum_t_a)
                .expect("optimum is a grid point");
            best.value = beta;
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pick_optimum("beta", points, opts.quantiles.clone()))
}

/// Annealing-time scan for a configured algorithm.
pub fn scan_config_ta(
    instances: &[CouplingInstance],
    e0: &GroundEnergies,
    base: &AnnealerConfig,
    grid: &[u64],
    opts: &ScanOptions,
    master_seed: u64,
) -> Result<ScanResult> {
    base.validate()?;
    scan_annealing_time(instances, e0, grid, |t_a| base.with_sweeps(t_a), opts, master_seed)
}

pub fn scan_config_beta(
    instances: &[CouplingInstance],
    e0: &GroundEnergies,
    base: &AnnealerConfig,
    beta_grid: &[f64],
    ta_grid: &[u64],
    opts: &ScanOptions,
    master_seed: u64,
) -> Result<ScanResult> {
    base.with_beta(1.0)?;
    let configs = beta_grid
        .iter()
        .map(|&b| {
            let c = base.with_beta(b)?;
            c.validate().map(|_| c)
        })
        .collect::<Result<Vec<_>>>()?;
    scan_beta(
        instances,
        e0,
        beta_grid,
        ta_grid,
        |beta, t_a| {
            let i = beta_grid.iter().position(|&b| b == beta).expect("grid value");
            configs[i].with_sweeps(t_a)
        },
        opts,
        master_seed,
    )
}

/// Partial means `(sum_{i<=n} tau_i) / n`.
pub fn running_mean(taus: &[f64]) -> Result<Vec<f64>> {
    if taus.is_empty() {
        return Err(Error::invalid("running mean of an empty sequence"));
    }
    let mut sum = 0.0;
    Ok(taus
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            sum += t;
            sum / (i + 1) as f64
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub instance_id: u64,
    pub tau_a: f64,
    pub tau_b: f64,
    pub effort_a: f64,
    pub effort_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub pairs: Vec<CorrelationPair>,
    /// Instances whose success probability is higher under schedule B.
    pub higher_s_b: usize,
    /// Instances whose total effort is lower under schedule B.
    pub lower_effort_b: usize,
}

/// Joins two record sets by instance id, ordered by id.
pub fn correlation_pairs(a: &[TtsRecord], t_a_a: u64, b: &[TtsRecord], t_a_b: u64) -> Result<Correlation> {
    let index = |rs: &[TtsRecord]| rs.iter().map(|r| (r.instance_id, *r)).collect::<BTreeMap<_, _>>();
    let (ia, ib) = (index(a), index(b));
    let ka: BTreeSet<u64> = ia.keys().copied().collect();
    let kb: BTreeSet<u64> = ib.keys().copied().collect();
    let unmatched: Vec<u64> = ka.symmetric_difference(&kb).copied().collect();
    if !unmatched.is_empty() {
        return Err(Error::UnmatchedIds(unmatched));
    }
    let pairs: Vec<CorrelationPair> = ia
        .values()
        .map(|ra| {
            let rb = &ib[&ra.instance_id];
            CorrelationPair {
                instance_id: ra.instance_id,
                tau_a: ra.tau,
                tau_b: rb.tau,
                effort_a: ra.effort(t_a_a),
                effort_b: rb.effort(t_a_b),
            }
        })
        .collect();
    let higher_s_b = ia.values().filter(|ra| ib[&ra.instance_id].s > ra.s).count();
    let lower_effort_b = pairs.iter().filter(|p| p.effort_b < p.effort_a).count();
    Ok(Correlation {
        pairs,
        higher_s_b,
        lower_effort_b,
    })
}
