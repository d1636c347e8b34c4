//! Campaign orchestration: instances, ground energies, time-to-solution
//! records, schedule scans, tail fits and reports, written under one output
//! directory with a content-hash manifest.
//!
//! Stages run in a fixed order and each one reads its inputs back from disk,
//! so a resumed campaign produces the same bytes as an uninterrupted one.
//! A checkpoint file records the canonical configuration text, its hash and
//! the completed stages.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annealers::{Annealer, AnnealerConfig};
use crate::error::{Error, Result};
use crate::evt::{
    exceedances, fit_gpd_mle, pp_points, qq_points, tail_model, threshold_scan, EmpiricalCdf, GpdFit,
    DEFAULT_MIN_EXCEEDANCES,
};
use crate::exact::{dp_ground, DEFAULT_MAX_FRONTIER_COLS};
use crate::harness::{
    batch_tts_strict, correlation_pairs, read_records, running_mean, scan_config_beta, scan_config_ta, with_threads,
    write_records, GroundEnergies, ScanOptions, TtsOptions, TtsRecord, DEFAULT_BOOTSTRAP, DEFAULT_CAP,
    DEFAULT_QUANTILES, DEFAULT_TARGET_SUCCESSES,
};
use crate::instances::{batch_instance, ChimeraGraph, CouplingInstance};
use crate::rng;

/// Environment variable that may supply the output directory.
pub const OUTPUT_ENV: &str = "CHIMERA_TTS_OUT";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub t_a_grid: Vec<u64>,
    /// Inverse temperatures scanned for SQA and MFA; empty skips the scan.
    #[serde(default)]
    pub beta_grid: Vec<f64>,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
}

/// Declarative campaign description, read from TOML.
///
/// ```toml
/// seed = 7
/// sizes = [1, 2]
/// instances = 20
/// target_successes = 100
/// cap = 1000000
/// k_grid = [30, 50, 100]
///
/// [[algorithms]]
/// algorithm = "sa"
/// t_a = 100
///
/// [[algorithms]]
/// algorithm = "sqa"
/// t_a = 150
/// beta = 10.0
///
/// [scan]
/// t_a_grid = [50, 100, 150]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub seed: u64,
    /// Not part of the configuration identity; see [`resolve_output`].
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    pub sizes: Vec<usize>,
    pub instances: usize,
    #[serde(default = "default_target")]
    pub target_successes: f64,
    #[serde(default = "default_cap")]
    pub cap: u64,
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<usize>,
    /// Exceedance count of the summary fit; defaults to the largest usable
    /// entry of `k_grid`.
    #[serde(default)]
    pub tail_k: Option<usize>,
    pub algorithms: Vec<AnnealerConfig>,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
}

fn default_target() -> f64 {
    DEFAULT_TARGET_SUCCESSES
}

fn default_cap() -> u64 {
    DEFAULT_CAP
}

fn default_k_grid() -> Vec<usize> {
    vec![30, 50, 100, 200, 500, 1000]
}

fn default_quantiles() -> Vec<f64> {
    DEFAULT_QUANTILES.to_vec()
}

fn default_bootstrap() -> usize {
    DEFAULT_BOOTSTRAP
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.sizes.is_empty() {
            return bad("no sizes given".into());
        }
        for &l in &self.sizes {
            if l == 0 || l > DEFAULT_MAX_FRONTIER_COLS {
                return bad(format!(
                    "size L={l} outside the exact solver range 1..={DEFAULT_MAX_FRONTIER_COLS}"
                ));
            }
        }
        if self.instances == 0 {
            return bad("instance count must be positive".into());
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms given".into());
        }
        for a in &self.algorithms {
            a.validate().map_err(|e| Error::Config(format!("{}: {e}", a.label())))?;
        }
        let mut labels: Vec<String> = self.algorithms.iter().map(|a| a.label()).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate algorithm schedule {}", w[0]));
        }
        self.tts_options().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.k_grid.contains(&0) {
            return bad("k_grid entries must be positive".into());
        }
        if let Some(scan) = &self.scan {
            if scan.t_a_grid.is_empty() || scan.t_a_grid.windows(2).any(|w| w[0] >= w[1]) || scan.t_a_grid[0] == 0 {
                return bad("scan.t_a_grid must be non-empty, positive and ascending".into());
            }
            if scan.beta_grid.windows(2).any(|w| w[0] >= w[1]) || scan.beta_grid.iter().any(|b| !(*b > 0.0)) {
                return bad("scan.beta_grid must be positive and ascending".into());
            }
        }
        Ok(())
    }

    /// Canonical TOML text; identical for configurations that parse equal.
    pub fn canonical(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical()?.as_bytes())))
    }

    pub fn tts_options(&self) -> TtsOptions {
        TtsOptions {
            target_successes: self.target_successes,
            cap: self.cap,
        }
    }
}

/// Output directory: explicit argument, then [`OUTPUT_ENV`], then the
/// configuration's `output` key.
pub fn resolve_output(explicit: Option<&Path>, cfg: &CampaignConfig) -> Result<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::Config(format!("no output directory: pass --out, set {OUTPUT_ENV} or set `output`")))
}

/// Seed of the instance batch for size `l`.
pub fn size_seed(master: u64, l: usize) -> u64 {
    rng::derive_seed(&[master, l as u64])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PipelineStage {
    Generate,
    Solve,
    Tts,
    Scan,
    Tail,
    Report,
}

impl PipelineStage {
    pub const ALL: [PipelineStage; 6] = [
        PipelineStage::Generate,
        PipelineStage::Solve,
        PipelineStage::Tts,
        PipelineStage::Scan,
        PipelineStage::Tail,
        PipelineStage::Report,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PipelineStage::Generate => "generate",
            PipelineStage::Solve => "solve",
            PipelineStage::Tts => "tts",
            PipelineStage::Scan => "scan",
            PipelineStage::Tail => "tail",
            PipelineStage::Report => "report",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::invalid(format!("unknown stage `{name}`")))
    }
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    pub threads: Option<usize>,
    /// Stop (as if interrupted) after this stage completes.
    pub stop_after: Option<PipelineStage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_hash: String,
    pub config: String,
    pub completed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub schedule: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: Option<usize>,
    pub u: Option<f64>,
    pub xi: Option<f64>,
    pub xi_se: Option<f64>,
    pub sigma: Option<f64>,
    pub sigma_se: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub out: PathBuf,
    pub completed: Vec<PipelineStage>,
    pub finished: bool,
    pub manifest: BTreeMap<String, String>,
}

/// Runs every stage from scratch, discarding any previous checkpoint.
pub fn run_pipeline(cfg: &CampaignConfig, out: &Path, opts: &PipelineOptions) -> Result<PipelineReport> {
    cfg.validate()?;
    let cp = out.join(CHECKPOINT_FILE);
    if cp.exists() {
        fs::remove_file(&cp).map_err(|e| Error::io(&cp, e))?;
    }
    execute(cfg, out, opts, Vec::new())
}

/// Continues from the checkpoint in `out`, or runs from scratch if there is
/// none. Refuses when the checkpoint belongs to a different configuration.
pub fn resume(cfg: &CampaignConfig, out: &Path, opts: &PipelineOptions) -> Result<PipelineReport> {
    cfg.validate()?;
    let done = match read_checkpoint(out)? {
        None => Vec::new(),
        Some(cp) => {
            if cp.config_hash != cfg.hash()? {
                return Err(Error::CheckpointMismatch(line_diff(&cp.config, &cfg.canonical()?)));
            }
            cp.completed.iter().map(|s| PipelineStage::parse(s)).collect::<Result<Vec<_>>>()?
        }
    };
    execute(cfg, out, opts, done)
}

pub fn read_checkpoint(out: &Path) -> Result<Option<Checkpoint>> {
    let path = out.join(CHECKPOINT_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(Some(serde_json::from_str(&text)?))
}

fn line_diff(old: &str, new: &str) -> String {
    let old_lines: Vec<&str> = old.lines().collect();
    let new_lines: Vec<&str> = new.lines().collect();
    let mut diff = String::new();
    for l in &old_lines {
        if !new_lines.contains(l) {
            diff.push_str(&format!("- {l}\n"));
        }
    }
    for l in &new_lines {
        if !old_lines.contains(l) {
            diff.push_str(&format!("+ {l}\n"));
        }
    }
    diff
}

fn execute(cfg: &CampaignConfig, out: &Path, opts: &PipelineOptions, mut done: Vec<PipelineStage>) -> Result<PipelineReport> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let campaign = Campaign { cfg, out };
    with_threads(opts.threads, || -> Result<PipelineReport> {
        for stage in PipelineStage::ALL {
            if done.contains(&stage) {
                log::info!("stage {} already complete", stage.name());
                continue;
            }
            log::info!("stage {} starting", stage.name());
            campaign.run_stage(stage).map_err(|e| Error::Stage {
                stage: stage.name().to_string(),
                source: Box::new(e),
            })?;
            done.push(stage);
            campaign.write_checkpoint(&done)?;
            if opts.stop_after == Some(stage) && stage != PipelineStage::Report {
                return Ok(PipelineReport {
                    out: out.to_path_buf(),
                    completed: done,
                    finished: false,
                    manifest: BTreeMap::new(),
                });
            }
        }
        let manifest = write_manifest(out)?;
        Ok(PipelineReport {
            out: out.to_path_buf(),
            completed: done,
            finished: true,
            manifest,
        })
    })?
}

struct Campaign<'a> {
    cfg: &'a CampaignConfig,
    out: &'a Path,
}

impl Campaign<'_> {
    fn run_stage(&self, stage: PipelineStage) -> Result<()> {
        match stage {
            PipelineStage::Generate => self.generate(),
            PipelineStage::Solve => self.solve(),
            PipelineStage::Tts => self.tts(),
            PipelineStage::Scan => self.scan(),
            PipelineStage::Tail => self.tail(),
            PipelineStage::Report => self.report(),
        }
    }

    fn write_checkpoint(&self, done: &[PipelineStage]) -> Result<()> {
        let cp = Checkpoint {
            config_hash: self.cfg.hash()?,
            config: self.cfg.canonical()?,
            completed: done.iter().map(|s| s.name().to_string()).collect(),
        };
        write_file(&self.out.join(CHECKPOINT_FILE), serde_json::to_string_pretty(&cp)?.as_bytes())
    }

    fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.out.join(rel)
    }

    fn instance_dir(&self, l: usize) -> PathBuf {
        self.path(format!("instances/L{l}"))
    }

    fn e0_path(&self, l: usize) -> PathBuf {
        self.path(format!("e0/L{l}.csv"))
    }

    fn tts_path(&self, l: usize, alg: &AnnealerConfig) -> PathBuf {
        self.path(format!("tts/L{l}_{}.csv", alg.label()))
    }

    fn anneal_seed(&self, l: usize) -> u64 {
        rng::derive_seed(&[self.cfg.seed, l as u64, rng::Stage::Anneal as u64])
    }

    fn generate(&self) -> Result<()> {
        for &l in &self.cfg.sizes {
            let graph = ChimeraGraph::new(l)?;
            let seed = size_seed(self.cfg.seed, l);
            let insts: Vec<CouplingInstance> = (0..self.cfg.instances as u64)
                .into_par_iter()
                .map(|id| batch_instance(&graph, seed, id))
                .collect();
            write_instances(&self.instance_dir(l), &insts)?;
        }
        Ok(())
    }

    fn solve(&self) -> Result<()> {
        for &l in &self.cfg.sizes {
            let insts = read_instances(&self.instance_dir(l))?;
            let e0 = solve_all(&insts)?;
            write_ground_energies(&self.e0_path(l), &e0)?;
        }
        Ok(())
    }

    fn tts(&self) -> Result<()> {
        let opts = self.cfg.tts_options();
        for &l in &self.cfg.sizes {
            let insts = read_instances(&self.instance_dir(l))?;
            let e0 = read_ground_energies(&self.e0_path(l))?;
            for alg in &self.cfg.algorithms {
                log::info!("tts L={l} {}", alg.label());
                let records = batch_tts_strict(&insts, &e0, alg, &opts, self.anneal_seed(l))?;
                let mut buf = Vec::new();
                write_records(&mut buf, &records)?;
                write_file(&self.tts_path(l, alg), &buf)?;
            }
        }
        Ok(())
    }

    fn scan(&self) -> Result<()> {
        let Some(scan) = &self.cfg.scan else {
            return Ok(());
        };
        let opts = ScanOptions {
            quantiles: scan.quantiles.clone(),
            bootstrap: scan.bootstrap,
            confidence: 0.95,
            tts: self.cfg.tts_options(),
        };
        for &l in &self.cfg.sizes {
            let insts = read_instances(&self.instance_dir(l))?;
            let e0 = read_ground_energies(&self.e0_path(l))?;
            for alg in &self.cfg.algorithms {
                log::info!("scan t_a L={l} {}", alg.label());
                let result = scan_config_ta(&insts, &e0, alg, &scan.t_a_grid, &opts, self.anneal_seed(l))?;
                write_json(&self.path(format!("scans/L{l}_{}_ta.json", alg.label())), &result)?;
                if !scan.beta_grid.is_empty() && !matches!(alg, AnnealerConfig::Sa(_)) {
                    log::info!("scan beta L={l} {}", alg.label());
                    let result =
                        scan_config_beta(&insts, &e0, alg, &scan.beta_grid, &scan.t_a_grid, &opts, self.anneal_seed(l))?;
                    write_json(&self.path(format!("scans/L{l}_{}_beta.json", alg.label())), &result)?;
                }
            }
        }
        Ok(())
    }

    fn summary_k(&self, n: usize) -> Option<usize> {
        self.cfg
            .tail_k
            .or_else(|| self.cfg.k_grid.iter().copied().filter(|&k| k < n).max())
    }

    fn tail(&self) -> Result<()> {
        for &l in &self.cfg.sizes {
            for alg in &self.cfg.algorithms {
                let records = load_records(&self.tts_path(l, alg))?;
                let taus: Vec<f64> = records.iter().map(|r| r.tau).collect();
                let stem = format!("fits/L{l}_{}", alg.label());
                let scan = threshold_scan(&taus, &self.cfg.k_grid)?;
                write_json(&self.path(format!("{stem}_scan.json")), &scan)?;
                let fit = self.summary_fit(&taus);
                match &fit {
                    Ok((fit, _)) => {
                        write_json(&self.path(format!("{stem}.json")), fit)?;
                        let ecdf = EmpiricalCdf::new(&taus)?;
                        let model = tail_model(fit, ecdf.eval(fit.u()));
                        let excess = exceedances(&taus, fit.u());
                        write_points(&self.path(format!("{stem}_pp.csv")), ("model_cdf", "empirical"), &pp_points(&excess, &fit.params))?;
                        write_points(&self.path(format!("{stem}_qq.csv")), ("model_quantile", "observed"), &qq_points(&excess, &fit.params)?)?;
                        match model {
                            Ok(m) => write_json(&self.path(format!("{stem}_tail.json")), &m)?,
                            Err(e) => write_json(&self.path(format!("{stem}_tail.json")), &ErrorRecord::new(&e))?,
                        }
                    }
                    Err(e) => write_json(&self.path(format!("{stem}.json")), &ErrorRecord::new(e))?,
                }
            }
        }
        Ok(())
    }

    fn summary_fit(&self, taus: &[f64]) -> Result<(GpdFit, usize)> {
        let k = self.summary_k(taus.len()).ok_or(Error::InsufficientExceedances {
            k: taus.len().saturating_sub(1),
            floor: DEFAULT_MIN_EXCEEDANCES,
        })?;
        if k >= taus.len() {
            return Err(Error::InsufficientExceedances {
                k: taus.len().saturating_sub(1),
                floor: k,
            });
        }
        let mut sorted = taus.to_vec();
        sorted.sort_by(f64::total_cmp);
        let u = sorted[sorted.len() - 1 - k];
        Ok((fit_gpd_mle(taus, u)?, k))
    }

    fn report(&self) -> Result<()> {
        let mut rows = Vec::new();
        for &l in &self.cfg.sizes {
            let n_spins = ChimeraGraph::new(l)?.num_spins();
            let mut loaded = Vec::new();
            for alg in &self.cfg.algorithms {
                let mut records = load_records(&self.tts_path(l, alg))?;
                records.sort_by_key(|r| r.instance_id);
                let taus: Vec<f64> = records.iter().map(|r| r.tau).collect();
                let means = running_mean(&taus)?;
                let pts: Vec<(f64, f64)> = means.iter().enumerate().map(|(i, &m)| ((i + 1) as f64, m)).collect();
                write_points(&self.path(format!("report/L{l}_{}_running_mean.csv", alg.label())), ("n", "running_mean"), &pts)?;
                let row = match self.summary_fit(&taus) {
                    Ok((fit, k)) => SummaryRow {
                        algorithm: alg.name().into(),
                        schedule: alg.label(),
                        n: n_spins,
                        k: Some(k),
                        u: Some(fit.u()),
                        xi: Some(fit.xi()),
                        xi_se: Some(fit.xi_se),
                        sigma: Some(fit.sigma()),
                        sigma_se: Some(fit.sigma_se),
                        error: None,
                    },
                    Err(e) => SummaryRow {
                        algorithm: alg.name().into(),
                        schedule: alg.label(),
                        n: n_spins,
                        k: None,
                        u: None,
                        xi: None,
                        xi_se: None,
                        sigma: None,
                        sigma_se: None,
                        error: Some(e.to_string()),
                    },
                };
                rows.push(row);
                loaded.push((alg, records));
            }
            for (i, (a, ra)) in loaded.iter().enumerate() {
                for (b, rb) in &loaded[i + 1..] {
                    let corr = correlation_pairs(ra, a.sweeps(), rb, b.sweeps())?;
                    let stem = format!("report/L{l}_{}_vs_{}", a.label(), b.label());
                    let mut w = csv::Writer::from_writer(Vec::new());
                    for p in &corr.pairs {
                        w.serialize(p).map_err(|e| Error::invalid(e.to_string()))?;
                    }
                    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
                    write_file(&self.path(format!("{stem}_correlation.csv")), &bytes)?;
                    write_json(
                        &self.path(format!("{stem}_counts.json")),
                        &serde_json::json!({
                            "instances": corr.pairs.len(),
                            "higher_s_b": corr.higher_s_b,
                            "lower_effort_b": corr.lower_effort_b,
                        }),
                    )?;
                }
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            w.serialize(r).map_err(|e| Error::invalid(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        write_file(&self.path("summary.csv"), &bytes)
    }
}

#[derive(Serialize)]
struct ErrorRecord {
    error: String,
}

impl ErrorRecord {
    fn new(e: &Error) -> Self {
        Self { error: e.to_string() }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Two-column CSV with the given header.
pub fn write_points(path: &Path, header: (&str, &str), points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::invalid(e.to_string());
    w.write_record([header.0, header.1]).map_err(err)?;
    for (a, b) in points {
        w.serialize((a, b)).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    write_file(path, &bytes)
}

/// Writes `{id:06}.txt` per instance into `dir`.
pub fn write_instances(dir: &Path, instances: &[CouplingInstance]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for inst in instances {
        write_file(&dir.join(format!("{:06}.txt", inst.id())), inst.to_text().as_bytes())?;
    }
    Ok(())
}

/// Reads every `*.txt` instance in `dir`; the id is the file stem.
pub fn read_instances(dir: &Path) -> Result<Vec<CouplingInstance>> {
    let mut files: Vec<(u64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::invalid(format!("instance file name {} is not a numeric id", path.display())))?;
        files.push((id, path));
    }
    files.sort();
    files
        .par_iter()
        .map(|(id, path)| {
            let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            CouplingInstance::read(BufReader::new(f), *id, &path.display().to_string())
        })
        .collect()
}

pub fn solve_all(instances: &[CouplingInstance]) -> Result<GroundEnergies> {
    instances
        .par_iter()
        .map(|inst| Ok((inst.id(), dp_ground(inst)?.energy)))
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().collect())
}

#[derive(Serialize, Deserialize)]
struct GroundRow {
    instance_id: u64,
    #[serde(rename = "E0")]
    e0: i64,
}

pub fn ground_energies_csv(e0: &GroundEnergies) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (&instance_id, &e0) in e0 {
        w.serialize(GroundRow { instance_id, e0 }).map_err(|e| Error::invalid(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::invalid(e.to_string()))
}

pub fn write_ground_energies(path: &Path, e0: &GroundEnergies) -> Result<()> {
    write_file(path, &ground_energies_csv(e0)?)
}

pub fn read_ground_energies(path: &Path) -> Result<GroundEnergies> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rd = csv::Reader::from_reader(f);
    rd.deserialize::<GroundRow>()
        .enumerate()
        .map(|(i, r)| {
            r.map(|g| (g.instance_id, g.e0)).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 2,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn load_records(path: &Path) -> Result<Vec<TtsRecord>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(f, &path.display().to_string())
}

/// Hashes every file under `out` except the checkpoint and the manifest.
pub fn compute_manifest(out: &Path) -> Result<BTreeMap<String, String>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<String, String>) -> Result<()> {
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(root, &path, acc)?;
                continue;
            }
            let rel: Vec<String> = path
                .strip_prefix(root)
                .expect("walk stays under root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect();
            let rel = rel.join("/");
            if rel == CHECKPOINT_FILE || rel == MANIFEST_FILE {
                continue;
            }
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            acc.insert(rel, hex::encode(Sha256::digest(&bytes)));
        }
        Ok(())
    }
    let mut acc = BTreeMap::new();
    walk(out, out, &mut acc)?;
    Ok(acc)
}

pub fn write_manifest(out: &Path) -> Result<BTreeMap<String, String>> {
    let manifest = compute_manifest(out)?;
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
