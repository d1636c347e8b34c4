use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chimera_tts::annealers::{Annealer, AnnealerConfig, MfaSchedule, SaSchedule, SqaSchedule};
use chimera_tts::error::{Error, Result};
use chimera_tts::evt::{
    exceedances, fit_gpd_mle, pp_points, qq_points, threshold_scan, EmpiricalCdf, GpdFit,
};
use chimera_tts::exact::dp_ground;
use chimera_tts::harness::{
    batch_tts, scan_config_beta, scan_config_ta, with_threads, write_records, ScanOptions, TtsOptions,
    DEFAULT_BOOTSTRAP, DEFAULT_CAP, DEFAULT_TARGET_SUCCESSES,
};
use chimera_tts::instances::{batch_instance, ChimeraGraph, CouplingInstance};
use chimera_tts::pipeline::{
    self, compute_manifest, load_records, read_ground_energies, read_instances, resolve_output, size_seed,
    solve_all, write_file, write_instances, write_json, write_points, CampaignConfig, PipelineOptions,
    PipelineStage, MANIFEST_FILE,
};
use chimera_tts::rng::{self, Stage};

#[derive(Parser)]
#[command(name = "chimera-tts", version, about = "Time-to-solution benchmarks for annealers on chimera spin glasses")]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a batch of random +-1 instances.
    Generate {
        /// Chimera side length L (N = 8 L^2).
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Exact ground energies of every instance in a directory.
    Solve {
        #[arg(long)]
        instances: PathBuf,
    },
    /// Repeated annealing runs of one instance.
    Anneal {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        alg: AlgArgs,
        #[arg(long, default_value_t = 100)]
        repetitions: u64,
        /// Ground energy; computed exactly when omitted.
        #[arg(long, allow_hyphen_values = true)]
        e0: Option<i64>,
    },
    /// Time-to-solution records for a batch.
    Tts {
        #[command(flatten)]
        batch: BatchArgs,
        #[command(flatten)]
        alg: AlgArgs,
    },
    /// Annealing-time scan of total effort.
    ScanTa {
        #[command(flatten)]
        batch: BatchArgs,
        #[command(flatten)]
        alg: AlgArgs,
        /// Comma-separated ascending annealing times.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<u64>,
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
        bootstrap: usize,
    },
    /// Inverse-temperature scan, each point at its optimal annealing time.
    ScanBeta {
        #[command(flatten)]
        batch: BatchArgs,
        #[command(flatten)]
        alg: AlgArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        betas: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<u64>,
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
        bootstrap: usize,
    },
    /// Generalized Pareto fit of a tau sample.
    FitTail {
        /// TtsRecord CSV.
        #[arg(long)]
        records: PathBuf,
        /// Number of exceedances; the threshold is the (k+1)-th largest tau.
        #[arg(long, conflicts_with = "threshold")]
        k: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Comma-separated exceedance counts for a threshold scan.
        #[arg(long, value_delimiter = ',')]
        scan: Vec<usize>,
    },
    /// Print the summary of a campaign directory and verify its manifest.
    Report,
    /// Run a full campaign from a TOML configuration.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Stop after the named stage, leaving a checkpoint.
        #[arg(long)]
        stop_after: Option<String>,
    },
    /// Continue a campaign from its checkpoint.
    Resume {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Sa,
    Sqa,
    Mfa,
}

#[derive(Args)]
struct AlgArgs {
    #[arg(long, value_enum)]
    algorithm: Algorithm,
    /// Annealing time in sweeps.
    #[arg(long = "t-a")]
    t_a: u64,
    /// Inverse temperature (SQA, MFA).
    #[arg(long)]
    beta: Option<f64>,
    /// Trotter slices (SQA).
    #[arg(long = "slices", short = 'M')]
    slices: Option<usize>,
    /// Angle table size (MFA); 0 for exact trigonometry.
    #[arg(long)]
    table_size: Option<usize>,
}

impl AlgArgs {
    fn config(&self) -> Result<AnnealerConfig> {
        let need_beta = || self.beta.ok_or_else(|| Error::Config("--beta is required for sqa and mfa".into()));
        let cfg = match self.algorithm {
            Algorithm::Sa => AnnealerConfig::Sa(SaSchedule::new(self.t_a)),
            Algorithm::Sqa => {
                let mut s = SqaSchedule::new(self.t_a, need_beta()?);
                if let Some(m) = self.slices {
                    s.slices = m;
                }
                AnnealerConfig::Sqa(s)
            }
            Algorithm::Mfa => {
                let mut s = MfaSchedule::new(self.t_a, need_beta()?);
                if let Some(t) = self.table_size {
                    s.table_size = t;
                }
                AnnealerConfig::Mfa(s)
            }
        };
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    instances: PathBuf,
    /// Ground-energy CSV (`instance_id,E0`).
    #[arg(long)]
    e0: PathBuf,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
    #[arg(long, default_value_t = DEFAULT_TARGET_SUCCESSES)]
    target_successes: f64,
}

impl BatchArgs {
    fn tts_options(&self) -> Result<TtsOptions> {
        let opts = TtsOptions {
            target_successes: self.target_successes,
            cap: self.cap,
        };
        opts.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(opts)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let threads = cli.threads;
    match with_threads(threads, || run(cli)).and_then(|r| r) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::CheckpointMismatch(_) => 2,
        _ => 3,
    }
}

/// Writes to `--out` if given, otherwise stdout.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_file(p, bytes),
        None => io::stdout().write_all(bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn load_instance(path: &Path) -> Result<CouplingInstance> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok()).unwrap_or(0);
    CouplingInstance::read(BufReader::new(f), id, &path.display().to_string())
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    match cli.command {
        Command::Generate { size, count } => {
            let dir = out.ok_or_else(|| Error::Config("generate needs --out DIR".into()))?;
            let graph = ChimeraGraph::new(size).map_err(|e| Error::Config(e.to_string()))?;
            let master = size_seed(seed, size);
            let insts: Vec<_> = (0..count as u64).map(|id| batch_instance(&graph, master, id)).collect();
            write_instances(dir, &insts)?;
            log::info!("wrote {count} instances of N={} to {}", graph.num_spins(), dir.display());
            Ok(())
        }
        Command::Solve { instances } => {
            let insts = read_instances(&instances)?;
            let e0 = solve_all(&insts)?;
            emit(out, &pipeline::ground_energies_csv(&e0)?)
        }
        Command::Anneal { instance, alg, repetitions, e0 } => {
            let inst = load_instance(&instance)?;
            let cfg = alg.config()?;
            let e0 = match e0 {
                Some(e) => e,
                None => dp_ground(&inst)?.energy,
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::invalid(e.to_string());
            w.write_record(["run_index", "success_fraction", "final_energy"]).map_err(csv_err)?;
            for r in 0..repetitions {
                let mut stream = rng::stream(seed, Stage::Anneal, inst.id(), r);
                let o = cfg.run(&inst, e0, &mut stream);
                w.serialize((r, o.success_fraction, o.final_energy)).map_err(csv_err)?;
            }
            emit(out, &w.into_inner().map_err(|e| Error::invalid(e.to_string()))?)
        }
        Command::Tts { batch, alg } => {
            let cfg = alg.config()?;
            let opts = batch.tts_options()?;
            let insts = read_instances(&batch.instances)?;
            let e0 = read_ground_energies(&batch.e0)?;
            let mut records = Vec::new();
            let mut first_error = None;
            for r in batch_tts(&insts, &e0, &cfg, &opts, seed) {
                match r {
                    Ok(rec) => records.push(rec),
                    Err(e) => {
                        log::error!("{e}");
                        first_error.get_or_insert(e);
                    }
                }
            }
            let mut buf = Vec::new();
            write_records(&mut buf, &records)?;
            emit(out, &buf)?;
            first_error.map_or(Ok(()), Err)
        }
        Command::ScanTa { batch, alg, grid, bootstrap } => {
            let cfg = alg.config()?;
            let opts = ScanOptions { bootstrap, tts: batch.tts_options()?, ..ScanOptions::default() };
            let insts = read_instances(&batch.instances)?;
            let e0 = read_ground_energies(&batch.e0)?;
            let result = scan_config_ta(&insts, &e0, &cfg, &grid, &opts, seed)?;
            log::info!("t_a_opt = {}", result.optimum);
            emit(out, format!("{}\n", serde_json::to_string_pretty(&result)?).as_bytes())
        }
        Command::ScanBeta { batch, alg, betas, grid, bootstrap } => {
            let cfg = alg.config()?;
            let opts = ScanOptions { bootstrap, tts: batch.tts_options()?, ..ScanOptions::default() };
            let insts = read_instances(&batch.instances)?;
            let e0 = read_ground_energies(&batch.e0)?;
            let result = scan_config_beta(&insts, &e0, &cfg, &betas, &grid, &opts, seed)?;
            log::info!("beta_opt = {} at t_a = {}", result.optimum, result.optimum_t_a);
            emit(out, format!("{}\n", serde_json::to_string_pretty(&result)?).as_bytes())
        }
        Command::FitTail { records, k, threshold, scan } => fit_tail(&records, k, threshold, &scan, out),
        Command::Report => report(out.ok_or_else(|| Error::Config("report needs --out DIR".into()))?),
        Command::Pipeline { config, stop_after } => {
            let (cfg, dir) = campaign(&config, cli.seed, out)?;
            let stop_after = stop_after.as_deref().map(PipelineStage::parse).transpose()?;
            let r = pipeline::run_pipeline(&cfg, &dir, &PipelineOptions { threads: None, stop_after })?;
            log::info!("{} stages complete in {}", r.completed.len(), dir.display());
            Ok(())
        }
        Command::Resume { config } => {
            let (cfg, dir) = campaign(&config, cli.seed, out)?;
            let r = pipeline::resume(&cfg, &dir, &PipelineOptions::default())?;
            log::info!("{} stages complete in {}", r.completed.len(), dir.display());
            Ok(())
        }
    }
}

fn campaign(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(CampaignConfig, PathBuf)> {
    let mut cfg = CampaignConfig::load(path).map_err(|e| match e {
        Error::Io { .. } => Error::Config(e.to_string()),
        e => e,
    })?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = resolve_output(out, &cfg)?;
    Ok((cfg, dir))
}

fn fit_tail(records: &Path, k: Option<usize>, threshold: Option<f64>, scan: &[usize], out: Option<&Path>) -> Result<()> {
    let dir = out.ok_or_else(|| Error::Config("fit-tail needs --out DIR".into()))?;
    let taus: Vec<f64> = load_records(records)?.iter().map(|r| r.tau).collect();
    if !scan.is_empty() {
        write_json(&dir.join("scan.json"), &threshold_scan(&taus, scan)?)?;
    }
    let u = match (k, threshold) {
        (_, Some(u)) => Some(u),
        (Some(k), None) => {
            let ecdf = EmpiricalCdf::new(&taus)?;
            let sorted = ecdf.sorted();
            if k >= sorted.len() {
                return Err(Error::invalid(format!("k = {k} needs more than {} records", sorted.len())));
            }
            Some(sorted[sorted.len() - 1 - k])
        }
        (None, None) if scan.is_empty() => return Err(Error::Config("give --k, --threshold or --scan".into())),
        (None, None) => None,
    };
    if let Some(u) = u {
        let fit: GpdFit = fit_gpd_mle(&taus, u)?;
        write_json(&dir.join("fit.json"), &fit)?;
        let excess = exceedances(&taus, u);
        write_points(&dir.join("pp.csv"), ("model_cdf", "empirical"), &pp_points(&excess, &fit.params))?;
        write_points(&dir.join("qq.csv"), ("model_quantile", "observed"), &qq_points(&excess, &fit.params)?)?;
        println!("xi = {:.4} +- {:.4}, sigma = {:.4} +- {:.4}, u = {}, k = {}", fit.xi(), fit.xi_se, fit.sigma(), fit.sigma_se, u, fit.k);
    }
    Ok(())
}

fn report(dir: &Path) -> Result<()> {
    let summary = dir.join("summary.csv");
    let text = fs::read_to_string(&summary).map_err(|e| Error::io(&summary, e))?;
    print!("{text}");
    let manifest_path = dir.join(MANIFEST_FILE);
    let stored: std::collections::BTreeMap<String, String> =
        serde_json::from_str(&fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?)?;
    let actual = compute_manifest(dir)?;
    if stored != actual {
        let changed: std::collections::BTreeSet<String> = actual
            .keys()
            .chain(stored.keys())
            .filter(|k| stored.get(*k) != actual.get(*k))
            .cloned()
            .collect();
        return Err(Error::ManifestMismatch(changed.into_iter().collect()));
    }
    eprintln!("manifest verified: {} files", actual.len());
    Ok(())
}
