//! Command-line front end: Monte Carlo sweeps, parameter training,
//! desk-scale theory verification, and channel-file tooling.
//!
//! Exit codes: 0 on success, 2 on configuration or usage errors, 3 on
//! runtime failures.

use clap::{Parser, Subcommand};
use jamsim_core::channel::{export_channels, import_channels, rayleigh};
use jamsim_core::harness::{csv_string, run_experiment, Experiment};
use jamsim_core::jammer::JammerProfile;
use jamsim_core::rng::{trial_rng, Stream};
use jamsim_core::scenario::{make_constellation, SystemConfig};
use jamsim_core::somaed::{ParameterFile, ParameterSet};
use jamsim_core::theory::{eclipse_bound_log10, verify_theorem1, Theorem1Report};
use jamsim_core::unfolding::{bb_calibrated_init, make_training_set, train, write_loss_csv, TrainOpts};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "jamsim", version, about = "Massive MU-MIMO uplink simulation with smart-jammer mitigation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Override the master seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a Monte Carlo experiment and emit a CSV of metric rows.
    Simulate { config: PathBuf },
    /// Train soft-output detector parameters on generated pilot-jammer data.
    Train { config: PathBuf },
    /// Run the desk-scale uniqueness and eclipsing-probability checks.
    VerifyTheory { config: PathBuf },
    /// Generate Rayleigh channel realizations into a .chn file.
    ExportChannels {
        #[arg(long)]
        b: usize,
        #[arg(long)]
        u: usize,
        #[arg(long)]
        count: u64,
        /// Per-UE power control range in dB.
        #[arg(long)]
        power_control_db: Option<f64>,
    },
    /// Validate a .chn file and print a summary.
    ImportChannels { file: PathBuf },
}

/// Error classified by exit code.
enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn read_config(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
enum TrainInit {
    /// The untrained default schedule.
    #[default]
    Default,
    /// Warm start with step sizes calibrated against the adaptive rule of
    /// the parameter-free detector on the training samples.
    BbCalibrated,
    /// Load the initialization from an existing parameter file.
    File(PathBuf),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainConfig {
    system: SystemConfig,
    /// Number of generated training samples.
    samples: usize,
    /// SNR grid the samples cycle over.
    snr_grid_db: Vec<f64>,
    #[serde(default)]
    init: TrainInit,
    #[serde(default)]
    train: TrainOpts,
    /// Where the trained parameter file goes.
    out_params: PathBuf,
    /// Optional loss-history CSV.
    #[serde(default)]
    out_loss_csv: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    system: SystemConfig,
    jammer: JammerProfile,
    seeds: u64,
    /// Eclipsing-bound examples to print: (constellation size, U, D).
    #[serde(default)]
    bounds: Vec<(usize, usize, usize)>,
}

#[derive(Serialize)]
struct VerifyReport {
    theorem1: Theorem1Report,
    bounds_log10: Vec<BoundRow>,
}

#[derive(Serialize)]
struct BoundRow {
    constellation_size: usize,
    u: usize,
    d: usize,
    log10_bound: f64,
}

fn cmd_simulate(cli: &Cli, config: &Path) -> Result<(), CliError> {
    let text = read_config(config)?;
    let mut exp = Experiment::from_json(&text).map_err(config_err)?;
    if let Some(seed) = cli.seed {
        exp.system.seed = seed;
    }
    if let Some(out) = &cli.out {
        exp.out = Some(out.clone());
    }
    let params = exp.load_parameters().map_err(config_err)?;
    let rows = run_experiment(&exp, params.as_ref(), cli.threads).map_err(runtime_err)?;
    let csv = csv_string(&rows);
    match &exp.out {
        Some(path) => {
            std::fs::write(path, &csv).map_err(runtime_err)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => print!("{csv}"),
    }
    for row in &rows {
        log::info!(
            "{} @ {} dB [{}]: ber {:.3e} ({} bits, {:.0} ms)",
            row.detector,
            row.snr_db,
            row.jammer,
            row.ber,
            row.bit_count,
            row.wall_ms
        );
    }
    Ok(())
}

fn cmd_train(cli: &Cli, config: &Path) -> Result<(), CliError> {
    let text = read_config(config)?;
    let cfg: TrainConfig = serde_json::from_str(&text).map_err(config_err)?;
    cfg.system.validate().map_err(config_err)?;
    let mut opts = cfg.train.clone();
    if let Some(seed) = cli.seed {
        opts.seed = seed;
    }
    let run_all = || -> jamsim_core::Result<jamsim_core::unfolding::TrainRun> {
        let set =
            make_training_set(&cfg.system, cfg.samples, &cfg.snr_grid_db, opts.t_max, opts.seed)?;
        let cons = make_constellation::<f64>(cfg.system.constellation);
        let init = match &cfg.init {
            TrainInit::Default => ParameterSet::default_init(opts.t_max),
            TrainInit::BbCalibrated => bb_calibrated_init(&set, &cons, opts.t_max)?,
            TrainInit::File(path) => ParameterFile::load(path)?.parameter_set(),
        };
        train(&init, &set, &cons, &opts)
    };
    let run = match cli.threads {
        Some(n) => {
            let pool = rayon_pool(n)?;
            pool.install(run_all).map_err(runtime_err)?
        }
        None => run_all().map_err(runtime_err)?,
    };
    let best = run.best.clone();
    let out_params = cli.out.clone().unwrap_or_else(|| cfg.out_params.clone());
    let file = ParameterFile::new(
        cfg.system.constellation,
        cfg.system.b,
        cfg.system.u,
        cfg.system.k,
        &best,
    );
    file.save(&out_params).map_err(runtime_err)?;
    if let Some(path) = &cfg.out_loss_csv {
        let f = std::fs::File::create(path).map_err(runtime_err)?;
        write_loss_csv(&run, f).map_err(runtime_err)?;
    }
    println!(
        "trained {} epochs: loss {:.6} -> {:.6} ({:.1}% better), params -> {}",
        run.loss_history.len() - 1,
        run.init_loss,
        run.best_loss,
        100.0 * (1.0 - run.best_loss / run.init_loss),
        out_params.display()
    );
    for (epoch, size) in &run.batch_events {
        println!("batch size grew to {size} at epoch {epoch}");
    }
    Ok(())
}

fn rayon_pool(n: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))
}

fn cmd_verify(cli: &Cli, config: &Path) -> Result<(), CliError> {
    let text = read_config(config)?;
    let mut cfg: VerifyConfig = serde_json::from_str(&text).map_err(config_err)?;
    if let Some(seed) = cli.seed {
        cfg.system.seed = seed;
    }
    let report = verify_theorem1(&cfg.system, &cfg.jammer, cfg.seeds).map_err(|e| match e {
        jamsim_core::Error::InvalidConfig(m) => CliError::Config(m),
        other => runtime_err(other),
    })?;
    println!(
        "uniqueness: {}/{} unique recoveries, {} eclipsed draws skipped, {} failures",
        report.unique_recoveries, report.seeds, report.eclipsed_skipped, report.failures
    );
    if let Some(first) = &report.first_failure {
        println!("first failure: {first}");
    }
    let mut bounds = Vec::new();
    for &(m, u, d) in &cfg.bounds {
        let b = eclipse_bound_log10(m, u, d);
        println!("eclipse probability bound (|S|={m}, U={u}, D={d}): 10^{b:.3}");
        bounds.push(BoundRow { constellation_size: m, u, d, log10_bound: b });
    }
    if let Some(out) = &cli.out {
        let full = VerifyReport { theorem1: report.clone(), bounds_log10: bounds };
        std::fs::write(out, serde_json::to_string_pretty(&full).map_err(runtime_err)?)
            .map_err(runtime_err)?;
        eprintln!("report written to {}", out.display());
    }
    if report.failures > 0 {
        return Err(CliError::Runtime(format!("{} verification failures", report.failures)));
    }
    Ok(())
}

fn cmd_export_channels(
    cli: &Cli,
    b: usize,
    u: usize,
    count: u64,
    power_control_db: Option<f64>,
) -> Result<(), CliError> {
    if u == 0 || b <= u {
        return Err(CliError::Config(format!("need B > U >= 1, got B = {b}, U = {u}")));
    }
    let out = cli
        .out
        .clone()
        .ok_or_else(|| CliError::Config("--out is required for export-channels".into()))?;
    let seed = cli.seed.unwrap_or(0);
    let reals: Vec<_> = (0..count)
        .map(|i| {
            let mut rng = trial_rng(seed, i, Stream::Channel);
            let real = rayleigh::<f64>(b, u, &mut rng);
            match power_control_db {
                Some(range) => jamsim_core::channel::power_control(&real, range),
                None => real,
            }
        })
        .collect();
    let n = export_channels(&out, b, u, reals.iter()).map_err(runtime_err)?;
    println!("wrote {n} realizations (B = {b}, U = {u}) to {}", out.display());
    Ok(())
}

fn cmd_import_channels(file: &Path) -> Result<(), CliError> {
    let import = import_channels::<f64>(file).map_err(|e| match e {
        jamsim_core::Error::Io(io) => CliError::Config(format!("cannot read file: {io}")),
        other => runtime_err(other),
    })?;
    println!(
        "{}: B = {}, U = {}, {} records, {} valid, {} skipped",
        file.display(),
        import.header.b,
        import.header.u,
        import.header.count,
        import.realizations.len(),
        import.skipped.len()
    );
    for (idx, why) in &import.skipped {
        println!("  record {idx} skipped: {why}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Simulate { config } => cmd_simulate(&cli, config),
        Cmd::Train { config } => cmd_train(&cli, config),
        Cmd::VerifyTheory { config } => cmd_verify(&cli, config),
        Cmd::ExportChannels { b, u, count, power_control_db } => {
            cmd_export_channels(&cli, *b, *u, *count, *power_control_db)
        }
        Cmd::ImportChannels { file } => cmd_import_channels(file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
