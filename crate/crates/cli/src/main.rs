use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::warn;

use phasecal::channel::synth_observation;
use phasecal::config::{parse_config, to_canonical_json, RunConfig};
use phasecal::estimators::{default_grid, estimate};
use phasecal::experiments::{nllf_profile, run_sweep};
use phasecal::io::{crlb_report_json, read_observation, write_json, write_observation, RunManifest};
use phasecal::{Error, Result};

/// Over-the-air phase and time calibration between two access points.
#[derive(Parser)]
#[command(name = "phasecal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one observation set and write it as JSON.
    Simulate(Common),
    /// Run the configured estimator on an observation file.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Observation file written by `simulate`.
        #[arg(long)]
        obs: PathBuf,
    },
    /// Fisher-information bounds at the configured bandwidth.
    Crlb(Common),
    /// Monte Carlo RMSE against bandwidth.
    Sweep(Common),
    /// Loss profile along one parameter.
    Profile(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration (or a previous run manifest). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trial-level parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.sweep.base_seed = seed;
        cfg.profile.seed = Some(seed);
    }
    for w in &cfg.warnings {
        warn!("{w}");
    }
    Ok(cfg)
}

fn prepare(common: &Common) -> Result<RunConfig> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::config("--threads", e.to_string()))?;
    }
    let cfg = load(common)?;
    fs::create_dir_all(&common.out)?;
    Ok(cfg)
}

fn manifest(command: &str, common: &Common, cfg: &RunConfig, seed: Option<u64>, input: Option<&Path>) -> RunManifest {
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        config_path: common.config.as_ref().map(|p| p.display().to_string()),
        input_path: input.map(|p| p.display().to_string()),
        seed,
        output_dir: common.out.display().to_string(),
        resolved_config: to_canonical_json(cfg),
        warnings: cfg.warnings.clone(),
    }
}

fn simulate(common: &Common) -> Result<()> {
    let cfg = prepare(common)?;
    let sc = &cfg.scenario;
    let scenario = sc.scenario_at(sc.bandwidth_hz)?;
    let seed = (!sc.noiseless).then_some(cfg.sweep.base_seed);
    let obs = synth_observation(&scenario, sc.observation_channel, sc.direction, seed)?;
    write_observation(&common.out.join("observation.json"), &obs)?;
    manifest("simulate", common, &cfg, seed, None).write(&common.out)?;
    println!(
        "wrote {} subcarriers ({:?}) to {}",
        obs.num_subcarriers(),
        obs.direction_mode,
        common.out.join("observation.json").display()
    );
    Ok(())
}

fn run_estimate(common: &Common, obs_path: &Path) -> Result<()> {
    let cfg = prepare(common)?;
    let sc = &cfg.scenario;
    let scenario = sc.scenario_at(sc.bandwidth_hz)?;
    let obs = read_observation(obs_path)?;
    obs.validate(scenario.ofdm.num_subcarriers())?;
    let truth = scenario.model_params()?;
    let spec = sc.estimator_spec()?;
    let grid = default_grid(&spec, &scenario.ofdm, &truth, &sc.grid_options())?;
    let result = estimate(&obs, &scenario.ofdm, &spec, &grid)?;
    for w in &result.warnings {
        warn!("{w}");
    }
    write_json(&common.out.join("estimate.json"), &result)?;
    manifest("estimate", common, &cfg, None, Some(obs_path)).write(&common.out)?;
    for e in &result.params.entries {
        println!("{:<18} {:>16.9e} {}", e.param.label(), e.value, e.param.unit());
    }
    Ok(())
}

fn crlb(common: &Common) -> Result<()> {
    let cfg = prepare(common)?;
    let report = cfg.scenario.crlb(cfg.scenario.bandwidth_hz)?;
    write_json(&common.out.join("crlb.json"), &crlb_report_json(&report))?;
    manifest("crlb", common, &cfg, None, None).write(&common.out)?;
    println!(
        "W = {:.2} MHz, N = {}, SNR = {:.2} dB",
        report.bandwidth_hz / 1e6,
        report.num_subcarriers,
        10.0 * report.snr_used.log10()
    );
    for b in &report.bounds {
        if b.param.is_phase() {
            println!("std({}) = {:.4e} rad = {:.3}°", b.param.label(), b.std(), b.std().to_degrees());
        } else {
            println!("std({}) = {:.4e} {}", b.param.label(), b.std(), b.param.unit());
        }
    }
    Ok(())
}

fn sweep(common: &Common) -> Result<()> {
    let cfg = prepare(common)?;
    let result = run_sweep(&cfg.scenario, &cfg.sweep)?;
    for w in &result.warnings {
        warn!("{w}");
    }
    let path = common.out.join("sweep.csv");
    result.write_csv(BufWriter::new(File::create(&path)?))?;
    manifest("sweep", common, &cfg, Some(cfg.sweep.base_seed), None).write(&common.out)?;
    println!("wrote {} rows to {}", result.records.len(), path.display());
    Ok(())
}

fn profile(common: &Common) -> Result<()> {
    let cfg = prepare(common)?;
    let p = &cfg.profile;
    let seed = if cfg.scenario.noiseless { None } else { p.seed };
    let prof = nllf_profile(&cfg.scenario, p.param, p.range, p.points, seed, p.in_distance)?;
    let path = common.out.join("profile.csv");
    prof.write_csv(BufWriter::new(File::create(&path)?))?;
    manifest("profile", common, &cfg, seed, None).write(&common.out)?;
    println!("minimum at offset {:.6e} {}", prof.argmin(), prof.unit);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Estimate { common, obs } => run_estimate(common, obs),
        Command::Crlb(c) => crlb(c),
        Command::Sweep(c) => sweep(c),
        Command::Profile(c) => profile(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({:?}): {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
