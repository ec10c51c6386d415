use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qpump::config::Config;
use qpump::io::commands::{self, CommandOutput, FitCommand, RunContext, RunManifest};
use qpump::io::validate::ValidateOptions;
use qpump::Error;

#[derive(Parser)]
#[command(
    name = "qpump",
    version,
    about = "Qubit relaxation with a fluctuating quasiparticle bath"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration JSON, or a manifest from an earlier run to replay it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "qpump-out")]
    out: PathBuf,
    /// Ten times fewer trials.
    #[arg(long)]
    quick: bool,
}

#[derive(Subcommand)]
enum Command {
    SimulateDecay(Common),
    SimulatePump(Common),
    Fit {
        #[command(flatten)]
        common: Common,
        /// Trace CSV with delay_us and population columns.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        fix_t1r: Option<f64>,
        /// Divide populations by the first point before fitting.
        #[arg(long)]
        normalize: bool,
    },
    SweepTemperature(Common),
    SweepFlux(Common),
    Recovery(Common),
    Validate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quick: bool,
    },
}

fn fail(err: &Error) -> ExitCode {
    let kind = match err {
        Error::Invalid { .. } => "invalid",
        Error::Domain { .. } => "domain",
        Error::Degenerate(_) => "degenerate",
        Error::InsufficientData { .. } => "insufficient_data",
        Error::BootstrapFailures { .. } => "bootstrap",
        Error::ConfigNotFound(_) => "config_not_found",
        Error::Parse(_) => "parse",
        Error::MalformedRow { .. } => "malformed_row",
        Error::Io(_) => "io",
    };
    eprintln!(
        "{}",
        json!({ "error": kind, "message": err.to_string(), "exit_code": 2 })
    );
    ExitCode::from(2)
}

fn threads_from_env() -> Result<Option<usize>, Error> {
    match std::env::var("QPUMP_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Invalid {
                path: "QPUMP_THREADS".into(),
                message: format!("expected a positive integer, got {v:?}"),
            }),
        },
    }
}

fn resolve(common: &Common, threads: Option<usize>) -> Result<(Config, RunContext), Error> {
    let (config, replay) = match &common.config {
        Some(path) => commands::load_config_or_manifest(path)?,
        None => (Config::default(), None),
    };
    let (seed, quick) = match replay {
        Some((seed, quick)) => (common.seed.unwrap_or(seed), quick || common.quick),
        None => (common.seed.unwrap_or(config.sim.seed), common.quick),
    };
    Ok((
        config,
        RunContext {
            seed,
            quick,
            threads,
        },
    ))
}

fn finish(
    name: &str,
    out_dir: &Path,
    config: &Config,
    ctx: &RunContext,
    output: CommandOutput,
    started: Instant,
) -> Result<ExitCode, Error> {
    let manifest = RunManifest::new(name, config, ctx, &output, started);
    commands::write_run(out_dir, &output, &manifest)?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", output.report);
    Ok(ExitCode::from(output.status.exit_code() as u8))
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let threads = threads_from_env()?;
    if let Some(n) = threads {
        // Ignore the error if a pool already exists; per-run pools still honor the cap.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let started = Instant::now();
    let (name, common) = match &cli.command {
        Command::SimulateDecay(c) => ("simulate-decay", c),
        Command::SimulatePump(c) => ("simulate-pump", c),
        Command::Fit { common, .. } => ("fit", common),
        Command::SweepTemperature(c) => ("sweep-temperature", c),
        Command::SweepFlux(c) => ("sweep-flux", c),
        Command::Recovery(c) => ("recovery", c),
        Command::Validate { seed, quick } => {
            let mut opts = ValidateOptions {
                quick: *quick,
                ..ValidateOptions::default()
            };
            if let Some(s) = seed {
                opts.seed = *s;
            }
            let (ok, output) = commands::validate(&opts);
            print!("{}", output.report);
            return Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            });
        }
    };
    let (config, ctx) = resolve(common, threads)?;
    let output = match &cli.command {
        Command::SimulateDecay(_) => commands::simulate_decay(&config, &ctx)?,
        Command::SimulatePump(_) => commands::simulate_pump(&config, &ctx)?,
        Command::Fit {
            trace,
            fix_t1r,
            normalize,
            ..
        } => commands::fit_trace(
            &config,
            &FitCommand {
                trace: trace.clone(),
                fix_t1r: *fix_t1r,
                normalize: *normalize,
            },
        )?,
        Command::SweepTemperature(_) => commands::sweep_temperature(&config)?,
        Command::SweepFlux(_) => commands::sweep_flux(&config)?,
        Command::Recovery(_) => commands::recovery(&config, &ctx)?,
        Command::Validate { .. } => unreachable!(),
    };
    finish(name, &common.out, &config, &ctx, output, started)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}
