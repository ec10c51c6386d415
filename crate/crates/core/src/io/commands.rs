//! The subcommands as library functions. Each returns its output files in
//! memory; [`write_run`] puts them on disk next to a manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::table::{fmt_f64, read_trace_file, trace_table, Table};
use super::validate::{report_table, run_validation, ValidateOptions};
use crate::analytic::{decay_population, t1qp_flux, total_t1, ThermalModel};
use crate::config::{Config, SimMode};
use crate::error::{Error, Result};
use crate::fitting::{fit_decay, FitOptions};
use crate::montecarlo::{pump_scan, recovery_experiment, run_protocol_with, ProtocolResult, Setup};
use crate::params::{DecayTrace, PulseSequence};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Outcome class, mapped to the process exit status by the binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    FitNotConverged,
    TooManyExcluded,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::FitNotConverged => 3,
            Status::TooManyExcluded => 4,
        }
    }

    fn worst(self, other: Status) -> Status {
        if other.exit_code() > self.exit_code() {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub files: Vec<OutputFile>,
    pub metadata: Value,
    pub warnings: Vec<String>,
    pub status: Status,
    /// Text for standard output.
    pub report: String,
}

impl CommandOutput {
    fn new() -> Self {
        Self {
            files: Vec::new(),
            metadata: Value::Null,
            warnings: Vec::new(),
            status: Status::Ok,
            report: String::new(),
        }
    }

    fn file(&mut self, name: impl Into<String>, contents: String) {
        self.files.push(OutputFile {
            name: name.into(),
            contents,
        });
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|f| f.name == name)
            .map(|f| f.contents.as_str())
    }

    fn flag(&mut self, status: Status, warning: String) {
        self.status = self.status.worst(status);
        self.warnings.push(warning);
    }
}

/// Everything a command needs besides the configuration.
#[derive(Debug, Clone, Default)]
pub struct RunContext {
    pub seed: u64,
    /// Ten times fewer trials.
    pub quick: bool,
    /// Worker cap for Monte Carlo; never changes results.
    pub threads: Option<usize>,
}

impl RunContext {
    fn trials(&self, config: &Config) -> u64 {
        if self.quick {
            (config.sim.n_trials / 10).max(1)
        } else {
            config.sim.n_trials
        }
    }
}

fn check_exclusions(out: &mut CommandOutput, config: &Config, label: &str, r: &ProtocolResult) {
    let frac = r.stats.excluded_fraction();
    if frac > config.sim.max_excluded_fraction {
        out.flag(
            Status::TooManyExcluded,
            format!(
                "{label}: {} of {} trials exceeded the quasiparticle cap ({:.3}% > {:.3}%)",
                r.stats.excluded,
                r.stats.n_trials,
                100.0 * frac,
                100.0 * config.sim.max_excluded_fraction
            ),
        );
    }
}

fn run_metadata(r: &ProtocolResult) -> Value {
    json!({
        "stats": r.stats,
        "probe": r.probe,
        "warmup_counts": r.warmup_counts,
        "interval_populations": r.interval_populations,
        "nqp_vs_time": r.nqp_vs_time,
    })
}

/// Decay trace after a single probe (`pulses.n_pulses` pump pulses first).
pub fn simulate_decay(config: &Config, ctx: &RunContext) -> Result<CommandOutput> {
    let mut out = CommandOutput::new();
    let seq = config.pulses.sequence();
    match config.sim.mode {
        SimMode::Analytic => {
            let pops = seq
                .readout_grid
                .iter()
                .map(|&t| decay_population(t, &config.sim.decay))
                .collect::<Result<Vec<_>>>()?;
            let trace = DecayTrace::from_samples(seq.readout_grid.clone(), pops);
            out.file("trace.csv", trace_table(&trace).to_csv());
            out.metadata = json!({ "mode": "analytic", "decay": config.sim.decay });
        }
        SimMode::MonteCarlo => {
            let r = simulate(config, ctx, &seq, ctx.seed)?;
            check_exclusions(&mut out, config, "simulate-decay", &r);
            out.file("trace.csv", trace_table(&r.trace).to_csv());
            out.file("per_trace.csv", per_trace_table(&r, &seq).to_csv());
            out.metadata = run_metadata(&r);
        }
    }
    Ok(out)
}

fn simulate(
    config: &Config,
    ctx: &RunContext,
    seq: &PulseSequence,
    seed: u64,
) -> Result<ProtocolResult> {
    let mut engine = config.sim.engine();
    engine.threads = ctx.threads;
    run_protocol_with(
        seq,
        &config.bath,
        &config.sim.decay,
        &config.device,
        ctx.trials(config),
        seed,
        &engine,
    )
}

fn per_trace_table(r: &ProtocolResult, seq: &PulseSequence) -> Table {
    let names: Vec<String> = std::iter::once("delay_us".to_string())
        .chain((0..r.per_trace_population.len()).map(|k| format!("rep{k}")))
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut t = Table::new(&refs);
    for (i, &d) in seq.readout_grid.iter().enumerate() {
        let mut row = vec![fmt_f64(d)];
        row.extend(r.per_trace_population.iter().map(|rep| fmt_f64(rep[i])));
        t.push(row);
    }
    t
}

fn with_engine<'a>(
    config: &'a Config,
    ctx: &RunContext,
    engine: &'a crate::montecarlo::SimOptions,
    fit: &'a FitOptions,
) -> Setup<'a> {
    Setup {
        bath: &config.bath,
        decay: &config.sim.decay,
        device: &config.device,
        n_trials: ctx.trials(config),
        seed: ctx.seed,
        sim: engine,
        fit,
    }
}

/// One trace per pulse count in `pulses.counts` plus a fitted summary.
pub fn simulate_pump(config: &Config, ctx: &RunContext) -> Result<CommandOutput> {
    let mut out = CommandOutput::new();
    let mut engine = config.sim.engine();
    engine.threads = ctx.threads;
    let fit = config.pump_fit_options();
    let setup = with_engine(config, ctx, &engine, &fit);
    let points = pump_scan(&config.pulses.sequence(), &config.pulses.counts, &setup)?;

    let mut summary = Table::new(&[
        "N",
        "n_avg_fit",
        "t1qp_fit",
        "t1e_us",
        "n_avg_se",
        "t1qp_se",
        "converged",
        "n_qp_probe",
        "n_qp_probe_se",
        "qp_energy_ghz",
        "qp_energy_se",
    ]);
    let mut meta = Vec::new();
    for p in &points {
        let label = format!("N={}", p.n_pulses);
        check_exclusions(&mut out, config, &label, &p.result);
        if !p.fit.converged {
            out.flag(
                Status::FitNotConverged,
                format!("{label}: decay fit did not converge"),
            );
        }
        out.file(
            format!("trace_N{}.csv", p.n_pulses),
            trace_table(&p.result.trace).to_csv(),
        );
        summary.push(vec![
            p.n_pulses.to_string(),
            fmt_f64(p.fit.params.n_avg),
            fmt_f64(p.fit.params.t1qp),
            fmt_f64(p.t1e),
            fmt_f64(p.fit.stderr.n_avg),
            fmt_f64(p.fit.stderr.t1qp),
            p.fit.converged.to_string(),
            fmt_f64(p.result.probe.n_qp.mean),
            fmt_f64(p.result.probe.n_qp.se),
            fmt_f64(p.result.probe.qp_energy.mean),
            fmt_f64(p.result.probe.qp_energy.se),
        ]);
        meta.push(json!({ "n_pulses": p.n_pulses, "fit": p.fit, "run": run_metadata(&p.result) }));
    }
    out.file("summary.csv", summary.to_csv());
    out.metadata = json!({ "fit_options": fit, "runs": meta });
    Ok(out)
}

/// Options of the `fit` subcommand beyond the configuration's `fit` section.
#[derive(Debug, Clone, Default)]
pub struct FitCommand {
    pub trace: PathBuf,
    pub fix_t1r: Option<f64>,
    /// Divide the trace by its first population before fitting.
    pub normalize: bool,
}

pub fn fit_trace(config: &Config, cmd: &FitCommand) -> Result<CommandOutput> {
    let mut out = CommandOutput::new();
    let mut trace = read_trace_file(&cmd.trace)?;
    if cmd.normalize {
        trace = trace.normalized();
    }
    let opts = FitOptions {
        fix_t1r: cmd.fix_t1r.or(config.fit.fix_t1r),
        ..config.fit.clone()
    };
    let fit = fit_decay(&trace, &opts)?;
    if !fit.converged {
        out.flag(
            Status::FitNotConverged,
            format!("fit did not converge after {} iterations", fit.n_iter),
        );
    }
    let body = json!({
        "params": fit.params,
        "stderr": fit.stderr,
        "residual_norm": fit.residual_norm,
        "converged": fit.converged,
        "n_iter": fit.n_iter,
        "covariance": fit.covariance,
    });
    let text = serde_json::to_string_pretty(&body).expect("fit serializes") + "\n";
    out.report = text.clone();
    out.file("fit.json", text);
    out.metadata = json!({ "trace": cmd.trace.display().to_string(), "options": opts });
    Ok(out)
}

/// `temp_K,t1_us` over `sim.temperatures`.
pub fn sweep_temperature(config: &Config) -> Result<CommandOutput> {
    let mut out = CommandOutput::new();
    let model = ThermalModel {
        t1ne: config.sim.t1ne,
        device: config.device.clone(),
    };
    let mut t = Table::new(&["temp_K", "t1_us"]);
    for &temp in &config.sim.temperatures {
        let t1 = total_t1(temp, &model, config.device.omega0)?;
        t.push(vec![fmt_f64(temp), fmt_f64(t1)]);
    }
    out.file("temperature.csv", t.to_csv());
    Ok(out)
}

/// `f,omega_ghz,t1qp_us,clamped` over `sim.flux_grid`.
pub fn sweep_flux(config: &Config) -> Result<CommandOutput> {
    let mut out = CommandOutput::new();
    let mut t = Table::new(&["f", "omega_ghz", "t1qp_us", "clamped"]);
    let mut clamped = 0;
    for &f in &config.sim.flux_grid {
        let p = t1qp_flux(f, config.sim.t1qp0, &config.device)?;
        clamped += usize::from(p.clamped);
        t.push(vec![
            fmt_f64(f),
            fmt_f64(p.omega_f),
            fmt_f64(p.t1qp_f),
            p.clamped.to_string(),
        ]);
    }
    if clamped > 0 {
        out.warnings.push(format!(
            "{clamped} flux points outside the matrix-element table were clamped"
        ));
    }
    out.file("flux.csv", t.to_csv());
    Ok(out)
}

/// Recovery after `pulses.recovery_pulses` pump pulses, scanning the probe delay.
pub fn recovery(config: &Config, ctx: &RunContext) -> Result<CommandOutput> {
    let mut out = CommandOutput::new();
    let mut engine = config.sim.engine();
    engine.threads = ctx.threads;
    let fit = config.pump_fit_options();
    let setup = with_engine(config, ctx, &engine, &fit);
    let seq = PulseSequence {
        n_pulses: config.pulses.recovery_pulses,
        ..config.pulses.sequence()
    };
    let r = recovery_experiment(&seq, &config.pulses.probe_delays, &setup)?;
    let mut t = Table::new(&[
        "t_delay_us",
        "n_avg_fit",
        "n_avg_fit_se",
        "n_qp_mean",
        "n_qp_se",
    ]);
    for p in &r.points {
        check_exclusions(
            &mut out,
            config,
            &format!("delay={}", p.probe_delay),
            &p.result,
        );
        if !p.fit.converged {
            out.flag(
                Status::FitNotConverged,
                format!("delay={}: decay fit did not converge", p.probe_delay),
            );
        }
        t.push(vec![
            fmt_f64(p.probe_delay),
            fmt_f64(p.fit.params.n_avg),
            fmt_f64(p.fit.stderr.n_avg),
            fmt_f64(p.n_qp.mean),
            fmt_f64(p.n_qp.se),
        ]);
    }
    if !r.sampled.converged {
        out.flag(
            Status::FitNotConverged,
            "recovery law fit to sampled numbers did not converge".into(),
        );
    }
    out.file("recovery.csv", t.to_csv());
    out.metadata = json!({
        "recovery_fit_sampled": r.sampled,
        "recovery_fit_decay_law": r.fitted,
        "time_constant_us": r.sampled.time_constant(),
    });
    Ok(out)
}

/// Runs the oracle suite. The flag is true when every check passed.
pub fn validate(opts: &ValidateOptions) -> (bool, CommandOutput) {
    let checks = run_validation(opts);
    let mut out = CommandOutput::new();
    out.report = report_table(&checks);
    out.metadata = json!({ "checks": checks, "quick": opts.quick });
    (checks.iter().all(|c| c.passed), out)
}

/// Sidecar written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    pub quick: bool,
    pub duration_s: f64,
    pub warnings: Vec<String>,
    pub status: Status,
    /// Output file name to SHA-256 of its contents.
    pub outputs: Vec<(String, String)>,
    pub config: Config,
    pub metadata: Value,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: &Config,
        ctx: &RunContext,
        output: &CommandOutput,
        started: Instant,
    ) -> Self {
        Self {
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_digest: config.digest(),
            seed: ctx.seed,
            quick: ctx.quick,
            duration_s: started.elapsed().as_secs_f64(),
            warnings: output.warnings.clone(),
            status: output.status,
            outputs: output
                .files
                .iter()
                .map(|f| (f.name.clone(), sha256_hex(&f.contents)))
                .collect(),
            config: config.clone(),
            metadata: output.metadata.clone(),
        }
    }

    /// Reads a manifest back; its embedded configuration must match the digest.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        let config =
            Config::from_value(serde_json::to_value(&m.config).expect("config serializes"))?;
        if config.digest() != m.config_digest {
            return Err(Error::invalid(
                "config_digest",
                "manifest digest does not match its configuration",
            ));
        }
        Ok(m)
    }
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes every output file and `manifest.json` into `dir`.
pub fn write_run(dir: &Path, output: &CommandOutput, manifest: &RunManifest) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for f in &output.files {
        std::fs::write(dir.join(&f.name), &f.contents)?;
    }
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok(())
}

/// Loads either a configuration or a manifest from a previous run. For a
/// manifest the recorded seed and quick flag are returned as well.
pub fn load_config_or_manifest(path: &Path) -> Result<(Config, Option<(u64, bool)>)> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::ConfigNotFound(path.display().to_string()),
        _ => Error::Io(e),
    })?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    if value.get("config_digest").is_some() {
        let m = RunManifest::load(path)?;
        return Ok((m.config, Some((m.seed, m.quick))));
    }
    Ok((Config::from_value(value)?, None))
}
