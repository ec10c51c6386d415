//! Files, subcommands and the validation suite.

pub mod commands;
pub mod table;
pub mod validate;

pub use commands::{
    fit_trace, load_config_or_manifest, recovery, simulate_decay, simulate_pump, sweep_flux,
    sweep_temperature, write_run, CommandOutput, FitCommand, OutputFile, RunContext, RunManifest,
    Status,
};
pub use table::{fmt_f64, read_trace, read_trace_file, trace_table, Table};
pub use validate::{k0_quadrature, report_table, run_validation, Check, ValidateOptions};
