//! Command-line front end.
//!
//! Settings come from an optional `key = value` file, overridden by flags.
//! Every command renders its full output before anything is written, and
//! the process exits with 0 on success, 2 on a configuration or input
//! error and 3 when the engine fails.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_env, cmd_fit, cmd_ingest, cmd_report, cmd_trajectory};
pub use config::{ConfigLayer, DcRange, DvGrid, DvSpec, Format, Q0y, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ENGINE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Engine(_) => EXIT_ENGINE,
        }
    }
}

pub(crate) fn config_error(e: impl Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "dephasing-sim", version, about = "Qubit dephasing in structured continuous environments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write the momentum spectrum `q_mm_inv,density`.
    Env,
    /// Write the trace-distance trajectory `dc_mm,trace_distance`.
    Trajectory,
    /// Write N_D, its classification and the revival location.
    Report,
    /// Calibrate q0y against a `dv_mm,nd` table.
    Fit,
    /// Clean a measured `q_mm_inv,counts` row into a spectrum.
    Ingest,
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// Beam waist in mm.
    #[arg(long, global = true, value_name = "MM", allow_hyphen_values = true)]
    pub w0_mm: Option<String>,
    /// Spectral center in 1/mm, or `fit`.
    #[arg(long, global = true, value_name = "Q|fit", allow_hyphen_values = true)]
    pub q0y: Option<String>,
    /// Phase in radians.
    #[arg(long, global = true, value_name = "RAD", allow_hyphen_values = true)]
    pub phi: Option<String>,
    /// Beam separation in mm; omit for a Gaussian environment.
    #[arg(long, global = true, value_name = "MM", conflicts_with = "dv_grid")]
    pub dv_mm: Option<String>,
    /// Separation grid `start:stop:step` in mm.
    #[arg(long, global = true, value_name = "START:STOP:STEP")]
    pub dv_grid: Option<String>,
    /// Samples along the displacement axis.
    #[arg(long, global = true, value_name = "N")]
    pub dc_points: Option<String>,
    /// Largest displacement in mm, or `auto` for dv + 4 w0.
    #[arg(long, global = true, value_name = "MM|auto")]
    pub dc_range_mm: Option<String>,
    /// Threshold on N_D for non-Markovian classification.
    #[arg(long, global = true, value_name = "X")]
    pub nd_threshold: Option<String>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "csv|json")]
    pub format: Option<String>,
    /// `key = value` settings file; flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Calibration table `dv_mm,nd`; the bundled table when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub table: Option<PathBuf>,
    /// Measured spectrum `q_mm_inv,counts`.
    #[arg(long, global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
}

impl Flags {
    fn layer(&self) -> ConfigLayer {
        let mut layer = ConfigLayer::default();
        let text = [
            ("w0_mm", &self.w0_mm),
            ("q0y_mm_inv", &self.q0y),
            ("phi_rad", &self.phi),
            ("dv_mm", &self.dv_mm),
            ("dv_mm", &self.dv_grid),
            ("dc_points", &self.dc_points),
            ("dc_range_mm", &self.dc_range_mm),
            ("nd_threshold", &self.nd_threshold),
            ("format", &self.format),
        ];
        for (key, value) in text {
            if let Some(v) = value {
                layer.set(key, v.as_str());
            }
        }
        let paths = [("output_path", &self.out), ("table_path", &self.table), ("input_path", &self.input)];
        for (key, value) in paths {
            if let Some(p) = value {
                layer.set(key, p.to_string_lossy());
            }
        }
        layer
    }

    /// Config file (if any) overlaid with the flags.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => ConfigLayer::read(path)?,
            None => ConfigLayer::default(),
        };
        let cfg = base.overlay(self.layer()).resolve()?;
        if self.dv_grid.is_some() && !matches!(cfg.dv, DvSpec::Grid(_)) {
            return Err(CliError::Config("--dv-grid expects start:stop:step".into()));
        }
        Ok(cfg)
    }
}

/// Output text of `command`.
pub fn render(command: Command, cfg: &RunConfig) -> Result<String, CliError> {
    match command {
        Command::Env => cmd_env(cfg),
        Command::Trajectory => cmd_trajectory(cfg),
        Command::Report => cmd_report(cfg),
        Command::Fit => cmd_fit(cfg),
        Command::Ingest => cmd_ingest(cfg),
    }
}

/// Renders `command` and writes it to the configured destination.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<(), CliError> {
    let text = render(command, cfg)?;
    match &cfg.output_path {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Config(format!("cannot write output: {e}"))),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.flags.resolve().and_then(|cfg| execute(cli.command, &cfg)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, CliError> {
        let cli = Cli::try_parse_from(std::iter::once("dephasing-sim").chain(args.iter().copied())).unwrap();
        cli.flags.resolve()
    }

    #[test]
    fn flags_map_to_config_fields() {
        let cfg = parse(&["report", "--w0-mm", "0.9", "--q0y", "7.5", "--dv-grid", "0.2:4:0.02", "--format", "csv"]).unwrap();
        assert_eq!(cfg.w0_mm, 0.9);
        assert_eq!(cfg.q0y, Q0y::Value(7.5));
        assert_eq!(cfg.dv, DvSpec::Grid(DvGrid { start: 0.2, stop: 4.0, step: 0.02 }));
        assert_eq!(cfg.format, Some(Format::Csv));
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "w0_mm = 0.5\ndv_mm = 1.0\ndc_points = 500\n").unwrap();
        let cfg = parse(&["trajectory", "--config", path.to_str().unwrap(), "--dv-mm", "2.14"]).unwrap();
        assert_eq!(cfg.w0_mm, 0.5);
        assert_eq!(cfg.dv, DvSpec::Single(2.14));
        assert_eq!(cfg.dc_points, 500);
    }

    #[test]
    fn negative_values_reach_the_config_parser() {
        assert_eq!(parse(&["env", "--phi", "-1.5"]).unwrap().phi_rad, -1.5);
        assert!(matches!(parse(&["env", "--w0-mm", "-1"]), Err(CliError::Config(_))));
    }

    #[test]
    fn single_value_grid_flag_is_rejected() {
        assert!(matches!(parse(&["report", "--dv-grid", "1.0"]), Err(CliError::Config(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["dephasing-sim", "bogus"]), EXIT_CONFIG);
        assert_eq!(run(["dephasing-sim", "env", "--w0-mm", "-1"]), EXIT_CONFIG);
        assert_eq!(run(["dephasing-sim", "ingest"]), EXIT_CONFIG);
        assert_eq!(run(["dephasing-sim", "trajectory", "--q0y", "1", "--dc-points", "10"]), EXIT_CONFIG);
        assert_eq!(CliError::Engine(crate::Error::Internal("x".into())).exit_code(), EXIT_ENGINE);
    }
}
