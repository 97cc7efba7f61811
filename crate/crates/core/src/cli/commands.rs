//! Subcommand implementations. Each renders the complete output text so
//! that writing stays a single final step.

use std::fs::File;
use std::path::Path;

use serde_json::{json, Value};

use super::config::{DcRange, DvSpec, Format, Q0y, RunConfig};
use super::output::{json_number, to_json_string, Cell, Table};
use super::{config_error, CliError};
use crate::calibration::{bundled_table, fit_q0y, read_table_csv, CalibrationResult, DEFAULT_SCAN_POINTS, Q0Y_LIMIT};
use crate::environment::{
    build_gaussian, build_structured, ingest_tabulated, read_tabulated_csv, EnvParams, EnvironmentSpectrum,
    DEFAULT_BASELINE_WINDOW,
};
use crate::nonmarkov::{report, report_sweep, trajectory, DynamicsReport, EnvSource, SweepSettings, Trajectory};

fn open(path: &Path, what: &str) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Config(format!("cannot open {what} {}: {e}", path.display())))
}

/// Reference table from `table_path`, or the bundled one.
pub fn load_table(cfg: &RunConfig) -> Result<Vec<(f64, f64)>, CliError> {
    match &cfg.table_path {
        Some(path) => read_table_csv(open(path, "table")?).map_err(config_error),
        None => Ok(bundled_table()),
    }
}

pub fn calibrate(cfg: &RunConfig) -> Result<CalibrationResult, CliError> {
    let rows = load_table(cfg)?;
    Ok(fit_q0y(cfg.w0_mm, &rows, (0.0, Q0Y_LIMIT), DEFAULT_SCAN_POINTS)?)
}

/// The configured `q0y`, calibrating first when it is set to `fit`.
pub fn resolve_q0y(cfg: &RunConfig) -> Result<f64, CliError> {
    match cfg.q0y {
        Q0y::Value(q) => Ok(q),
        Q0y::Fit => Ok(calibrate(cfg)?.q0y_fit),
    }
}

fn single_params(cfg: &RunConfig, q0y: f64) -> Result<EnvParams, CliError> {
    let dv = match cfg.dv {
        DvSpec::None => 0.0,
        DvSpec::Single(dv) => dv,
        DvSpec::Grid(_) => return Err(CliError::Config("this command takes a single dv, not a grid".into())),
    };
    EnvParams::new(cfg.w0_mm, q0y, dv, cfg.phi_rad).map_err(config_error)
}

fn read_ingested(path: &Path) -> Result<EnvironmentSpectrum, CliError> {
    let rows = read_tabulated_csv(open(path, "input")?).map_err(config_error)?;
    ingest_tabulated(&rows, DEFAULT_BASELINE_WINDOW).map_err(config_error)
}

fn spectrum_table(spectrum: &EnvironmentSpectrum) -> Table {
    let mut t = Table::new(vec!["q_mm_inv", "density"]);
    for (&q, &d) in spectrum.q_grid().iter().zip(spectrum.density()) {
        t.push(vec![q.into(), d.into()]);
    }
    t
}

fn render_table(table: &Table, format: Format) -> String {
    match format {
        Format::Csv => table.to_csv(),
        Format::Json => to_json_string(&table.to_json_value()),
    }
}

/// Spectrum of the configured environment, or of the ingested file when
/// `input_path` is set.
pub fn cmd_env(cfg: &RunConfig) -> Result<String, CliError> {
    let spectrum = match &cfg.input_path {
        Some(path) => read_ingested(path)?,
        None => {
            let params = single_params(cfg, resolve_q0y(cfg)?)?;
            if params.is_structured() {
                build_structured(&params)?
            } else {
                build_gaussian(&params)?
            }
        }
    };
    Ok(render_table(&spectrum_table(&spectrum), cfg.format.unwrap_or(Format::Csv)))
}

/// Cleaned spectrum of a measured `q_mm_inv,counts` file.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<String, CliError> {
    if cfg.input_path.is_none() {
        return Err(CliError::Config("ingest needs --input".into()));
    }
    cmd_env(cfg)
}

/// Trajectory of the configured environment and its scan range.
fn run_trajectory(cfg: &RunConfig) -> Result<Trajectory, CliError> {
    match &cfg.input_path {
        Some(path) => {
            let spectrum = read_ingested(path)?;
            let dv = match cfg.dv {
                DvSpec::Single(dv) => dv,
                _ => 0.0,
            };
            let range = cfg.dc_range.resolve(cfg.w0_mm, dv);
            Ok(trajectory(EnvSource::Spectrum(&spectrum), range, cfg.dc_points).map_err(usage)?)
        }
        None => {
            let params = single_params(cfg, resolve_q0y(cfg)?)?;
            let range = cfg.dc_range.resolve(params.w0, params.dv);
            Ok(trajectory(EnvSource::Params(params), range, cfg.dc_points).map_err(usage)?)
        }
    }
}

/// Scan-size problems are user errors; everything else stays an engine
/// failure.
fn usage(e: crate::Error) -> CliError {
    match e {
        crate::Error::InvalidParams(_) => config_error(e),
        other => CliError::Engine(other),
    }
}

pub fn cmd_trajectory(cfg: &RunConfig) -> Result<String, CliError> {
    let traj = run_trajectory(cfg)?;
    let mut t = Table::new(vec!["dc_mm", "trace_distance"]);
    for (dc, d) in traj.points() {
        t.push(vec![dc.into(), d.into()]);
    }
    Ok(render_table(&t, cfg.format.unwrap_or(Format::Csv)))
}

const REPORT_COLUMNS: [&str; 6] = ["dv_mm", "w0_mm", "q0y_mm_inv", "nd", "classification", "dc_max_mm"];

fn report_row(dv: Option<f64>, w0: f64, q0y: Option<f64>, r: &DynamicsReport) -> Vec<Cell> {
    vec![
        dv.into(),
        w0.into(),
        q0y.into(),
        r.nd.into(),
        Cell::Text(r.classification.to_string()),
        r.dc_max.into(),
    ]
}

/// Dynamics report for one environment, or an array of reports over a
/// `dv` grid.
pub fn cmd_report(cfg: &RunConfig) -> Result<String, CliError> {
    let mut table = Table::new(REPORT_COLUMNS.to_vec());
    let single = !matches!(cfg.dv, DvSpec::Grid(_));
    match (cfg.dv, &cfg.input_path) {
        (DvSpec::Grid(_), Some(_)) => {
            return Err(CliError::Config("a dv grid cannot be combined with an input spectrum".into()))
        }
        (DvSpec::Grid(grid), None) => {
            let q0y = resolve_q0y(cfg)?;
            let settings = SweepSettings {
                n_points: cfg.dc_points,
                range: match cfg.dc_range {
                    DcRange::Auto => None,
                    DcRange::Value(v) => Some(v),
                },
                nd_threshold: cfg.nd_threshold,
                phi: cfg.phi_rad,
            };
            for point in report_sweep(cfg.w0_mm, q0y, &grid.values(), &settings).map_err(usage)? {
                let r = point.outcome.map_err(usage)?;
                table.push(report_row(Some(point.dv), cfg.w0_mm, Some(q0y), &r));
            }
        }
        (dv, input) => {
            let traj = run_trajectory(cfg)?;
            let r = report(&traj, cfg.nd_threshold);
            let q0y = match input {
                Some(_) => None,
                None => traj.source().params().map(|p| p.q0y),
            };
            let dv = match dv {
                DvSpec::Single(dv) => Some(dv),
                _ => None,
            };
            table.push(report_row(dv, cfg.w0_mm, q0y, &r));
        }
    }
    Ok(match cfg.format.unwrap_or(Format::Json) {
        Format::Csv => table.to_csv(),
        Format::Json if single => to_json_string(&table.row_object(&table.rows[0])),
        Format::Json => to_json_string(&table.to_json_value()),
    })
}

/// Calibration of `q0y` against the reference table, as JSON.
pub fn cmd_fit(cfg: &RunConfig) -> Result<String, CliError> {
    if cfg.format == Some(Format::Csv) {
        return Err(CliError::Config("fit writes JSON only".into()));
    }
    let result = calibrate(cfg)?;
    let rows: Vec<Value> = result
        .table
        .iter()
        .map(|r| {
            json!({
                "dv_mm": json_number(r.dv_mm),
                "nd_target": json_number(r.nd_target),
                "nd_model": json_number(r.nd_model),
            })
        })
        .collect();
    let value = json!({
        "w0_mm": json_number(cfg.w0_mm),
        "q0y_fit": json_number(result.q0y_fit),
        "residual": json_number(result.residual),
        "table": rows,
    });
    Ok(to_json_string(&value))
}
