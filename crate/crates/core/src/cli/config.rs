//! Run configuration: a `key = value` file merged with command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::CliError;
use crate::nonmarkov::{DEFAULT_ND_THRESHOLD, DEFAULT_RANGE_WAISTS, DEFAULT_TRAJECTORY_POINTS};

/// Beam waist used when none is configured, in mm.
pub const DEFAULT_W0_MM: f64 = 0.88;

/// Keys accepted in a config file.
pub const CONFIG_KEYS: [&str; 11] = [
    "w0_mm",
    "q0y_mm_inv",
    "phi_rad",
    "dv_mm",
    "dc_points",
    "dc_range_mm",
    "output_path",
    "format",
    "table_path",
    "input_path",
    "nd_threshold",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Q0y {
    Value(f64),
    /// Calibrate against the reference table before running.
    Fit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl DvGrid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self, CliError> {
        if !(start > 0.0) || !(stop > start) || !(step > 0.0) || !stop.is_finite() {
            return Err(CliError::Config(format!(
                "dv grid {start}:{stop}:{step} needs 0 < start < stop and step > 0"
            )));
        }
        Ok(Self { start, stop, step })
    }

    /// Grid points from `start` to `stop` inclusive, each rounded to 12
    /// significant digits so that accumulated step error never shows up in
    /// the output.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| super::output::round12(self.start + i as f64 * self.step))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DvSpec {
    /// Unstructured Gaussian environment.
    None,
    Single(f64),
    Grid(DvGrid),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DcRange {
    /// `dv + 4 w0`.
    Auto,
    Value(f64),
}

impl DcRange {
    pub fn resolve(&self, w0: f64, dv: f64) -> f64 {
        match *self {
            DcRange::Auto => dv + DEFAULT_RANGE_WAISTS * w0,
            DcRange::Value(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub w0_mm: f64,
    pub q0y: Q0y,
    pub phi_rad: f64,
    pub dv: DvSpec,
    pub dc_points: usize,
    pub dc_range: DcRange,
    /// `None` writes to standard output.
    pub output_path: Option<PathBuf>,
    /// `None` picks the natural format of the subcommand.
    pub format: Option<Format>,
    pub table_path: Option<PathBuf>,
    pub input_path: Option<PathBuf>,
    pub nd_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            w0_mm: DEFAULT_W0_MM,
            q0y: Q0y::Fit,
            phi_rad: 0.0,
            dv: DvSpec::None,
            dc_points: DEFAULT_TRAJECTORY_POINTS,
            dc_range: DcRange::Auto,
            output_path: None,
            format: None,
            table_path: None,
            input_path: None,
            nd_threshold: DEFAULT_ND_THRESHOLD,
        }
    }
}

/// Raw `key -> value` settings before interpretation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigLayer(BTreeMap<String, String>);

impl ConfigLayer {
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Entries of `other` replace entries of `self`.
    pub fn overlay(mut self, other: ConfigLayer) -> Self {
        self.0.extend(other.0);
        self
    }

    /// Parses `key = value` lines. Blank lines and lines starting with `#`
    /// are skipped; values may be wrapped in double quotes.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut layer = ConfigLayer::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if !CONFIG_KEYS.contains(&key) {
                return Err(CliError::Config(format!("config line {}: unknown key `{key}`", i + 1)));
            }
            let value = value.trim();
            let value = value
                .strip_prefix('"')
                .and_then(|v| v.strip_suffix('"'))
                .unwrap_or(value);
            layer.set(key, value);
        }
        Ok(layer)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Interprets the layer on top of the defaults.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(v) = self.get("w0_mm") {
            cfg.w0_mm = positive("w0_mm", v)?;
        }
        if let Some(v) = self.get("q0y_mm_inv") {
            cfg.q0y = if v.eq_ignore_ascii_case("fit") { Q0y::Fit } else { Q0y::Value(finite("q0y_mm_inv", v)?) };
        }
        if let Some(v) = self.get("phi_rad") {
            cfg.phi_rad = finite("phi_rad", v)?;
        }
        if let Some(v) = self.get("dv_mm") {
            cfg.dv = parse_dv(v)?;
        }
        if let Some(v) = self.get("dc_points") {
            cfg.dc_points = v
                .parse()
                .map_err(|_| CliError::Config(format!("dc_points: `{v}` is not a count")))?;
        }
        if let Some(v) = self.get("dc_range_mm") {
            cfg.dc_range =
                if v.eq_ignore_ascii_case("auto") { DcRange::Auto } else { DcRange::Value(positive("dc_range_mm", v)?) };
        }
        if let Some(v) = self.get("output_path") {
            cfg.output_path = Some(PathBuf::from(v));
        }
        if let Some(v) = self.get("format") {
            cfg.format = Some(match v.to_ascii_lowercase().as_str() {
                "csv" => Format::Csv,
                "json" => Format::Json,
                _ => return Err(CliError::Config(format!("format: expected csv or json, got `{v}`"))),
            });
        }
        if let Some(v) = self.get("table_path") {
            cfg.table_path = Some(PathBuf::from(v));
        }
        if let Some(v) = self.get("input_path") {
            cfg.input_path = Some(PathBuf::from(v));
        }
        if let Some(v) = self.get("nd_threshold") {
            cfg.nd_threshold = positive("nd_threshold", v)?;
        }
        Ok(cfg)
    }
}

fn finite(key: &str, v: &str) -> Result<f64, CliError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(CliError::Config(format!("{key}: `{v}` is not a finite number"))),
    }
}

fn positive(key: &str, v: &str) -> Result<f64, CliError> {
    let x = finite(key, v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(CliError::Config(format!("{key}: must be positive, got {x}")))
    }
}

/// A single separation, or a grid written `start:stop:step`.
pub fn parse_dv(v: &str) -> Result<DvSpec, CliError> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [single] => Ok(DvSpec::Single(positive("dv_mm", single)?)),
        [start, stop, step] => Ok(DvSpec::Grid(DvGrid::new(
            finite("dv_mm", start)?,
            finite("dv_mm", stop)?,
            finite("dv_mm", step)?,
        )?)),
        _ => Err(CliError::Config(format!("dv_mm: expected a number or start:stop:step, got `{v}`"))),
    }
}
