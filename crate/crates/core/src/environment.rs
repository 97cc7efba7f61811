//! Transverse-momentum spectral densities `|f(q_y)|^2` acting as the
//! qubit's environment.
//!
//! Two analytic families are provided: a plain Gaussian beam and the
//! two-beam interference pattern
//!
//! ```text
//!     |f(q)|^2 ∝ exp(-w0^2 (q - q0y)^2 / 2) [1 - cos(2 dv q)]
//! ```
//!
//! Measured rows (for example one line of a CCD frame in the Fourier plane)
//! are cleaned and resampled by [`ingest_tabulated`]. Every spectrum is
//! stored on a uniform grid and normalized to unit trapezoidal integral.

use std::f64::consts::PI;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the Gaussian envelope window, in units of `1 / w0`.
pub const ENVELOPE_HALF_SPAN: f64 = 8.0;
/// Modulation periods added beyond each tail of the envelope window.
pub const TAIL_PERIODS: f64 = 3.0;
/// Envelope sampling: `dq <= ENVELOPE_SPACING / w0`.
pub const ENVELOPE_SPACING: f64 = 0.02;
/// Samples per half modulation period: `dq <= pi / (MODULATION_SAMPLES dv)`.
pub const MODULATION_SAMPLES: f64 = 20.0;
pub const DEFAULT_BASELINE_WINDOW: f64 = 0.1;
pub const MIN_TABULATED_SAMPLES: usize = 16;

const NORMALIZATION_TOL: f64 = 1e-9;

/// Analytic environment description. Lengths in mm, momenta in mm^-1,
/// `phi` in radians. `dv == 0` is the unstructured single-beam case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub w0: f64,
    pub q0y: f64,
    pub dv: f64,
    pub phi: f64,
}

impl EnvParams {
    pub fn new(w0: f64, q0y: f64, dv: f64, phi: f64) -> Result<Self> {
        let p = Self { w0, q0y, dv, phi };
        p.validate()?;
        Ok(p)
    }

    pub fn gaussian(w0: f64, q0y: f64) -> Result<Self> {
        Self::new(w0, q0y, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w0.is_finite() && self.q0y.is_finite() && self.dv.is_finite() && self.phi.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite parameter in {self:?}")));
        }
        if self.w0 <= 0.0 {
            return Err(Error::InvalidParams(format!("beam waist w0 = {} must be positive", self.w0)));
        }
        if self.dv < 0.0 {
            return Err(Error::InvalidParams(format!("beam separation dv = {} must be >= 0", self.dv)));
        }
        Ok(())
    }

    pub fn is_structured(&self) -> bool {
        self.dv > 0.0
    }
}

/// Unnormalized Gaussian envelope.
pub fn gaussian_density(params: &EnvParams, q: f64) -> f64 {
    let x = params.w0 * (q - params.q0y);
    (-0.5 * x * x).exp()
}

/// Unnormalized interference-structured density.
pub fn structured_density(params: &EnvParams, q: f64) -> f64 {
    gaussian_density(params, q) * (1.0 - (2.0 * params.dv * q).cos())
}

/// A normalized spectral density sampled on a uniform momentum grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpectrum {
    q_grid: Vec<f64>,
    density: Vec<f64>,
    meta: Option<EnvParams>,
}

/// Trapezoidal rule on a uniform grid.
pub(crate) fn trapezoid(values: &[f64], spacing: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => spacing * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

fn uniform_grid(start: f64, stop: f64, max_spacing: f64) -> Vec<f64> {
    let n = ((stop - start) / max_spacing).ceil() as usize + 1;
    let h = (stop - start) / (n - 1) as f64;
    (0..n).map(|i| start + i as f64 * h).collect()
}

impl EnvironmentSpectrum {
    /// Normalizes `density` on the uniform grid `q_grid`.
    pub fn from_samples(q_grid: Vec<f64>, density: Vec<f64>, meta: Option<EnvParams>) -> Result<Self> {
        if q_grid.len() != density.len() {
            return Err(Error::InvalidData("grid and density lengths differ".into()));
        }
        if q_grid.len() < 3 {
            return Err(Error::InvalidData("a spectrum needs at least 3 samples".into()));
        }
        let h = (q_grid[q_grid.len() - 1] - q_grid[0]) / (q_grid.len() - 1) as f64;
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidData("momentum grid must be strictly increasing".into()));
        }
        for (i, q) in q_grid.iter().enumerate() {
            let expected = q_grid[0] + i as f64 * h;
            if (q - expected).abs() > 1e-9 * h.max(expected.abs()) {
                return Err(Error::InvalidData(format!("momentum grid is not uniform at index {i}")));
            }
        }
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::InvalidData("density must be finite and non-negative".into()));
        }
        let norm = trapezoid(&density, h);
        if !(norm > 0.0) {
            return Err(Error::InvalidData("density integrates to zero".into()));
        }
        let density = density.into_iter().map(|d| d / norm).collect();
        Ok(Self { q_grid, density, meta })
    }

    pub fn q_grid(&self) -> &[f64] {
        &self.q_grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn meta(&self) -> Option<&EnvParams> {
        self.meta.as_ref()
    }

    pub fn len(&self) -> usize {
        self.q_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q_grid.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        (self.q_grid[self.len() - 1] - self.q_grid[0]) / (self.len() - 1) as f64
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.density, self.spacing())
    }

    /// Trapezoidal `∫ (q - center)^k density dq`.
    pub fn moment(&self, center: f64, order: i32) -> f64 {
        let vals: Vec<f64> = self
            .q_grid
            .iter()
            .zip(&self.density)
            .map(|(q, d)| (q - center).powi(order) * d)
            .collect();
        trapezoid(&vals, self.spacing())
    }

    /// Linear interpolation, zero outside the grid.
    pub fn interpolate(&self, q: f64) -> f64 {
        let n = self.len();
        let (lo, hi) = (self.q_grid[0], self.q_grid[n - 1]);
        if !(lo..=hi).contains(&q) {
            return 0.0;
        }
        let t = (q - lo) / self.spacing();
        let i = (t.floor() as usize).min(n - 2);
        let frac = t - i as f64;
        self.density[i] * (1.0 - frac) + self.density[i + 1] * frac
    }

    /// `∫ |a - b| dq` over the union of both supports, sampled on the finer
    /// of the two grids.
    pub fn l1_distance(&self, other: &EnvironmentSpectrum) -> f64 {
        let lo = self.q_grid[0].min(other.q_grid[0]);
        let hi = self.q_grid[self.len() - 1].max(other.q_grid[other.len() - 1]);
        let grid = uniform_grid(lo, hi, self.spacing().min(other.spacing()));
        let h = (hi - lo) / (grid.len() - 1) as f64;
        let diffs: Vec<f64> = grid
            .iter()
            .map(|&q| (self.interpolate(q) - other.interpolate(q)).abs())
            .collect();
        trapezoid(&diffs, h)
    }

    /// Same spectrum on a grid `factor` times finer. Analytic spectra are
    /// rebuilt from their parameters; tabulated ones are interpolated.
    pub fn refined(&self, factor: usize) -> Result<EnvironmentSpectrum> {
        if factor <= 1 {
            return Ok(self.clone());
        }
        if let Some(params) = self.meta {
            return if params.is_structured() {
                build_structured_refined(&params, factor)
            } else {
                build_gaussian_refined(&params, factor)
            };
        }
        let n = (self.len() - 1) * factor + 1;
        let h = self.spacing() / factor as f64;
        let start = self.q_grid[0];
        let q: Vec<f64> = (0..n).map(|i| start + i as f64 * h).collect();
        let d = q.iter().map(|&x| self.interpolate(x)).collect();
        EnvironmentSpectrum::from_samples(q, d, None)
    }

    pub(crate) fn check_normalized(&self) -> Result<()> {
        let integral = self.integral();
        if (integral - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Internal(format!("spectrum integral {integral} is not 1")));
        }
        Ok(())
    }
}

fn build_from(params: &EnvParams, half_span: f64, spacing: f64, f: fn(&EnvParams, f64) -> f64) -> Result<EnvironmentSpectrum> {
    let q = uniform_grid(params.q0y - half_span, params.q0y + half_span, spacing);
    let d = q.iter().map(|&x| f(params, x)).collect();
    let spectrum = EnvironmentSpectrum::from_samples(q, d, Some(*params))?;
    spectrum.check_normalized()?;
    Ok(spectrum)
}

/// Gaussian spectrum on `q0y ± 8 / w0`. `params.dv` is ignored and the
/// stored provenance has `dv = 0`.
pub fn build_gaussian(params: &EnvParams) -> Result<EnvironmentSpectrum> {
    build_gaussian_refined(params, 1)
}

pub fn build_gaussian_refined(params: &EnvParams, refine: usize) -> Result<EnvironmentSpectrum> {
    let params = EnvParams { dv: 0.0, ..*params };
    params.validate()?;
    let spacing = ENVELOPE_SPACING / params.w0 / refine.max(1) as f64;
    build_from(&params, ENVELOPE_HALF_SPAN / params.w0, spacing, gaussian_density)
}

/// Interference-structured spectrum. The grid covers the envelope window
/// plus three modulation periods on each side and samples each modulation
/// period at least 40 times.
pub fn build_structured(params: &EnvParams) -> Result<EnvironmentSpectrum> {
    build_structured_refined(params, 1)
}

pub fn build_structured_refined(params: &EnvParams, refine: usize) -> Result<EnvironmentSpectrum> {
    params.validate()?;
    if !params.is_structured() {
        return Err(Error::InvalidParams(
            "structured spectrum needs dv > 0; use build_gaussian for dv = 0".into(),
        ));
    }
    let half_span = ENVELOPE_HALF_SPAN / params.w0 + TAIL_PERIODS * PI / params.dv;
    let spacing = (ENVELOPE_SPACING / params.w0).min(PI / (MODULATION_SAMPLES * params.dv));
    build_from(params, half_span, spacing / refine.max(1) as f64, structured_density)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Cleans a measured `(q, counts)` row into a normalized spectrum.
///
/// The background is a straight line through the medians of the outermost
/// `baseline_window` fraction of samples on each side (anchored at the mean
/// momentum of each window). After subtraction negatives are clipped, the
/// row is resampled onto a uniform grid with the same number of points and
/// normalized.
pub fn ingest_tabulated(rows: &[(f64, f64)], baseline_window: f64) -> Result<EnvironmentSpectrum> {
    let n = rows.len();
    if n < MIN_TABULATED_SAMPLES {
        return Err(Error::InvalidData(format!(
            "need at least {MIN_TABULATED_SAMPLES} samples, got {n}"
        )));
    }
    if !(baseline_window > 0.0 && baseline_window < 0.5) {
        return Err(Error::InvalidData(format!(
            "baseline window {baseline_window} must lie in (0, 0.5)"
        )));
    }
    if rows.iter().any(|(q, c)| !q.is_finite() || !c.is_finite()) {
        return Err(Error::InvalidData("non-finite sample".into()));
    }
    if let Some(w) = rows.windows(2).position(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidData(format!("momentum not strictly increasing at row {}", w + 1)));
    }

    if rows.iter().all(|r| r.1 <= 0.0) {
        return Err(Error::InvalidData("no positive counts".into()));
    }

    let k = ((baseline_window * n as f64).round() as usize).max(1);
    let side = |slice: &[(f64, f64)]| {
        let mut counts: Vec<f64> = slice.iter().map(|r| r.1).collect();
        let q_mean = slice.iter().map(|r| r.0).sum::<f64>() / slice.len() as f64;
        (q_mean, median(&mut counts))
    };
    let (q_left, b_left) = side(&rows[..k]);
    let (q_right, b_right) = side(&rows[n - k..]);
    let slope = (b_right - b_left) / (q_right - q_left);
    let cleaned: Vec<(f64, f64)> = rows
        .iter()
        .map(|&(q, c)| (q, (c - (b_left + slope * (q - q_left))).max(0.0)))
        .collect();

    let (start, stop) = (rows[0].0, rows[n - 1].0);
    let h = (stop - start) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| start + i as f64 * h).collect();
    let mut j = 0;
    let resampled: Vec<f64> = grid
        .iter()
        .map(|&q| {
            while j + 2 < n && cleaned[j + 1].0 <= q {
                j += 1;
            }
            let (qa, da) = cleaned[j];
            let (qb, db) = cleaned[j + 1];
            let t = ((q - qa) / (qb - qa)).clamp(0.0, 1.0);
            da + t * (db - da)
        })
        .collect();
    let peak = rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
    if resampled.iter().all(|&d| d <= 1e-12 * peak) {
        return Err(Error::InvalidData("density is zero everywhere after baseline removal".into()));
    }
    EnvironmentSpectrum::from_samples(grid, resampled, None)
}

/// Reads the two-column `q_mm_inv,counts` CSV format.
pub fn read_tabulated_csv<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::InvalidData(format!("cannot read CSV header: {e}")))?
        .clone();
    if headers.len() != 2 || &headers[0] != "q_mm_inv" || &headers[1] != "counts" {
        return Err(Error::InvalidData(format!(
            "expected header `q_mm_inv,counts`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidData(format!("CSV row {}: {e}", i + 2)))?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidData(format!("CSV row {}: cannot parse `{s}`", i + 2)))
        };
        if record.len() != 2 {
            return Err(Error::InvalidData(format!("CSV row {}: expected 2 columns", i + 2)));
        }
        rows.push((parse(&record[0])?, parse(&record[1])?));
    }
    Ok(rows)
}
