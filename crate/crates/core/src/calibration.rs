//! Parameter calibration.
//!
//! [`fit_q0y`] pins the central transverse momentum `q0y` against a table of
//! target `N_D` values; [`fit_spectrum`] fits the structured-spectrum shape
//! `(w0, dv, q0y)` to a measured density.
//!
//! Both objectives oscillate through `cos(2 dv q)`, so every 1-D search is a
//! dense scan followed by golden-section refinement of the best bracket.

use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{structured_density, EnvParams, EnvironmentSpectrum};
use crate::error::{Error, Result};
use crate::optimize::golden_section;
use crate::nonmarkov::{blp_measure, default_range, trajectory, EnvSource, DEFAULT_TRAJECTORY_POINTS};

pub const Q0Y_LIMIT: f64 = 30.0;
pub const MIN_SCAN_POINTS: usize = 500;
pub const DEFAULT_SCAN_POINTS: usize = 3001;
/// Minima whose residual is within this fraction of the best are ties.
pub const TIE_FRACTION: f64 = 0.01;
pub const MAX_SWEEPS: usize = 200;

const TIE_FLOOR: f64 = 1e-12;
const COORDINATE_SCAN: usize = 201;

/// Reference table of target `N_D` values, `dv_mm,nd`.
pub const BUNDLED_TABLE: &str = include_str!("../data/reference_nd.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub dv_mm: f64,
    pub nd_target: f64,
    pub nd_model: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub q0y_fit: f64,
    /// Sum of squared `N_D` errors over the table.
    pub residual: f64,
    pub table: Vec<TableRow>,
}

/// `N_D` of the structured environment on the default scan.
pub fn model_nd(w0: f64, q0y: f64, dv: f64) -> Result<f64> {
    let params = EnvParams::new(w0, q0y, dv, 0.0)?;
    let traj = trajectory(EnvSource::Params(params), default_range(&params), DEFAULT_TRAJECTORY_POINTS)?;
    Ok(blp_measure(&traj))
}

fn table_residual(w0: f64, q0y: f64, rows: &[(f64, f64)]) -> Result<f64> {
    rows.iter().try_fold(0.0, |acc, &(dv, target)| {
        let nd = model_nd(w0, q0y, dv)?;
        Ok(acc + (nd - target) * (nd - target))
    })
}

/// Fits `q0y` so the model `N_D(dv)` matches `rows` of `(dv, nd_target)`.
///
/// The objective is scanned on `n_scan` evenly spaced points of
/// `q0y_range`. Grid points within 1% of the best residual form candidate
/// basins; the basin with the smallest `q0y` is chosen. A flat basin reports
/// its midpoint, otherwise its best point is refined by golden section.
pub fn fit_q0y(w0: f64, rows: &[(f64, f64)], q0y_range: (f64, f64), n_scan: usize) -> Result<CalibrationResult> {
    if rows.is_empty() {
        return Err(Error::InvalidData("calibration table is empty".into()));
    }
    let (lo, hi) = q0y_range;
    if !(0.0 <= lo && lo < hi && hi <= Q0Y_LIMIT) {
        return Err(Error::InvalidParams(format!(
            "q0y range [{lo}, {hi}] must lie within [0, {Q0Y_LIMIT}]"
        )));
    }
    if n_scan < MIN_SCAN_POINTS {
        return Err(Error::InvalidParams(format!("need at least {MIN_SCAN_POINTS} scan points")));
    }
    if rows.iter().any(|(dv, nd)| !(*dv > 0.0) || !nd.is_finite()) {
        return Err(Error::InvalidData("table rows need dv > 0 and finite nd".into()));
    }
    EnvParams::gaussian(w0, lo)?;

    let step = (hi - lo) / (n_scan - 1) as f64;
    let grid: Vec<f64> = (0..n_scan).map(|i| lo + i as f64 * step).collect();
    let scan: Vec<Option<f64>> = grid.par_iter().map(|&q| table_residual(w0, q, rows).ok()).collect();

    let best = scan
        .iter()
        .flatten()
        .copied()
        .reduce(f64::min)
        .ok_or_else(|| Error::NonConvergence("every scan point failed".into()))?;
    let threshold = best + (TIE_FRACTION * best).max(TIE_FLOOR);
    let within = |i: usize| scan[i].is_some_and(|r| r <= threshold);
    let start = (0..n_scan).find(|&i| within(i)).expect("the best point is within threshold");
    let end = (start..n_scan).take_while(|&i| within(i)).last().unwrap();

    let basin: Vec<f64> = (start..=end).map(|i| scan[i].unwrap()).collect();
    let spread = basin.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - basin.iter().cloned().fold(f64::INFINITY, f64::min);
    let (arg, _) = basin
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let j = start + arg;
    let grid_best = (grid[j], scan[j].unwrap());

    let (q0y_fit, residual) = if basin.len() >= 3 && spread <= TIE_FLOOR {
        let mid = 0.5 * (grid[start] + grid[end]);
        match table_residual(w0, mid, rows) {
            Ok(r) if r <= threshold => (mid, r),
            _ => grid_best,
        }
    } else {
        let a = grid[j.saturating_sub(1)];
        let b = grid[(j + 1).min(n_scan - 1)];
        let objective = |q: f64| table_residual(w0, q, rows).unwrap_or(f64::INFINITY);
        let refined = golden_section(objective, a, b, 1e-9 * (hi - lo));
        if refined.1 < grid_best.1 {
            refined
        } else {
            grid_best
        }
    };

    let table = rows
        .iter()
        .map(|&(dv, target)| {
            Ok(TableRow { dv_mm: dv, nd_target: target, nd_model: model_nd(w0, q0y_fit, dv)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationResult { q0y_fit, residual, table })
}

/// Reads the `dv_mm,nd` CSV format.
pub fn read_table_csv<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::InvalidData(format!("cannot read CSV header: {e}")))?
        .clone();
    if headers.len() != 2 || &headers[0] != "dv_mm" || &headers[1] != "nd" {
        return Err(Error::InvalidData("expected header `dv_mm,nd`".into()));
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidData(format!("CSV row {}: {e}", i + 2)))?;
        let values: Vec<f64> = record
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidData(format!("CSV row {}: not a number", i + 2)))?;
        if values.len() != 2 {
            return Err(Error::InvalidData(format!("CSV row {}: expected 2 columns", i + 2)));
        }
        rows.push((values[0], values[1]));
    }
    if rows.is_empty() {
        return Err(Error::InvalidData("table has no data rows".into()));
    }
    Ok(rows)
}

pub fn bundled_table() -> Vec<(f64, f64)> {
    read_table_csv(BUNDLED_TABLE.as_bytes()).expect("bundled table parses")
}

/// Result of fitting the structured-spectrum shape to measured data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFit {
    pub params: EnvParams,
    /// Scale applied to the unnormalized model density.
    pub amplitude: f64,
    pub baseline: f64,
    /// Sum of squared density residuals.
    pub residual: f64,
    pub sweeps: usize,
}

struct Profiled {
    amplitude: f64,
    baseline: f64,
    residual: f64,
}

/// Best `amplitude * model + baseline` for fixed shape parameters.
fn profile(data: &EnvironmentSpectrum, w0: f64, dv: f64, q0y: f64) -> Profiled {
    let p = EnvParams { w0, q0y, dv, phi: 0.0 };
    let n = data.len() as f64;
    let (mut sm, mut smm, mut sy, mut smy) = (0.0, 0.0, 0.0, 0.0);
    for (&q, &y) in data.q_grid().iter().zip(data.density()) {
        let m = structured_density(&p, q);
        sm += m;
        smm += m * m;
        sy += y;
        smy += m * y;
    }
    let det = n * smm - sm * sm;
    let (amplitude, baseline) = if det.abs() > 1e-300 {
        ((n * smy - sm * sy) / det, (smm * sy - sm * smy) / det)
    } else {
        (0.0, sy / n)
    };
    let residual = data
        .q_grid()
        .iter()
        .zip(data.density())
        .map(|(&q, &y)| {
            let r = y - amplitude * structured_density(&p, q) - baseline;
            r * r
        })
        .sum();
    Profiled { amplitude, baseline, residual }
}

/// Least-squares fit of `(w0, dv, q0y)` by cyclic coordinate descent in a
/// box around `init`: `w0` and `dv` within ±25%, `q0y` within `± 2 / w0`.
/// Amplitude and baseline are solved linearly at every evaluation.
pub fn fit_spectrum(data: &EnvironmentSpectrum, init: &EnvParams) -> Result<SpectrumFit> {
    init.validate()?;
    if !init.is_structured() {
        return Err(Error::InvalidParams("initial guess needs dv > 0".into()));
    }
    let mean = data.density().iter().sum::<f64>() / data.len() as f64;
    let variance: f64 = data.density().iter().map(|d| (d - mean).powi(2)).sum::<f64>();
    if variance <= 1e-20 * mean * mean * data.len() as f64 {
        return Err(Error::NonConvergence("density carries no structure to fit".into()));
    }

    let bounds = [
        (0.75 * init.w0, 1.25 * init.w0),
        (0.75 * init.dv, 1.25 * init.dv),
        (init.q0y - 2.0 / init.w0, init.q0y + 2.0 / init.w0),
    ];
    let mut x = [init.w0, init.dv, init.q0y];
    let eval = |x: &[f64; 3]| profile(data, x[0], x[1], x[2]).residual;
    let mut current = eval(&x);

    for sweep in 1..=MAX_SWEEPS {
        let before = x;
        let start_residual = current;
        // dv first: its objective is the most oscillatory and does not depend
        // on the envelope parameters through the fringe positions
        for k in [1, 2, 0] {
            let (lo, hi) = bounds[k];
            let step = (hi - lo) / (COORDINATE_SCAN - 1) as f64;
            let at = |v: f64| {
                let mut y = x;
                y[k] = v;
                eval(&y)
            };
            let (i_best, r_best) = (0..COORDINATE_SCAN)
                .map(|i| (i, at(lo + i as f64 * step)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            let centre = lo + i_best as f64 * step;
            let (v, r) = golden_section(at, (centre - step).max(lo), (centre + step).min(hi), 1e-12 * (hi - lo));
            let (v, r) = if r <= r_best { (v, r) } else { (centre, r_best) };
            if r < current {
                x[k] = v;
                current = r;
            }
        }
        let moved = (0..3).map(|k| (x[k] - before[k]).abs() / (bounds[k].1 - bounds[k].0)).fold(0.0, f64::max);
        if moved < 1e-10 || start_residual - current <= 1e-15 * start_residual.max(1e-300) {
            let best = profile(data, x[0], x[1], x[2]);
            let r_squared = 1.0 - best.residual / variance;
            if !(best.amplitude > 0.0) || r_squared < 0.5 {
                return Err(Error::NonConvergence(format!(
                    "fit explains too little of the data (R^2 = {r_squared:.3})"
                )));
            }
            let params = EnvParams::new(x[0], x[2], x[1], init.phi)?;
            return Ok(SpectrumFit {
                params,
                amplitude: best.amplitude,
                baseline: best.baseline,
                residual: best.residual,
                sweeps: sweep,
            });
        }
    }
    Err(Error::NonConvergence(format!("no convergence after {MAX_SWEEPS} sweeps")))
}
