//! Trace-distance trajectories and the information-backflow measure.
//!
//! For the antipodal pair `Psi±` the trace distance equals `|kappa(dc)|`,
//! so a trajectory is `|kappa|` sampled on a uniform `dc` grid. Its total
//! positive variation is the non-Markovianity measure `N_D`; any revival
//! after an initial decay marks information flowing back to the qubit.

use std::borrow::Cow;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dephasing::{
    closed_form_denominator, evolve_state, kappa_closed_form, quadrature_sum, resolve_for, Kappa,
    DENOMINATOR_FLOOR,
};
use crate::environment::{build_gaussian, build_structured, EnvParams, EnvironmentSpectrum};
use crate::error::{Error, Result};
use crate::optimize::golden_section;
use crate::qstate::{optimal_pair, trace_distance};

pub const MIN_TRAJECTORY_POINTS: usize = 200;
pub const DEFAULT_TRAJECTORY_POINTS: usize = 2000;
/// The default scan covers `[0, dv + DEFAULT_RANGE_WAISTS w0]`.
pub const DEFAULT_RANGE_WAISTS: f64 = 4.0;
pub const DEFAULT_ND_THRESHOLD: f64 = 1e-3;
/// Minimum rise above the preceding minimum for a local maximum to count.
pub const MIN_PROMINENCE: f64 = 1e-6;

/// Rises at or below this are quadrature round-off, not backflow.
pub const INCREMENT_FLOOR: f64 = 1e-12;

const TRAJECTORY_TOL: f64 = 1e-9;

/// Where the decoherence function comes from.
#[derive(Debug, Clone, Copy)]
pub enum EnvSource<'a> {
    Params(EnvParams),
    Spectrum(&'a EnvironmentSpectrum),
}

/// Provenance recorded on a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    ClosedForm(EnvParams),
    Quadrature(Option<EnvParams>),
}

impl TrajectorySource {
    /// Analytic parameters behind the trajectory, when known.
    pub fn params(&self) -> Option<&EnvParams> {
        match self {
            TrajectorySource::ClosedForm(p) => Some(p),
            TrajectorySource::Quadrature(p) => p.as_ref(),
        }
    }
}

/// A local extremum located between grid samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    /// Grid sample the extremum replaces.
    pub index: usize,
    pub dc: f64,
    pub d: f64,
}

/// `D(dc)` sampled on a uniform grid, with optionally refined extrema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    dc: Vec<f64>,
    d: Vec<f64>,
    extrema: Vec<Extremum>,
    source: TrajectorySource,
}

impl Trajectory {
    /// Wraps precomputed samples, checking the grid and the range of `d`.
    pub fn from_samples(dc: Vec<f64>, d: Vec<f64>, source: TrajectorySource) -> Result<Self> {
        if dc.len() != d.len() || dc.len() < 2 {
            return Err(Error::InvalidData("trajectory needs >= 2 matching samples".into()));
        }
        let h = (dc[dc.len() - 1] - dc[0]) / (dc.len() - 1) as f64;
        if !(h > 0.0) {
            return Err(Error::InvalidData("dc must be strictly increasing".into()));
        }
        for (i, x) in dc.iter().enumerate() {
            if (x - (dc[0] + i as f64 * h)).abs() > 1e-9 * h.max(x.abs()) {
                return Err(Error::InvalidData(format!("dc grid not uniform at index {i}")));
            }
        }
        if let Some(bad) = d.iter().find(|v| !(-TRAJECTORY_TOL..=1.0 + TRAJECTORY_TOL).contains(*v)) {
            return Err(Error::InvalidData(format!("trace distance {bad} outside [0, 1]")));
        }
        Ok(Self { dc, d, extrema: Vec::new(), source })
    }

    pub fn dc(&self) -> &[f64] {
        &self.dc
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn extrema(&self) -> &[Extremum] {
        &self.extrema
    }

    pub fn source(&self) -> &TrajectorySource {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.dc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dc.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.dc.iter().copied().zip(self.d.iter().copied())
    }
}

fn dc_grid(range: f64, n_points: usize) -> Result<Vec<f64>> {
    if n_points < MIN_TRAJECTORY_POINTS {
        return Err(Error::InvalidParams(format!(
            "trajectory needs at least {MIN_TRAJECTORY_POINTS} points, got {n_points}"
        )));
    }
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::InvalidParams(format!("dc range {range} must be positive")));
    }
    let h = range / (n_points - 1) as f64;
    Ok((0..n_points).map(|i| i as f64 * h).collect())
}

/// Default scan range `dv + 4 w0`.
pub fn default_range(params: &EnvParams) -> f64 {
    params.dv + DEFAULT_RANGE_WAISTS * params.w0
}

fn closed_form_usable(params: &EnvParams) -> bool {
    params.is_structured() && closed_form_denominator(params).abs() > DENOMINATOR_FLOOR
}

/// Spectrum used when the closed form is unavailable for `params`.
fn spectrum_for(params: &EnvParams) -> Result<EnvironmentSpectrum> {
    if params.is_structured() {
        build_structured(params)
    } else {
        build_gaussian(params)
    }
}

/// Evaluates `kappa(dc)` for one environment on a grid prepared for a
/// maximum displacement.
enum KappaEngine<'a> {
    /// The closed form carries no phase, so it yields `|kappa| exp(i phi)`.
    ClosedForm(EnvParams),
    Quadrature { spectrum: Cow<'a, EnvironmentSpectrum>, phi: f64, meta: Option<EnvParams> },
}

impl<'a> KappaEngine<'a> {
    fn new(source: EnvSource<'a>, max_dc: f64) -> Result<Self> {
        match source {
            EnvSource::Params(params) => {
                params.validate()?;
                if closed_form_usable(&params) {
                    return Ok(KappaEngine::ClosedForm(params));
                }
                let spectrum = resolve_for(&spectrum_for(&params)?, max_dc)?.into_owned();
                Ok(KappaEngine::Quadrature { spectrum: Cow::Owned(spectrum), phi: params.phi, meta: Some(params) })
            }
            EnvSource::Spectrum(spectrum) => Ok(KappaEngine::Quadrature {
                spectrum: resolve_for(spectrum, max_dc)?,
                phi: spectrum.meta().map_or(0.0, |m| m.phi),
                meta: spectrum.meta().copied(),
            }),
        }
    }

    fn magnitude(&self, dc: f64) -> Result<f64> {
        match self {
            KappaEngine::ClosedForm(params) => kappa_closed_form(params, dc),
            KappaEngine::Quadrature { spectrum, .. } => Ok(quadrature_sum(spectrum, dc, 0.0).norm().min(1.0)),
        }
    }

    fn kappa(&self, dc: f64) -> Result<Kappa> {
        match self {
            KappaEngine::ClosedForm(params) => {
                let m = kappa_closed_form(params, dc)?;
                Ok(Kappa::new(Complex64::from_polar(m, params.phi), dc))
            }
            KappaEngine::Quadrature { spectrum, phi, .. } => Ok(Kappa::new(quadrature_sum(spectrum, dc, *phi), dc)),
        }
    }

    fn source(&self) -> TrajectorySource {
        match self {
            KappaEngine::ClosedForm(params) => TrajectorySource::ClosedForm(*params),
            KappaEngine::Quadrature { meta, .. } => TrajectorySource::Quadrature(*meta),
        }
    }
}

/// Complex decoherence factors along `grid`.
pub fn kappa_series(source: EnvSource<'_>, grid: &[f64]) -> Result<Vec<Kappa>> {
    let max_dc = grid.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let engine = KappaEngine::new(source, max_dc)?;
    grid.iter().map(|&dc| engine.kappa(dc)).collect()
}

/// Refines every strict interior extremum of the samples by golden-section
/// search of `f` over the two adjacent intervals.
fn refine_extrema<F: Fn(f64) -> Result<f64>>(dc: &[f64], d: &[f64], f: F) -> Result<Vec<Extremum>> {
    let mut out = Vec::new();
    for i in 1..d.len().saturating_sub(1) {
        let (l, m, r) = (d[i - 1], d[i], d[i + 1]);
        let is_max = m >= l && m >= r && (m > l || m > r);
        let is_min = m <= l && m <= r && (m < l || m < r);
        if !(is_max || is_min) {
            continue;
        }
        let sign = if is_max { -1.0 } else { 1.0 };
        let (lo, hi) = (dc[i - 1], dc[i + 1]);
        let failed = std::cell::Cell::new(None);
        let objective = |x: f64| match f(x) {
            Ok(v) => sign * v,
            Err(e) => {
                failed.set(Some(e));
                f64::INFINITY
            }
        };
        let (at, value) = golden_section(objective, lo, hi, 1e-12 * (hi - lo).max(1e-300));
        if let Some(e) = failed.take() {
            return Err(e);
        }
        let value = sign * value;
        // never let the refinement move the extremum the wrong way
        let better = if is_max { value > m } else { value < m };
        let (at, value) = if better { (at, value) } else { (dc[i], m) };
        out.push(Extremum { index: i, dc: at, d: value });
    }
    Ok(out)
}

fn build<F: Fn(f64) -> Result<f64>>(grid: Vec<f64>, source: TrajectorySource, f: F) -> Result<Trajectory> {
    let d = grid.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    let mut traj = Trajectory::from_samples(grid, d, source)?;
    traj.extrema = refine_extrema(&traj.dc, &traj.d, f)?;
    Ok(traj)
}

/// `D(dc) = |kappa(dc)|` on `n_points` samples of `[0, range]`.
///
/// Analytic structured environments use the closed form unless its
/// denominator is degenerate; everything else is integrated numerically.
/// Interior extrema are additionally located to high precision on the
/// underlying function so that `N_D` does not depend on where the grid
/// happens to fall relative to sharp minima.
pub fn trajectory(source: EnvSource<'_>, range: f64, n_points: usize) -> Result<Trajectory> {
    let grid = dc_grid(range, n_points)?;
    let engine = KappaEngine::new(source, range)?;
    build(grid, engine.source(), |dc| engine.magnitude(dc))
}

/// Trajectory obtained by evolving both members of the optimal pair
/// through the dephasing channel and taking their trace distance.
pub fn trajectory_from_states(source: EnvSource<'_>, range: f64, n_points: usize) -> Result<Trajectory> {
    let grid = dc_grid(range, n_points)?;
    let engine = KappaEngine::new(source, range)?;
    let (plus, minus) = optimal_pair();
    build(grid, engine.source(), |dc| {
        let k = engine.kappa(dc)?;
        Ok(trace_distance(&evolve_state(&plus, &k)?, &evolve_state(&minus, &k)?))
    })
}

/// Sum of the positive increments of `D`: the discrete integral of its
/// positive slope. Refined extrema replace the grid samples they bracket.
pub fn blp_measure(traj: &Trajectory) -> f64 {
    if traj.extrema.is_empty() {
        return positive_variation(traj.d());
    }
    let mut d = traj.d.clone();
    for e in &traj.extrema {
        d[e.index] = e.d;
    }
    positive_variation(&d)
}

/// Sum of the increments larger than [`INCREMENT_FLOOR`].
pub fn positive_variation(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&rise| rise > INCREMENT_FLOOR)
        .fold(0.0, |acc, rise| acc + rise)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Markovian,
    NonMarkovian,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Markovian => "Markovian",
            Classification::NonMarkovian => "NonMarkovian",
        })
    }
}

/// A dephasing channel with `N_D = 0` is Markovian; `nd_threshold` absorbs
/// numerical noise.
pub fn classify(nd: f64, nd_threshold: f64) -> Classification {
    if nd > nd_threshold {
        Classification::NonMarkovian
    } else {
        Classification::Markovian
    }
}

/// Vertex of the parabola through three equally spaced samples, as an
/// offset in units of the spacing.
fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let curvature = left - 2.0 * mid + right;
    if curvature.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (left - right) / curvature).clamp(-0.5, 0.5)
    }
}

/// Location of the strongest information revival.
///
/// Candidates are samples strictly above both neighbours that rise at least
/// [`MIN_PROMINENCE`] above the minimum reached since the previous
/// candidate, and that follow a local minimum. The highest candidate is
/// refined by parabolic interpolation.
pub fn dc_max(traj: &Trajectory) -> Option<f64> {
    let d = traj.d();
    let mut seen_minimum = false;
    let mut trough = f64::INFINITY;
    let mut best: Option<usize> = None;
    for i in 1..d.len().saturating_sub(1) {
        trough = trough.min(d[i]);
        if d[i] < d[i - 1] && d[i] <= d[i + 1] {
            seen_minimum = true;
        }
        let is_peak = d[i] > d[i - 1] && d[i] > d[i + 1];
        if is_peak && seen_minimum && d[i] - trough >= MIN_PROMINENCE {
            if best.map_or(true, |b| d[i] > d[b]) {
                best = Some(i);
            }
            trough = d[i];
        }
    }
    let i = best?;
    let h = traj.dc()[1] - traj.dc()[0];
    Some(traj.dc()[i] + h * parabolic_offset(d[i - 1], d[i], d[i + 1]))
}

/// Location of the highest sample after the first local minimum; used when
/// `D` is still rising at the end of the scan.
fn highest_after_first_minimum(traj: &Trajectory) -> Option<f64> {
    let d = traj.d();
    let first_min = (1..d.len() - 1).find(|&i| d[i] < d[i - 1] && d[i] <= d[i + 1])?;
    let i = (first_min..d.len()).max_by(|&a, &b| d[a].total_cmp(&d[b]).then(b.cmp(&a)))?;
    Some(traj.dc()[i])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsReport {
    pub nd: f64,
    pub classification: Classification,
    pub dc_max: Option<f64>,
    pub nd_threshold: f64,
}

/// `N_D`, its classification and (only for non-Markovian dynamics) the
/// revival location.
pub fn report(traj: &Trajectory, nd_threshold: f64) -> DynamicsReport {
    let nd = blp_measure(traj);
    let classification = classify(nd, nd_threshold);
    let dc_max = match classification {
        Classification::Markovian => None,
        Classification::NonMarkovian => dc_max(traj).or_else(|| highest_after_first_minimum(traj)),
    };
    DynamicsReport { nd, classification, dc_max, nd_threshold }
}

/// Scan settings shared by the `dv` sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub n_points: usize,
    /// Fixed scan range; `None` uses `dv + 4 w0` per point.
    pub range: Option<f64>,
    pub nd_threshold: f64,
    pub phi: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { n_points: DEFAULT_TRAJECTORY_POINTS, range: None, nd_threshold: DEFAULT_ND_THRESHOLD, phi: 0.0 }
    }
}

/// One point of a `dv` sweep; engine failures are kept per point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub dv: f64,
    pub outcome: Result<DynamicsReport>,
}

fn check_dv_grid(dv_grid: &[f64]) -> Result<()> {
    if dv_grid.iter().any(|dv| !(*dv > 0.0) || !dv.is_finite()) {
        return Err(Error::InvalidParams("dv grid must be positive".into()));
    }
    if dv_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("dv grid must be increasing".into()));
    }
    Ok(())
}

/// Dynamics report for every `dv`, evaluated in parallel. Output order
/// follows `dv_grid` and each point is computed independently, so results
/// do not depend on scheduling.
pub fn report_sweep(w0: f64, q0y: f64, dv_grid: &[f64], settings: &SweepSettings) -> Result<Vec<SweepPoint>> {
    check_dv_grid(dv_grid)?;
    EnvParams::new(w0, q0y, 0.0, settings.phi)?;
    Ok(dv_grid
        .par_iter()
        .map(|&dv| {
            let outcome = EnvParams::new(w0, q0y, dv, settings.phi).and_then(|p| {
                let range = settings.range.unwrap_or_else(|| default_range(&p));
                let traj = trajectory(EnvSource::Params(p), range, settings.n_points)?;
                Ok(report(&traj, settings.nd_threshold))
            });
            SweepPoint { dv, outcome }
        })
        .collect())
}

/// `N_D` as a function of `dv`.
pub fn nd_sweep(w0: f64, q0y: f64, dv_grid: &[f64]) -> Result<Vec<(f64, Result<f64>)>> {
    Ok(report_sweep(w0, q0y, dv_grid, &SweepSettings::default())?
        .into_iter()
        .map(|p| (p.dv, p.outcome.map(|r| r.nd)))
        .collect())
}

/// Revival location as a function of `dv`; absent wherever the dynamics is
/// classified Markovian.
pub fn dcmax_sweep(w0: f64, q0y: f64, dv_grid: &[f64]) -> Result<Vec<(f64, Result<Option<f64>>)>> {
    Ok(report_sweep(w0, q0y, dv_grid, &SweepSettings::default())?
        .into_iter()
        .map(|p| (p.dv, p.outcome.map(|r| r.dc_max)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const W0: f64 = 0.88;

    fn synthetic(d: Vec<f64>) -> Trajectory {
        let dc = (0..d.len()).map(|i| i as f64 * 0.1).collect();
        Trajectory::from_samples(dc, d, TrajectorySource::Quadrature(None)).unwrap()
    }

    /// Brute-force location of the highest point after `D` first turns up.
    fn dense_argmax(params: &EnvParams, hi: f64) -> f64 {
        let n = 200_000;
        let xs: Vec<f64> = (0..=n).map(|i| hi * i as f64 / n as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| kappa_closed_form(params, x).unwrap()).collect();
        let turn = (1..n).find(|&i| ys[i + 1] > ys[i]).unwrap();
        let best = (turn..=n).max_by(|&a, &b| ys[a].total_cmp(&ys[b])).unwrap();
        xs[best]
    }

    #[test]
    fn blp_examples() {
        assert_eq!(blp_measure(&synthetic(vec![1.0, 0.8, 0.5, 0.1])), 0.0);
        let nd = blp_measure(&synthetic(vec![1.0, 0.2, 0.6, 0.1, 0.3]));
        assert!((nd - 0.6).abs() < 1e-15);
    }

    #[test]
    fn blp_ignores_decreasing_tail() {
        let base = vec![1.0, 0.2, 0.6, 0.1, 0.3];
        let mut tail = base.clone();
        tail.extend([0.25, 0.2, 0.05]);
        assert_eq!(blp_measure(&synthetic(base)), blp_measure(&synthetic(tail)));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(0.0, DEFAULT_ND_THRESHOLD), Classification::Markovian);
        assert_eq!(classify(0.46, DEFAULT_ND_THRESHOLD), Classification::NonMarkovian);
        assert_eq!(classify(0.09, DEFAULT_ND_THRESHOLD), Classification::NonMarkovian);
        assert_eq!(classify(1e-3, DEFAULT_ND_THRESHOLD), Classification::Markovian);
    }

    #[test]
    fn gaussian_trajectory_is_monotone() {
        let p = EnvParams::gaussian(W0, 27.7).unwrap();
        let t = trajectory(EnvSource::Params(p), 4.0 * W0, 2000).unwrap();
        assert!(matches!(t.source(), TrajectorySource::Quadrature(_)));
        assert!((t.d()[0] - 1.0).abs() < 1e-12);
        for (dc, d) in t.points() {
            assert!((d - (-2.0 * dc * dc / (W0 * W0)).exp()).abs() < 1e-6);
        }
        assert_eq!(blp_measure(&t), 0.0);
        assert_eq!(dc_max(&t), None);
        let r = report(&t, DEFAULT_ND_THRESHOLD);
        assert_eq!(r.classification, Classification::Markovian);
        assert_eq!(r.dc_max, None);
    }

    #[test]
    fn trajectory_rejects_bad_grids() {
        let p = EnvParams::new(W0, 27.7, 2.14, 0.0).unwrap();
        assert!(trajectory(EnvSource::Params(p), 5.0, 199).is_err());
        assert!(trajectory(EnvSource::Params(p), 0.0, 500).is_err());
        assert!(nd_sweep(W0, 27.7, &[1.0, 0.5]).is_err());
        assert!(nd_sweep(W0, 27.7, &[0.0, 0.5]).is_err());
    }

    #[test]
    fn structured_trajectory_revives_near_dv() {
        let p = EnvParams::new(W0, 27.711, 2.14, 0.0).unwrap();
        let t = trajectory(EnvSource::Params(p), default_range(&p), 2000).unwrap();
        assert!((t.d()[0] - 1.0).abs() < 1e-12);
        let r = report(&t, DEFAULT_ND_THRESHOLD);
        assert_eq!(r.classification, Classification::NonMarkovian);
        let peak = r.dc_max.unwrap();
        let oracle = dense_argmax(&p, default_range(&p));
        assert!((peak - oracle).abs() < 0.05 * oracle, "{peak} vs {oracle}");
        assert!((peak - p.dv).abs() < 0.2 * p.dv);
    }

    #[test]
    fn dc_max_certificate_and_asymptote() {
        let p = EnvParams::new(W0, 27.7, 5.0 * W0, 0.0).unwrap();
        let t = trajectory(EnvSource::Params(p), default_range(&p), 2000).unwrap();
        let peak = dc_max(&t).unwrap();
        assert!((peak / p.dv - 1.0).abs() < 0.01);
        let oracle = dense_argmax(&p, default_range(&p));
        assert!((peak - oracle).abs() < 1e-3);
        let h = t.dc()[1];
        let i = (peak / h).round() as usize;
        assert!(t.d()[i] > t.d()[i - 1] && t.d()[i] > t.d()[i + 1]);
    }

    #[test]
    fn dc_max_ignores_flat_ripples() {
        let mut d = vec![1.0, 0.5, 0.1, 0.0];
        d.extend([1e-8, 0.0, 2e-8, 0.0, 0.0]);
        assert_eq!(dc_max(&synthetic(d)), None);
    }

    #[test]
    fn grid_doubling_converges() {
        for dv in [0.68, 1.34, 1.84, 2.14] {
            let p = EnvParams::new(W0, 27.711, dv, 0.0).unwrap();
            let r = default_range(&p);
            let a = blp_measure(&trajectory(EnvSource::Params(p), r, 2000).unwrap());
            let b = blp_measure(&trajectory(EnvSource::Params(p), r, 4000).unwrap());
            assert!((a - b).abs() < 1e-4, "dv={dv}: {a} vs {b}");
        }
    }

    #[test]
    fn spectrum_and_closed_form_paths_agree() {
        let p = EnvParams::new(W0, 27.711, 1.84, 0.4).unwrap();
        let s = build_structured(&p).unwrap();
        let r = default_range(&p);
        let a = trajectory(EnvSource::Params(p), r, 1000).unwrap();
        let b = trajectory(EnvSource::Spectrum(&s), r, 1000).unwrap();
        for (x, y) in a.d().iter().zip(b.d()) {
            assert!((x - y).abs() < 1e-6);
        }
        assert!((blp_measure(&a) - blp_measure(&b)).abs() < 1e-5);
    }

    #[test]
    fn degenerate_params_fall_back_to_quadrature() {
        let p = EnvParams::new(W0, 0.0, 1e-4, 0.0).unwrap();
        let t = trajectory(EnvSource::Params(p), 3.0, 400).unwrap();
        assert!(matches!(t.source(), TrajectorySource::Quadrature(_)));
        assert!((t.d()[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn state_path_matches_kappa_path() {
        let p = EnvParams::new(W0, 27.711, 1.34, 0.9).unwrap();
        let r = default_range(&p);
        let a = trajectory(EnvSource::Params(p), r, 2000).unwrap();
        let b = trajectory_from_states(EnvSource::Params(p), r, 2000).unwrap();
        assert!((blp_measure(&a) - blp_measure(&b)).abs() < 1e-9);
    }

    #[test]
    fn sweep_absences_match_markovian_points() {
        let dvs: Vec<f64> = (0..60).map(|i| 0.2 + 0.02 * i as f64).collect();
        let nd = nd_sweep(W0, 27.711, &dvs).unwrap();
        let peaks = dcmax_sweep(W0, 27.711, &dvs).unwrap();
        for ((dv, n), (_, m)) in nd.iter().zip(&peaks) {
            let n = *n.as_ref().unwrap();
            let m = *m.as_ref().unwrap();
            assert_eq!(n <= DEFAULT_ND_THRESHOLD, m.is_none(), "dv={dv}");
        }
    }
}
