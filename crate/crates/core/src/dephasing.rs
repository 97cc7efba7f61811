//! The decoherence function `kappa(dc)` and the dephasing channel it drives.
//!
//! Two independent engines are provided:
//!
//! * [`kappa_quadrature`]: complex trapezoidal integration of
//!   `∫ |f(q)|^2 exp(i (2 q dc + phi)) dq` over any sampled spectrum;
//! * [`kappa_closed_form`]: the analytic magnitude `|kappa(dc)|` for the
//!   interference-structured Gaussian environment.
//!
//! The displacement `dc` plays the role of time.

use std::borrow::Cow;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::environment::{EnvParams, EnvironmentSpectrum};
use crate::error::{Error, Result};
use crate::qstate::QubitState;

/// Below this the closed-form denominator is treated as degenerate.
pub const DENOMINATOR_FLOOR: f64 = 1e-6;
/// Quadrature needs `dq <= pi / (OSCILLATION_SAMPLES |dc|)`.
pub const OSCILLATION_SAMPLES: f64 = 10.0;
/// Hyperbolic arguments above this are handled in log space
/// (`cosh(x)^2` overflows near `x = 355`).
const LOG_SPACE_ARGUMENT: f64 = 300.0;
const RADICAND_CLAMP: f64 = 1e-12;
const KAPPA_TOL: f64 = 1e-9;

/// Decoherence factor at one displacement `dc` (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub value: Complex64,
    pub dc: f64,
}

impl Kappa {
    pub fn new(value: Complex64, dc: f64) -> Self {
        Self { value, dc }
    }

    /// Real, non-negative factor, as produced by the closed form.
    pub fn from_magnitude(magnitude: f64, dc: f64) -> Self {
        Self { value: Complex64::new(magnitude, 0.0), dc }
    }

    pub fn magnitude(&self) -> f64 {
        self.value.norm()
    }
}

fn refinement_factor(spacing: f64, dc: f64) -> usize {
    if dc == 0.0 {
        return 1;
    }
    let allowed = PI / (OSCILLATION_SAMPLES * dc.abs());
    if spacing <= allowed {
        1
    } else {
        (spacing / allowed).ceil() as usize
    }
}

/// Returns `env` on a grid fine enough for every `|dc| <= max_dc`.
pub(crate) fn resolve_for(env: &EnvironmentSpectrum, max_dc: f64) -> Result<Cow<'_, EnvironmentSpectrum>> {
    match refinement_factor(env.spacing(), max_dc) {
        1 => Ok(Cow::Borrowed(env)),
        f => Ok(Cow::Owned(env.refined(f)?)),
    }
}

/// Trapezoidal sum on a spectrum already known to resolve `dc`.
///
/// Phases are taken relative to the grid center, with offsets built from
/// the sample index, so that a spectrum far from `q = 0` does not lose the
/// small tail values of `|kappa|` to rounding of large arguments.
pub(crate) fn quadrature_sum(env: &EnvironmentSpectrum, dc: f64, phi: f64) -> Complex64 {
    let q = env.q_grid();
    let d = env.density();
    let n = q.len();
    let h = env.spacing();
    let mid = 0.5 * (n - 1) as f64;
    let center = 0.5 * (q[0] + q[n - 1]);
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let (s, c) = (2.0 * (i as f64 - mid) * h * dc).sin_cos();
        acc += Complex64::new(c, s) * (w * d[i]);
    }
    acc * h * Complex64::from_polar(1.0, 2.0 * center * dc + phi)
}

/// `kappa(dc)` by trapezoidal quadrature. The grid is refined when it does
/// not resolve the integrand's oscillation.
pub fn kappa_quadrature(env: &EnvironmentSpectrum, dc: f64, phi: f64) -> Result<Kappa> {
    if !dc.is_finite() || !phi.is_finite() {
        return Err(Error::InvalidParams(format!("non-finite dc = {dc} or phi = {phi}")));
    }
    let env = resolve_for(env, dc)?;
    Ok(Kappa::new(quadrature_sum(&env, dc, phi), dc))
}

/// `1 - exp(-2 dv^2 / w0^2) cos(2 dv q0y)`, the normalization of the
/// structured spectrum relative to its Gaussian envelope.
pub fn closed_form_denominator(params: &EnvParams) -> f64 {
    let a = (-2.0 * params.dv * params.dv / (params.w0 * params.w0)).exp();
    1.0 - a * (2.0 * params.dv * params.q0y).cos()
}

/// Closed-form `|kappa(dc)|` for the structured Gaussian environment:
///
/// ```text
///            exp(-2 dc^2/w0^2)
/// |kappa| = ------------------- sqrt( a^2 [c^2 + cosh^2(x) - 1] - 2 a c cosh(x) + 1 )
///               1 - a c
/// ```
///
/// with `a = exp(-2 dv^2/w0^2)`, `c = cos(2 dv q0y)` and `x = 4 dc dv/w0^2`.
pub fn kappa_closed_form(params: &EnvParams, dc: f64) -> Result<f64> {
    params.validate()?;
    if !dc.is_finite() {
        return Err(Error::InvalidParams(format!("non-finite dc = {dc}")));
    }
    let w2 = params.w0 * params.w0;
    let a = (-2.0 * params.dv * params.dv / w2).exp();
    let c = (2.0 * params.dv * params.q0y).cos();
    let den = 1.0 - a * c;
    if den.abs() <= DENOMINATOR_FLOOR {
        return Err(Error::DegenerateDenominator { denominator: den, dv: params.dv, q0y: params.q0y });
    }
    let x = 4.0 * dc.abs() * params.dv / w2;
    let envelope = -2.0 * dc * dc / w2;

    let magnitude = if x <= LOG_SPACE_ARGUMENT {
        let radicand = printed_radicand(a, c, x);
        if radicand < -RADICAND_CLAMP {
            return Err(Error::Internal(format!(
                "negative radicand {radicand:e} in closed-form kappa (dc = {dc}, {params:?})"
            )));
        }
        envelope.exp() / den * radicand.max(0.0).sqrt()
    } else {
        log_space_magnitude(-2.0 * params.dv * params.dv / w2, c, x, envelope, den)
    };
    Ok(magnitude.clamp(0.0, 1.0))
}

fn printed_radicand(a: f64, c: f64, x: f64) -> f64 {
    let ch = x.cosh();
    a * a * (c * c + ch * ch - 1.0) - 2.0 * a * c * ch + 1.0
}

/// Same magnitude for large `x`. With `u = a cosh(x)` the radicand equals
/// `(u - c)^2 + (1 - c^2)(1 - a^2)`; `u` is carried as a logarithm and
/// factored out when large.
fn log_space_magnitude(ln_a: f64, c: f64, x: f64, envelope: f64, den: f64) -> f64 {
    let ln_cosh = x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2;
    let ln_u = ln_a + ln_cosh;
    let a = ln_a.exp();
    let rest = (1.0 - c * c) * (1.0 - a * a);
    if ln_u > 0.0 {
        let inv_u = (-ln_u).exp();
        let scaled = (1.0 - c * inv_u).powi(2) + rest * inv_u * inv_u;
        (envelope + ln_u + 0.5 * scaled.ln()).exp() / den
    } else {
        let u = ln_u.exp();
        envelope.exp() / den * ((u - c).powi(2) + rest).sqrt()
    }
}

/// Applies the dephasing channel: populations are kept and the `<V|rho|H>`
/// coherence is multiplied by `kappa`.
pub fn evolve_state(rho: &QubitState, kappa: &Kappa) -> Result<QubitState> {
    let mag = kappa.magnitude();
    if !mag.is_finite() || mag > 1.0 + KAPPA_TOL {
        return Err(Error::UnphysicalKappa(mag));
    }
    let value = if mag > 1.0 { kappa.value / mag } else { kappa.value };
    rho.with_coherence(rho.coh() * value)
}
