//! Polarization qubit states.
//!
//! Matrices are written in the `(V, H)` basis,
//!
//! ```text
//!     rho = | pop_v        coh   |
//!           | conj(coh)    pop_h |
//! ```
//!
//! so `coh = <V|rho|H>`. Wave-plate Jones matrices are handled internally in
//! the `(H, V)` basis, where a half-wave plate with its fast axis at `theta`
//! maps linear polarization at angle `alpha` (measured from H) to
//! `2 theta - alpha`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-12;
const POSITIVITY_REPAIR_TOL: f64 = 1e-9;

/// Density matrix of the polarization qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    pop_v: f64,
    pop_h: f64,
    coh: Complex64,
}

impl QubitState {
    pub fn new(pop_v: f64, pop_h: f64, coh: Complex64) -> Result<Self> {
        if !(pop_v.is_finite() && pop_h.is_finite() && coh.re.is_finite() && coh.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        if pop_v < 0.0 || pop_h < 0.0 {
            return Err(Error::InvalidState(format!(
                "negative population (pop_v = {pop_v}, pop_h = {pop_h})"
            )));
        }
        if (pop_v + pop_h - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace {} differs from 1",
                pop_v + pop_h
            )));
        }
        if coh.norm_sqr() > pop_v * pop_h + PSD_TOL {
            return Err(Error::InvalidState(format!(
                "|coh|^2 = {} exceeds pop_v * pop_h = {}",
                coh.norm_sqr(),
                pop_v * pop_h
            )));
        }
        Ok(Self { pop_v, pop_h, coh })
    }

    /// State with Bloch vector `(x, y, z)`, where `z = pop_v - pop_h` and
    /// `coh = (x - i y) / 2`.
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Result<Self> {
        let r2 = x * x + y * y + z * z;
        if !r2.is_finite() || r2 > 1.0 + 2.0 * PSD_TOL {
            return Err(Error::InvalidState(format!("Bloch vector length {} > 1", r2.sqrt())));
        }
        let pop_v = (0.5 * (1.0 + z)).max(0.0);
        Self::new(pop_v, 1.0 - pop_v, Complex64::new(0.5 * x, -0.5 * y))
    }

    pub fn maximally_mixed() -> Self {
        Self { pop_v: 0.5, pop_h: 0.5, coh: Complex64::new(0.0, 0.0) }
    }

    pub fn vertical() -> Self {
        Self { pop_v: 1.0, pop_h: 0.0, coh: Complex64::new(0.0, 0.0) }
    }

    pub fn horizontal() -> Self {
        Self { pop_v: 0.0, pop_h: 1.0, coh: Complex64::new(0.0, 0.0) }
    }

    /// `|Psi+><Psi+|` with `|Psi+> = (|V> + |H>) / sqrt 2`.
    pub fn psi_plus() -> Self {
        Self { pop_v: 0.5, pop_h: 0.5, coh: Complex64::new(0.5, 0.0) }
    }

    /// `|Psi-><Psi-|` with `|Psi-> = (|V> - |H>) / sqrt 2`.
    pub fn psi_minus() -> Self {
        Self { pop_v: 0.5, pop_h: 0.5, coh: Complex64::new(-0.5, 0.0) }
    }

    pub fn pop_v(&self) -> f64 {
        self.pop_v
    }

    pub fn pop_h(&self) -> f64 {
        self.pop_h
    }

    pub fn coh(&self) -> Complex64 {
        self.coh
    }

    pub fn bloch(&self) -> [f64; 3] {
        [2.0 * self.coh.re, -2.0 * self.coh.im, self.pop_v - self.pop_h]
    }

    pub fn purity(&self) -> f64 {
        self.pop_v * self.pop_v + self.pop_h * self.pop_h + 2.0 * self.coh.norm_sqr()
    }

    /// Dense matrix in the `(V, H)` basis.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        [
            [Complex64::new(self.pop_v, 0.0), self.coh],
            [self.coh.conj(), Complex64::new(self.pop_h, 0.0)],
        ]
    }

    pub(crate) fn with_coherence(&self, coh: Complex64) -> Result<Self> {
        Self::new(self.pop_v, self.pop_h, coh)
    }
}

/// Analyzer wave-plate angles in degrees. Angles are taken modulo 180.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveplateSetting {
    pub hwp_deg: f64,
    pub qwp_deg: f64,
}

impl WaveplateSetting {
    pub fn new(hwp_deg: f64, qwp_deg: f64) -> Self {
        Self { hwp_deg, qwp_deg }
    }

    /// Informationally complete analyzer set projecting onto H, V, +45 degrees
    /// and circular polarization.
    pub fn canonical() -> [WaveplateSetting; 4] {
        [
            WaveplateSetting::new(0.0, 0.0),
            WaveplateSetting::new(45.0, 0.0),
            WaveplateSetting::new(22.5, 0.0),
            WaveplateSetting::new(0.0, 45.0),
        ]
    }
}

/// Pure state produced by a half-wave plate at `hwp_deg` acting on vertically
/// polarized light.
pub fn prepare_state(hwp_deg: f64) -> QubitState {
    let beta = (2.0 * hwp_deg - 90.0).to_radians();
    let (s, c) = beta.sin_cos();
    QubitState { pop_v: s * s, pop_h: c * c, coh: Complex64::new(s * c, 0.0) }
}

/// Trace distance `1/2 Tr|a - b|`, using the closed-form eigenvalues of the
/// 2x2 Hermitian difference.
pub fn trace_distance(a: &QubitState, b: &QubitState) -> f64 {
    let d1 = a.pop_v - b.pop_v;
    let d2 = a.pop_h - b.pop_h;
    let c = a.coh - b.coh;
    let trace = d1 + d2;
    let spread = ((d1 - d2) * (d1 - d2) + 4.0 * c.norm_sqr()).sqrt();
    // eigenvalues are (trace +- spread) / 2; their absolute sum is max(|trace|, spread)
    (0.5 * trace.abs().max(spread)).min(1.0)
}

/// The antipodal pair `(|Psi+><Psi+|, |Psi-><Psi-|)` on the equator of the
/// Bloch sphere. Under dephasing its trace distance equals `|kappa|`.
pub fn optimal_pair() -> (QubitState, QubitState) {
    (QubitState::psi_plus(), QubitState::psi_minus())
}

type Jones = [[Complex64; 2]; 2];

fn mat_mul(a: &Jones, b: &Jones) -> Jones {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn half_wave(theta_deg: f64) -> Jones {
    let (s, c) = (2.0 * theta_deg.to_radians()).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(-c, 0.0)],
    ]
}

fn quarter_wave(theta_deg: f64) -> Jones {
    let (s, c) = theta_deg.to_radians().sin_cos();
    let i = Complex64::i();
    let off = (Complex64::new(1.0, 0.0) - i) * (s * c);
    [
        [c * c + i * (s * s), off],
        [off, s * s + i * (c * c)],
    ]
}

/// Probability of transmission through HWP, then QWP, then the H port of a
/// polarizing beam splitter.
pub fn tomography_intensity(rho: &QubitState, setting: &WaveplateSetting) -> f64 {
    let m = mat_mul(&quarter_wave(setting.qwp_deg), &half_wave(setting.hwp_deg));
    // rho in the (H, V) basis
    let r = [
        [Complex64::new(rho.pop_h, 0.0), rho.coh.conj()],
        [rho.coh, Complex64::new(rho.pop_v, 0.0)],
    ];
    let row = m[0];
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..2 {
        for k in 0..2 {
            acc += row[j] * r[j][k] * row[k].conj();
        }
    }
    acc.re.clamp(0.0, 1.0)
}

/// Affine response `a0 + a . r` of one analyzer setting to the Bloch vector.
fn setting_response(setting: &WaveplateSetting) -> (f64, [f64; 3]) {
    let a0 = tomography_intensity(&QubitState::maximally_mixed(), setting);
    let axes = [
        QubitState::from_bloch(1.0, 0.0, 0.0),
        QubitState::from_bloch(0.0, 1.0, 0.0),
        QubitState::from_bloch(0.0, 0.0, 1.0),
    ];
    let mut a = [0.0; 3];
    for (slot, axis) in a.iter_mut().zip(axes) {
        let axis = axis.expect("unit Bloch vectors are valid states");
        *slot = tomography_intensity(&axis, setting) - a0;
    }
    (a0, a)
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut aug = [[0.0; 4]; 3];
    for i in 0..3 {
        aug[i][..3].copy_from_slice(&m[i]);
        aug[i][3] = b[i];
    }
    let scale = (0..3).map(|i| m[i][i].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&p, &q| aug[p][col].abs().total_cmp(&aug[q][col].abs()))
            .unwrap();
        if aug[pivot][col].abs() <= 1e-10 * scale {
            return None;
        }
        aug.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let f = aug[row][col] / aug[col][col];
                for k in col..4 {
                    aug[row][k] -= f * aug[col][k];
                }
            }
        }
    }
    Some([aug[0][3] / aug[0][0], aug[1][3] / aug[1][1], aug[2][3] / aug[2][2]])
}

/// Linear-inversion tomography from analyzer readings.
///
/// The Bloch vector is the least-squares solution of the affine forward
/// model. A raw solution with a negative eigenvalue below `-1e-9` is
/// projected onto the nearest pure state.
pub fn tomography_reconstruct(readings: &[(WaveplateSetting, f64)]) -> Result<QubitState> {
    if readings.len() < 3 {
        return Err(Error::RankDeficient);
    }
    let mut normal = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (setting, intensity) in readings {
        if !intensity.is_finite() {
            return Err(Error::InvalidData(format!("non-finite intensity {intensity}")));
        }
        let (a0, a) = setting_response(setting);
        let target = intensity - a0;
        for i in 0..3 {
            rhs[i] += a[i] * target;
            for j in 0..3 {
                normal[i][j] += a[i] * a[j];
            }
        }
    }
    let r = solve3(normal, rhs).ok_or(Error::RankDeficient)?;
    let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let min_eig = 0.5 * (1.0 - len);
    let r = if min_eig < -POSITIVITY_REPAIR_TOL || len > 1.0 {
        // clip the negative eigenvalue and renormalize: the Bloch vector is
        // pushed onto the sphere
        [r[0] / len, r[1] / len, r[2] / len]
    } else {
        r
    };
    QubitState::from_bloch(r[0], r[1], r[2])
}
