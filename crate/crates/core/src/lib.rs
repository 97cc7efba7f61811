//! Qubit dephasing driven by interference-structured continuous
//! environments.
//!
//! The polarization of a light beam is the qubit and its transverse
//! momentum distribution is the environment. A polarization-dependent
//! displacement `dc` couples the two, so `dc` plays the role of time and
//! the reduced qubit state dephases by the decoherence function
//! `kappa(dc)`. Shaping the environment through two-beam interference
//! (separation `dv`) switches the dynamics between monotone decay and
//! information revivals.

pub mod calibration;
pub mod cli;
pub mod dephasing;
pub mod environment;
pub mod error;
pub mod nonmarkov;
pub mod optimize;
pub mod qstate;

pub use calibration::{fit_q0y, fit_spectrum, CalibrationResult, SpectrumFit};
pub use dephasing::{evolve_state, kappa_closed_form, kappa_quadrature, Kappa};
pub use environment::{build_gaussian, build_structured, ingest_tabulated, EnvParams, EnvironmentSpectrum};
pub use error::{Error, Result};
pub use nonmarkov::{
    blp_measure, classify, dc_max, dcmax_sweep, nd_sweep, report, trajectory, Classification,
    DynamicsReport, EnvSource, Trajectory,
};
pub use qstate::{optimal_pair, prepare_state, trace_distance, QubitState, WaveplateSetting};
