use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid qubit state: {0}")]
    InvalidState(String),

    #[error("invalid environment parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input data: {0}")]
    InvalidData(String),

    /// `1 - exp(-2 dv^2 / w0^2) cos(2 dv q0y)` is too close to zero for the
    /// closed-form decoherence function.
    #[error("degenerate closed-form denominator {denominator:e} (dv = {dv} mm, q0y = {q0y} mm^-1)")]
    DegenerateDenominator { denominator: f64, dv: f64, q0y: f64 },

    #[error("unphysical decoherence factor |kappa| = {0}")]
    UnphysicalKappa(f64),

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("tomography design matrix is rank deficient")]
    RankDeficient,

    #[error("fit did not converge: {0}")]
    NonConvergence(String),
}
