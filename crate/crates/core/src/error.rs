// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by simulation, design, estimation and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid parameter box: {0}")]
    InvalidBox(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative duration {0}")]
    NegativeDuration(f64),

    #[error("state outside the Bloch ball: z = {0}")]
    OutsideBall(f64),

    #[error("branch k = {k} infeasible: omega*t3 spans [{lo}, {hi}], not inside ({k}pi, {k}+1 pi)")]
    InfeasibleBranch { k: u32, lo: f64, hi: f64 },

    #[error("degenerate observable p2 = {0} (too close to 0, 1/2 or 1)")]
    DegenerateObservable(f64),

    #[error("inversion domain error: {0}")]
    Domain(String),

    #[error("singular covariance (condition number {0:e})")]
    SingularCovariance(f64),

    #[error("singular forward Jacobian at theta = {0:?}")]
    SingularJacobian([f64; 4]),

    #[error("no candidate survived the tolerance filter (per-round best mismatch: {0:?})")]
    NoSurvivor(Vec<f64>),

    #[error("measurement source: {0}")]
    Source(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::DegenerateObservable(_)
            | Error::SingularCovariance(_)
            | Error::SingularJacobian(_)
            | Error::OutsideBall(_) => 3,
            Error::NoSurvivor(_) => 5,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
