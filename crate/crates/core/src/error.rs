use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// `g² ≤ (κ−Γ)²/16`: the vacuum-Rabi frequency is not real.
    #[error("overdamped regime: g² = {g_sq} ≤ (κ−Γ)²/16 = {threshold}")]
    Overdamped { g_sq: f64, threshold: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negative duration: {0} μs")]
    NegativeTime(f64),

    #[error("state is not normalized (squared norm {0})")]
    Unnormalized(f64),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    /// The purge window leaves too much two-photon amplitude behind.
    #[error("insufficient purge: exp(-κτ2/2) = {0} exceeds 0.1")]
    InsufficientPurge(f64),

    #[error("density matrix has zero trace")]
    ZeroTrace,

    #[error("density matrix is on the wrong subspace: expected {expected}")]
    WrongSubspace { expected: &'static str },

    #[error("conditioning event is unreachable: {0}")]
    Unreachable(String),

    #[error("classical correction requested for a discarded run")]
    NotSuccess,
}
