use thiserror::Error;

/// Errors surfaced by the simulation primitives.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A Fock-space truncation is too small for the requested state: the
    /// population of the top two retained levels exceeds the adequacy bound.
    #[error("truncation too small: {context} (top-level population {tail:.3e} exceeds {bound:.1e})")]
    TruncationTooSmall {
        context: String,
        tail: f64,
        bound: f64,
    },

    #[error("parameter `{name}` must be {requirement}, got {value}")]
    InvalidParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("grid too narrow: {0}")]
    GridTooNarrow(String),

    #[error("grid too short: {0}")]
    GridTooShort(String),

    /// A state failed one of the density-matrix invariants (trace,
    /// Hermiticity, positivity).
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("no position information: chi = 0 carries no mechanical signal")]
    NoPositionInformation,

    #[error("insufficient angles: need at least {needed}, got {got}")]
    InsufficientAngles { needed: usize, got: usize },

    #[error("no oscillation detected in marginal")]
    NoOscillation,

    /// First-order treatment of mechanical evolution during the pulse is
    /// only valid for omega_m/kappa well below one.
    #[error("perturbative regime violated: omega_m/kappa = {ratio:.3} exceeds {max:.3}")]
    PerturbativeRegime { ratio: f64, max: f64 },

    #[error("missing known mean: outcome compensation requires a recorded conditional mean")]
    MissingKnownMean,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
