//! Simulation toolkit for pulsed optomechanical position measurement.
//!
//! A short optical pulse reflected off an optomechanical cavity writes the
//! mechanical position quadrature onto the optical phase. Homodyne detection
//! of that phase realizes a back-action-evading position measurement with
//! strength `chi` and deterministic momentum kick `omega`. This crate covers
//! the full numerical experiment:
//!
//! - [`hilbert`]: truncated number-basis density matrices — the brute-force
//!   reference representation for arbitrary mechanical states.
//! - [`gaussian`]: closed-form Gaussian-state path (moments only), including
//!   conditional measurement updates, purification predictions and thermal
//!   bath relaxation.
//! - [`pulse`]: cavity input-output dynamics of the drive envelope, optimal
//!   pulse shaping, local-oscillator construction and the first-order
//!   corrections from mechanical evolution during the pulse.
//! - [`measurement`]: the pulsed measurement operator acting on number-basis
//!   states, outcome densities and outcome sampling.
//! - [`tomography`]: simulated homodyne data sets over quadrature angles,
//!   kernel calibration, deconvolution and filtered-backprojection state
//!   reconstruction.
//! - [`protocol`]: pulse sequences with free evolution and bath coupling —
//!   squeezing, two-pulse purification, read-out sessions and calibration.
//!
//! Quadrature convention: `X = (b + b†)/√2`, `P = i(b† − b)/√2`, ground-state
//! variance 1/2. Harmonic evolution by angle `theta` maps means as
//! `X → X cos θ − P sin θ`, `P → X sin θ + P cos θ`.

pub mod constants;
pub mod error;
pub mod gaussian;
pub mod grid;
pub mod hilbert;
pub mod linalg;
pub mod measurement;
pub mod numeric;
pub mod protocol;
pub mod pulse;
pub mod tomography;

pub use error::Error;
pub use grid::Grid;

/// Convenience result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
