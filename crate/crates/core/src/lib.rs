//! Single-photon electromagnetically induced transparency in a one-dimensional
//! multimode cavity holding three atoms: a two-level source, a Λ-type scatterer
//! driven by a coupling field, and a two-level detector.
//!
//! Units throughout: `L/c = 1`, `ħ = 1`, so the mode spacing is `π` and a
//! decay rate equals the square of the coupling amplitude.
//!
//! * [`model`]: parameters, mode grid, coupling constants, state vector.
//! * [`analytic`]: closed-form amplitudes valid for `t < L/c`.
//! * [`oracle`]: direct integration of the Schrödinger equations.
//! * [`semiclassical`]: susceptibility, thin-slab transmission, FFT pulses.
//! * [`delays`]: centre-of-gravity arrival times and delays.
//! * [`cli`]: the `lambda-cavity` front end.

pub mod analytic;
pub mod cli;
pub mod delays;
pub mod error;
pub mod model;
pub mod oracle;
pub mod semiclassical;

pub use analytic::{CoefficientTable, Reading, Readings, Suspect};
pub use error::{Error, Result};
pub use model::{AmplitudeState, SystemParams, C64};
pub use oracle::{integrate, IntegratorConfig, Scheme, Trajectory};
