//! Desk-scale simulation of high-dimensional path-encoded entanglement
//! distribution between two photonic chips.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`] and [`state`]: dense complex matrices, a Jacobi Hermitian
//!   eigensolver, pure/mixed states and their metrics.
//! - [`source`]: entangled-state preparation, pair-rate model and reversed
//!   Hong-Ou-Mandel fringes.
//! - [`channel`]: the phase-drifting, lossy multimode link.
//! - [`fringe`] and [`stabiliser`]: four-point fringe fitting and the
//!   two-round multimode phase-stabilisation loop.
//! - [`bases`]: mutually unbiased bases and generalised Pauli operators.
//! - [`tomography`]: simulated coincidence counts, linear reconstruction,
//!   physical estimation, metrics and Monte-Carlo error bars.

pub mod bases;
pub mod channel;
pub mod error;
pub mod fringe;
pub mod io;
pub mod linalg;
pub mod seed;
pub mod source;
pub mod stabiliser;
pub mod state;
pub mod tomography;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
pub use state::{BipartiteState, DensityMatrix, Physicality, PureState};
