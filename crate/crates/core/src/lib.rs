//! Joint user association and beamforming design for vertical heterogeneous
//! networks (one HAPS plus terrestrial macro base stations).
//!
//! The crate is organised bottom-up:
//!
//! * [`scenario`] draws geometry and channel realizations,
//! * [`metrics`] evaluates SINR / spectral efficiency of a candidate design,
//! * [`conic`] is a small mixed-integer conic IR with the reformulation
//!   builders and a pluggable continuous solver,
//! * [`mip`] handles the binary association variables,
//! * [`jubd`] builds the per-objective subproblems and runs the successive
//!   convex approximation loop,
//! * [`harness`] drives Monte-Carlo experiments and writes CSV output.

pub mod conic;
pub mod error;
pub mod harness;
pub mod jubd;
pub mod metrics;
pub mod mip;
pub mod scenario;

pub use error::{Error, Result};
