//! Speed-scheduled robust preview steering synthesis.
//!
//! Builds linear-parameter-varying single-track/road preview models over a
//! three-vertex speed polytope, computes LQ (DARE) and H∞ (vertex-LMI)
//! static state-feedback gain schedules, and validates them in a
//! closed-loop path-tracking simulator.

pub mod error;
pub mod linalg;
pub mod lmi_synthesis;
pub mod lq_preview;
pub mod models;
pub mod scheduling;
pub mod simulator;
pub mod verification;

pub use error::{Error, Result};
