use thiserror::Error;

use crate::simulator::SimulationTrace;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid physical parameter or argument.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent configuration between components.
    #[error("configuration error: {0}")]
    Config(String),
    /// Synthesis failed (infeasible LMIs, non-stabilizable plant, solver breakdown).
    #[error("synthesis error: {0}")]
    Synthesis(String),
    /// An iteration did not converge within its budget.
    #[error("convergence error: {message} (residual {residual:.3e})")]
    Convergence { message: String, residual: f64 },
    /// Gain interpolation failed (singular interpolated Lyapunov matrix).
    #[error("interpolation error: {0}")]
    Interpolation(String),
    /// Simulation aborted; the partial trace is preserved.
    #[error("simulation error: {message}")]
    Simulation {
        message: String,
        trace: Box<SimulationTrace>,
    },
    #[error("sdp backend: {0}")]
    Sdp(#[from] lpvsteer_sdp::SdpError),
}

pub type Result<T> = std::result::Result<T, Error>;
