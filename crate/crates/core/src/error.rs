use thiserror::Error;

/// Errors raised by the simulator and detectors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value violates a model constraint.
    #[error("configuration error: {0}")]
    Config(String),

    /// The requested raw moment of a squared-gain model is infinite.
    #[error("moment of order {order} diverges (requires c_s * k_s = {ck} > {order})")]
    MomentDiverges { order: u32, ck: f64 },

    /// Pilot amplitudes were all zero, so reference values cannot normalize weights.
    #[error("degenerate training at node {node}: {what} is zero")]
    DegenerateTraining { node: usize, what: &'static str },

    /// Quadrature or another numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Reading or writing a file failed.
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
