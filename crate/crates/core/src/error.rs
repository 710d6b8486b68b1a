//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameter sets rejected before any computation runs. `codes` carries
    /// the machine-readable violation identifiers from the validation report.
    #[error("invalid parameters: {message}")]
    InvalidParams { message: String, codes: Vec<&'static str> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A kernel is too narrow for the grid: fewer than the required nodes per
    /// kernel standard deviation. `required_m` restores the resolution.
    #[error("grid under-resolves a kernel of width {sigma:.6e} (h = {h:.6e}); need M >= {required_m}")]
    UnderResolved { sigma: f64, h: f64, required_m: usize },

    /// An inverse transform of a real-symbol operation produced a spectrum
    /// whose imaginary residue exceeds the documented bound.
    #[error("spectral operation lost realness: imaginary residue {residue:.3e} (relative)")]
    ComplexResidue { residue: f64 },

    #[error("non-finite values in {context}")]
    NonFinite { context: String },

    #[error("adaptive quadrature failed to converge on [{a:.3e}, {b:.3e}] (best error {err:.3e})")]
    Quadrature { a: f64, b: f64, err: f64 },

    #[error("solver blow-up detected at t = {t:.6} ({what})")]
    Blowup { t: f64, what: String },

    #[error("trajectories are not aligned: {0}")]
    Misaligned(String),

    #[error("{what} is not implemented for dimension {d}")]
    UnsupportedDimension { d: usize, what: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_params(message: impl Into<String>, codes: Vec<&'static str>) -> Self {
        Error::InvalidParams { message: message.into(), codes }
    }

    /// True when the error is a refusal to start (bad parameters or config),
    /// as opposed to a failure of a running computation. The CLI maps the two
    /// classes to distinct exit codes.
    pub fn is_refusal(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams { .. } | Error::InvalidArgument(_) | Error::Config(_)
        )
    }
}
