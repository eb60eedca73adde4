//! Error type shared by all engine modules.

/// Errors produced by the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operands have incompatible sizes (qubit counts, matrix shapes, ...).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A desk-scale resource guard was hit (too many qubits for a dense op).
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// An input failed a numerical validity check (unitarity, normalisation,
    /// positivity, orthonormality).
    #[error("validation failed: {0}")]
    Validation(String),

    /// Text input could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// The operation is not defined for this input (non-Clifford gate where a
    /// tableau is required, gate without support on the agreed basis, ...).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An internal invariant that should hold by construction was violated.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
