use thiserror::Error;

/// Errors raised across the simulator, the cipher and the analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("duplicate qubit index {0}")]
    DuplicateTarget(usize),

    #[error("{n} qubits exceeds the cap of {max}")]
    TooManyQubits { n: usize, max: usize },

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("state vector norm is {0}, expected 1")]
    NotNormalized(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("state is not pure")]
    NotPure,

    #[error("Bloch vector norm is {0}, expected 1")]
    NonUnitVector(f64),

    #[error("Bloch vector component is negative; the bound domain requires non-negative components")]
    NegativeComponent,

    #[error("projectors do not form a resolution of the identity: {0}")]
    InvalidProjectors(String),

    #[error("amplitudes are not normalized: |alpha|^2 + |beta|^2 = {0}")]
    AmplitudesNotNormalized(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("channel closed: {0}")]
    ChannelClosed(String),

    #[error("closed form {closed} disagrees with exact value {exact}")]
    Inconsistent { exact: f64, closed: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
