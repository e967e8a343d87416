use thiserror::Error;

pub type Result<T> = std::result::Result<T, FdmError>;

#[derive(Debug, Error)]
pub enum FdmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The kernel family requested does not match the value of beta.
    #[error("branch mismatch: {0}")]
    BranchMismatch(String),

    /// A distance matrix of the wrong kind was handed to a kernel.
    #[error("distance kind mismatch: {0}")]
    KindMismatch(String),

    /// The neighbour graph has more than one connected component.
    #[error(
        "neighbour graph is disconnected: {components} components (largest {largest}, second {second}){}",
        threshold_hint(*suggested_threshold)
    )]
    Disconnected {
        components: usize,
        largest: usize,
        second: usize,
        /// Largest edge of a Euclidean minimum spanning tree, when known. Any
        /// threshold strictly above it connects the graph.
        suggested_threshold: Option<f64>,
    },

    #[error("spectral failure: {0}")]
    SpectralFailure(String),

    /// Estimated eigenvectors in an eigenspace group are (numerically) linearly dependent.
    #[error("degenerate eigenspace: {0}")]
    DegenerateEigenspace(String),

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FdmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FdmError::InvalidArgument(msg.into())
    }
}

fn threshold_hint(t: Option<f64>) -> String {
    match t {
        Some(t) => format!("; a threshold above {t:.6e} connects it"),
        None => String::new(),
    }
}
