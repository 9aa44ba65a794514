use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Domain specification rejected at validation time (bad radii, crossing
    /// or misoriented loops, holes outside the outer loop, unsupported
    /// dimension for the requested operation).
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    /// Parameter outside an operation's documented range (p < 1, q outside
    /// (1, 32], nonpositive mesh size, malformed solver configuration).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh generation failed: {0}")]
    MeshGeneration(String),

    /// A field was paired with a mesh it does not belong to.
    #[error("mesh/field mismatch: {0}")]
    FieldMismatch(String),

    /// The conjugate gradient loop hit its iteration cap before reaching the
    /// requested residual.
    #[error("linear solver did not converge: {0}")]
    SolverDiverged(String),

    /// The outer nonlinear iteration (Picard/IRLS) hit its cap.
    #[error("iteration did not converge: {0}")]
    IterationFailed(String),

    /// The operation needs geometry information the mesh does not carry.
    #[error("mesh has no backing domain description: {0}")]
    MissingDomain(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
