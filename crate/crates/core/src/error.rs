use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive definite (min eigenvalue {min:.3e}, threshold {threshold:.3e})")]
    NotPositiveDefinite { min: f64, threshold: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("functional is not faithful")]
    NotFaithful,
    #[error("densities do not commute (commutator norm {0:.3e})")]
    DoesNotCommute(f64),
    #[error("internal consistency check failed: {0}")]
    InconsistencyDetected(String),
    #[error("subalgebra is not central for the functional (violation {0:.3e}); no preserving expectation exists")]
    NotDCentral(f64),
    #[error("subalgebra is not invariant under the modular group")]
    NotModularInvariant,
    #[error("Gram matrix is singular: functional is not faithful on the subalgebra")]
    GramSingular,
    #[error("density does not commute with the subalgebra or the reference density (deviation {0:.3e})")]
    DensityDoesNotCommute(f64),
    #[error("density is not normalized: E_D(h) deviates from the unit by {0:.3e}")]
    NotNormalized(f64),
    #[error("subalgebra is not contained in the centralizer (violation {0:.3e})")]
    NotCentral(f64),
    #[error("functional is not an extension (deviation {0:.3e})")]
    NotAnExtension(f64),
    #[error("support projection is not central in the subalgebra (deviation {0:.3e})")]
    SupportNotCentral(f64),
    #[error("bad partition: {0}")]
    BadPartition(String),
    #[error("g is numerically singular (condition number {condition:.3e})")]
    GSingular { condition: f64 },
    #[error("projections do not form an orthogonal partition of the unit: {0}")]
    ProjectionsNotPartition(String),
    #[error("projection is not central in the subalgebra (deviation {0:.3e})")]
    NotCentralInD(f64),
    #[error("algebra is not abelian (deviation {0:.3e})")]
    NotAbelian(f64),
    #[error("A + A* spans dimension {span}, ambient algebra has dimension {ambient}")]
    NotDense { span: usize, ambient: usize },
    #[error("element is not invertible (smallest singular value {0:.3e})")]
    NotInvertible(f64),
    #[error("algebra carries no triangular structure")]
    NotTriangularType,
    #[error("matrix is not bounded below (min eigenvalue {0:.3e})")]
    NotBoundedBelow(f64),
    #[error("functional is not tracial (violation {0:.3e})")]
    NotTracial(f64),
    #[error("functional is not a state (trace {0:.6})")]
    NotAState(f64),
    #[error("invalid exponents: {0}")]
    InvalidExponents(String),
    #[error("invariant '{invariant}' violated: {detail}")]
    InvariantViolation { invariant: String, detail: String },
    #[error("iteration did not converge after {0} steps")]
    NotConverged(usize),
}

impl Error {
    pub(crate) fn invariant(invariant: &str, detail: impl Into<String>) -> Self {
        Error::InvariantViolation { invariant: invariant.to_string(), detail: detail.into() }
    }
}
