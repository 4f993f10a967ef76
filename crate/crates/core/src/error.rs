use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain too small: {0}")]
    DomainTooSmall(String),
    #[error("polygon is not convex")]
    NotConvex,
    #[error("cell {0} is not in the domain")]
    CellNotInDomain(String),
    #[error("form degree {0} out of range for this operation")]
    DegreeOutOfRange(u8),
    #[error("form degrees differ: {0} vs {1}")]
    DegreeMismatch(u8, u8),
    #[error("forms live on different complexes or sides")]
    DomainMismatch,
    #[error("complex is disconnected")]
    Disconnected,
    #[error("linear solve failed: {0}")]
    SolverFailure(String),
    #[error("source supported on an exterior cell")]
    SupportOnBoundary,
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("equilibrium strain reaches {0} >= 1/2; increase n or epsilon")]
    BarrierConditionViolated(f64),
    #[error("configuration is not admissible: {0}")]
    NotAdmissible(String),
    #[error("degenerate denominator {0:e} in transition interpolant")]
    DegenerateDenominator(f64),
    #[error("transition state violates necessary condition: {0}")]
    NecessaryConditionsFailed(String),
    #[error("closed-form barrier {closed} disagrees with direct energy {direct}")]
    CrossCheckFailed { closed: f64, direct: f64 },
    #[error("force extrapolation unstable: successive estimates {0:?} and {1:?}")]
    ExtrapolationUnstable([f64; 2], [f64; 2]),
    #[error("barrier unavailable for transition {0}")]
    BarrierUnavailable(String),
    #[error("macroscopic state is outside the admissible set: {0}")]
    InadmissibleState(String),
    #[error("Newton iteration did not converge ({0})")]
    NewtonDivergence(String),
    #[error("force mesh has no admissible data at {0:?}")]
    ForceMeshMiss(Vec<f64>),
    #[error("ODE step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
