use thiserror::Error;

/// Errors produced by the discretization, the Nehari machinery and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("grid functions live on different domains")]
    DomainMismatch,

    #[error("mode count {k} outside 1..={max}")]
    ModeOutOfRange { k: usize, max: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("scaling argument has nonpositive component {index}: {value}")]
    NonPositive { index: usize, value: f64 },

    /// Some `b_i` vanishes, so the scaling map has no zero in the open orthant.
    #[error("scaling map has no zero: b[{0}] = 0")]
    NoZero(usize),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("component {0} has zero Dirichlet norm")]
    ZeroComponent(usize),

    /// The positive part of component `i` vanishes (numerically), so the state
    /// lies outside the open set on which the Nehari projection is defined.
    #[error("positive part of component {0} vanishes; state is not projectable")]
    NotInU(usize),

    #[error("singular Jacobian")]
    SingularJacobian,

    #[error("linear solver failure: {0}")]
    LinearSolver(String),

    #[error("Newton diverged: residual {residual:e} did not decrease after repeated halvings")]
    Divergence { residual: f64 },

    #[error("bound guard tripped: |u| = {norm:e} exceeds {guard:e}")]
    BoundGuardTripped { norm: f64, guard: f64 },

    #[error("continuation stalled at t = {last_t} (step floor reached)")]
    StepFloorReached { last_t: f64 },

    #[error("synchronization criterion fails: {0}")]
    CriterionFails(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
