use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("point is not on the switching manifold (|h| = {h:e})")]
    NotOnSigma { h: f64 },

    #[error("gradient of the switching function vanishes (|grad h| = {norm:e})")]
    DegenerateGradient { norm: f64 },

    #[error("point is not a sliding point (class {class})")]
    NotSliding { class: String },

    #[error("sliding denominator too small ({value:e})")]
    SmallDenominator { value: f64 },

    #[error("invalid transition function: {0}")]
    InvalidTransition(String),

    #[error("transition verification failed: {0}")]
    TransitionVerification(String),

    #[error("switching function is not a coordinate: {0}")]
    NotAligned(String),

    #[error("critical manifold sample is not normally hyperbolic (dbeta/dy = {derivative:e})")]
    NonHyperbolic { derivative: f64 },

    #[error("polar angle {theta} outside (1e-3, pi - 1e-3)")]
    ThetaOutOfRange { theta: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("maximum number of steps ({0}) exceeded")]
    MaxSteps(usize),

    #[error("maximum number of events ({0}) exceeded")]
    TooManyEvents(usize),

    #[error("initial point lies in the repelling sliding region; forward flow is not unique")]
    RepellingStart,

    #[error("initial point is a tangency point of the switching manifold")]
    TangencyStart,

    #[error("singular Jacobian (condition estimate {cond:e})")]
    SingularJacobian { cond: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("matrix dimension {0} not supported (n must be between 1 and 6)")]
    MatrixTooLarge(usize),

    #[error("empty point set")]
    EmptySet,

    #[error("no return to the section within t = {0}")]
    NoReturn(f64),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("system not in canonical form: {0}")]
    NotCanonical(String),

    #[error("degenerate lambda branch at lambda = {lambda} (dK/dlambda = {derivative:e})")]
    DegenerateBranch { lambda: f64, derivative: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{field}`: {message}")]
    Semantic { field: String, message: String },

    #[error("unknown example `{0}`")]
    UnknownExample(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
