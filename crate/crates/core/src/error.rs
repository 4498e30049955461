use thiserror::Error;

/// Errors raised by the geometric, variational and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("a loop needs at least {min} nodes, got {got}")]
    TooFewNodes { got: usize, min: usize },

    #[error("non-finite coordinate at node {0}")]
    NonFinite(usize),

    #[error("discrete speed {speed:e} at node {node} is below the regularity threshold {threshold:e}")]
    DegenerateSpeed {
        node: usize,
        speed: f64,
        threshold: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("adaptive quadrature missed tolerance {tol:e} within {budget} integrand calls")]
    QuadratureFailure { tol: f64, budget: usize },

    #[error("operation needs a {expected} field, got {actual}")]
    WrongKind {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("field configuration rejected: {0}")]
    FieldConfig(String),

    #[error("loop is numerically constant (length energy {length:e})")]
    NearConstantLoop { length: f64 },

    #[error("point lies within {band:e} of the curve (distance {distance:e})")]
    TooCloseToCurve { distance: f64, band: f64 },

    #[error("{cells} grid cell centres lie on the curve at the finest refinement")]
    IndexAmbiguity { cells: usize },

    #[error("the cell average of K vanishes; no rectangle endpoint has negative energy")]
    ZeroAverage,

    #[error("no disc with negative energy found: {0}")]
    NoBumpFound(String),

    #[error("no negative-energy endpoint found: {0}")]
    NoNegativeEndpoint(String),

    #[error("path endpoint energy {energy} is not negative")]
    EndpointViolation { energy: f64 },

    #[error("descent collapsed to a constant loop after {iterations} iterations (length {length:e})")]
    CollapseToConstant { length: f64, iterations: usize },

    #[error("winding {j} must share the sign of lambda*K0 = {lambda_k0}")]
    SignMismatch { j: i64, lambda_k0: f64 },

    #[error("energy increases without bound along the scaling ray (scale {scale:e})")]
    NoPeakAlongRay { scale: f64 },

    #[error("loop file: {0}")]
    LoopFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
