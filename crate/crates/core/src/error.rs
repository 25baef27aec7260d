use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid break configuration: {0}")]
    InvalidBreaks(String),
    #[error("jet order {requested} exceeds the supported order {supported}")]
    OrderTooHigh { requested: usize, supported: usize },
    #[error("x = {x} lies on a break; an explicit side is required")]
    AmbiguousSide { x: f64 },
    #[error("discontinuity at x = {at}: one-sided values differ by {jump:e}")]
    Discontinuous { at: f64, jump: f64 },
    #[error("derivative {derivative:e} at x = {x} is below the minimum {min:e}")]
    DerivativeTooSmall { x: f64, derivative: f64, min: f64 },
    #[error("lift does not have degree one: F(x + 2pi) - F(x) - 2pi = {defect:e}")]
    NotDegreeOne { defect: f64 },
    #[error("inverse did not converge at y = {y}")]
    InverseDiverged { y: f64 },
    #[error("quadrature exceeded depth {max_depth} on panel [{a}, {b}] (error estimate {estimate:e})")]
    QuadratureDepth { a: f64, b: f64, estimate: f64, max_depth: u32 },
    #[error("arrows are not composable: {0}")]
    NotComposable(String),
    #[error("field does not vanish at x = {at}: value {value:e}")]
    NotVanishing { at: f64, value: f64 },
    #[error("break counts differ: {0} vs {1}")]
    BreakCountMismatch(usize, usize),
    #[error("base map is singular at p = {p:?} (Jacobian determinant {det:e})")]
    SingularBaseMap { p: Vec<f64>, det: f64 },
    #[error("flow lost monotonicity at x = {x} (derivative {derivative:e})")]
    FlowNotMonotone { x: f64, derivative: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
