use thiserror::Error;

use crate::expr::ExprError;
use crate::solver::SolveReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} outside the domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("derivative order {order} exceeds the polynomial degree {degree}")]
    OrderTooHigh { order: usize, degree: usize },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("block {block} out of range 1..={max}")]
    BlockOutOfRange { block: usize, max: usize },
    #[error("no valid stencil placement at t = {t}")]
    StencilCrossesBreakpoint { t: f64 },
    #[error("grid has {got} samples, need at least {needed}")]
    DegenerateGrid { needed: usize, got: usize },
    #[error("empty grid")]
    EmptyGrid,
    #[error("problem has no isoperimetric constraints")]
    NoConstraints,
    #[error("index j = {j} outside 1..={m}")]
    JOutOfRange { j: usize, m: usize },
    #[error("index i = {i} outside 0..={m}")]
    IOutOfRange { i: usize, m: usize },
    #[error("operation requires m = {expected}, problem has m = {got}")]
    WrongOrder { expected: usize, got: usize },
    #[error("transformed time {t} leaves the evaluable domain")]
    TransformEscapesDomain { t: f64 },
    #[error("time expansion of order {order} exceeds the supported {max}")]
    ExpansionTooDeep { order: usize, max: usize },
    #[error("Newton iteration did not converge (residual {:.3e} after {} iterations)", .0.final_residual, .0.iterations)]
    NonConvergence(Box<SolveReport>),
    #[error("Jacobian is singular (condition estimate {cond:.3e})")]
    SingularJacobian { cond: f64 },
    #[error("no registered example named {0:?}")]
    UnknownExample(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
