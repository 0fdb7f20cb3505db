use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A slice function was evaluated on `(-inf, 0]`.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    /// Solver failure at a specific quadrature node.
    #[error("quadrature node {index} (t = {t}): {source}")]
    NodeFailed {
        index: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("coefficient conditions for the resolvent estimate are not satisfied")]
    ConditionsFailed,

    #[error("closed form is only available for constant coefficients")]
    RejectVariableCoefficients,

    #[error("time step {dt} exceeds the explicit stability bound {bound}")]
    Stability { dt: f64, bound: f64 },

    #[error("generator is not dissipative: spectral abscissa {abscissa:e}")]
    NotDissipative { abscissa: f64 },

    #[error("vector channel leaks along the imaginary unit: {leak:e} exceeds {tolerance:e}")]
    JLeak { leak: f64, tolerance: f64 },

    #[error("problem size {size} exceeds the dense cap {cap}")]
    TooLarge { size: usize, cap: usize },
}
