use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { what: &'static str, iterations: usize, residual: f64 },
    #[error("quadrature budget of {budget} evaluations exhausted (error estimate {error:e})")]
    QuadratureBudget { budget: usize, error: f64 },
    #[error("pole at {location} is not a simple zero of the denominator (|D'| = {derivative:e})")]
    DegeneratePole { location: String, derivative: f64 },
    #[error("evaluation point {point} lies within {distance:e} of a pole")]
    PoleProximity { point: String, distance: f64 },
    #[error("perturbation size {size:e} exceeds the ceiling {ceiling:e}")]
    GuardViolated { size: f64, ceiling: f64 },
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),
    #[error("no hyperbolic splitting: {0}")]
    NotHyperbolic(String),
    #[error("trajectory left the separatrix neighbourhood at t = {time:e} (|H0| = {energy:e})")]
    Escaped { time: f64, energy: f64 },
    #[error("section not reached before t = {0:e}")]
    SectionNotReached(f64),
    #[error("singular design matrix: {0}")]
    SingularDesign(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
