use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Inclusion shape or mesh resolution is not admissible.
    #[error("geometry error: {0}")]
    Geometry(String),
    /// Inconsistent or unsupported configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// A linear or eigen solver failed.
    #[error("solver failure: {0}")]
    Solver(String),
    /// A tensor violates the coercivity requirement.
    #[error("coercivity violated: {0}")]
    Coercivity(String),
    /// Evaluation point too close to a pole.
    #[error("lambda = {lambda} lies within {guard} of the pole {pole}")]
    PoleProximity { lambda: f64, pole: f64, guard: f64 },
    /// A shifted system is singular because the shift is an eigenvalue.
    #[error("lambda = {0} lies on the discrete spectrum")]
    OnSpectrum(f64),
    /// Problem size exceeds the configured budget.
    #[error("problem has {dofs} unknowns, budget is {budget}")]
    Budget { dofs: usize, budget: usize },
}

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
