use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WulffError {
    /// Input outside the domain of an operation (non-unit vector, zero vector, non-positive curvature, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative kernel failed or a computed quantity became degenerate.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The anisotropy fails the uniform convexity admission test.
    #[error("anisotropy not admissible: {0}")]
    Admissibility(String),

    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A flow state stopped being strictly convex.
    #[error("convexity lost at node {node}, t = {t}: smallest principal value {value}")]
    ConvexityLost { node: usize, t: f64, value: f64 },

    /// The CFL step collapsed below the underflow threshold.
    #[error("time step underflow at t = {t}: dt = {dt}")]
    Stiffness { t: f64, dt: f64 },
}

pub type Result<T> = std::result::Result<T, WulffError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(WulffError::Domain(msg.into()))
}

pub(crate) fn numerical<T>(msg: impl Into<String>) -> Result<T> {
    Err(WulffError::Numerical(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(WulffError::Config(msg.into()))
}
