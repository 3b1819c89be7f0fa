use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Invalid parameters or inconsistent inputs.
    #[error("configuration error: {0}")]
    Config(String),

    /// A derivative was requested at an endpoint where it is unbounded.
    #[error("derivative is unbounded at the endpoint p = {p}")]
    EndpointSingularity { p: f64 },

    #[error("degenerate envelope: {0}")]
    DegenerateEnvelope(String),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("quadrature did not converge: estimate {estimate}, error bound {error}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("closed form requires CARA agents only")]
    UnsupportedFastPath,

    #[error("sensitivity is singular at effort {effort}, level {level}")]
    SingularSensitivity { effort: f64, level: f64 },
}

impl Error {
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
