use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: estimated error {achieved:e} exceeds tolerance {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("no sign change of the fibering derivative found up to t = {t_max:e}")]
    BracketNotFound { t_max: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("grid cannot resolve eps = {eps:e}: need eps >= {min_eps:e}")]
    Unresolved { eps: f64, min_eps: f64 },

    #[error("assumption check failed: {0}")]
    Assumption(String),

    #[error("Palais-Smale bound violated at iteration {iteration}: |v|_E = {norm:e} > cap {cap:e}")]
    PsBound { iteration: usize, norm: f64, cap: f64 },

    #[error("field is not on the Nehari manifold: relative residual {0:e}")]
    NotOnManifold(f64),
}
