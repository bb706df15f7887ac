use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("t = {t} lies outside the profile domain [{start}, {end}]")]
    Domain { t: f64, start: f64, end: f64 },

    #[error("x = {x} lies outside the half line x > 0")]
    HalfLine { x: f64 },

    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    #[error("invalid index: {0}")]
    InvalidIndex(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("degenerate classical basis: |Omega| = {omega:e}")]
    DegenerateBasis { omega: f64 },

    #[error("ill-conditioned classical basis: relative Omega drift {drift:e}")]
    IllConditionedBasis { drift: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("Wronskian vanishes near x = {x} at t = {t}")]
    ZeroCrossing { t: f64, x: f64 },

    #[error("non-Hermitizable auxiliary set: Hermiticity RHS varies by {spread:e} across x")]
    NonHermitizable { spread: f64 },

    #[error("derivative order {requested} unavailable (max {available})")]
    Capability { requested: usize, available: usize },

    #[error("state norm {norm:e} too small")]
    DegenerateState { norm: f64 },

    #[error("probability leaked to the grid boundary (edge density {edge:e} of peak) at t = {t}")]
    BoundaryLeak { t: f64, edge: f64 },

    #[error("potential correction is flat at t = {t} (range {range:e})")]
    FlatPotential { t: f64, range: f64 },

    #[error("non-finite value at t = {t}, x = {x}")]
    NonFinite { t: f64, x: f64 },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("configuration error: {0}")]
    Config(String),
}
