use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coupling site {site} outside the allowed range [{min}, {max}]")]
    InvalidSite { site: i64, min: i64, max: i64 },

    #[error("sublattice detuning is zero with nonzero A-B coupling; beta = lambda^2/Delta is undefined")]
    UndefinedBeta,

    #[error("the band is flat; wave vector and group velocity are undefined")]
    FlatBand,

    #[error("energy {omega} lies outside the band [{low}, {high}]")]
    OutOfBand { omega: f64, low: f64, high: f64 },

    #[error("energy {omega} sits on a band edge where the density of states diverges")]
    BandEdge { omega: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {dim}")]
    BadIndex { index: usize, dim: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("integrator failed: {0}")]
    Integrator(String),

    #[error("linear system is singular or ill-conditioned (condition number {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("quadrature did not converge: estimated error {estimate:e}")]
    Quadrature { estimate: f64 },

    #[error("wavepacket support violates lattice margins: {0}")]
    WavepacketMargin(String),
}
