use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// `iωE − A` could not be factorized: `iω` is (numerically) a pole.
    #[error("singular frequency shift at omega = {omega}")]
    SingularShift { omega: f64 },

    #[error("ill-posed interconnection at omega = {omega}: loop matrix is singular")]
    IllPosedInterconnection { omega: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parameter {index} = {value} lies outside the domain [{lower}, {upper}]")]
    OutsideDomain {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("system of order {n} exceeds the dense oracle limit {cap}")]
    SizeLimit { n: usize, cap: usize },

    #[error("system is not asymptotically stable (spectral abscissa {abscissa:e})")]
    Unstable { abscissa: f64 },

    #[error("{0} did not converge")]
    NotConverged(String),

    #[error("matrix market: {0}")]
    MatrixMarket(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
