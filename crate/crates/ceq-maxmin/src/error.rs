//! Error type shared by all modules.

/// Errors raised by the quantizer statistics, the coupling-matrix assembly,
/// the eigen solvers and the link simulator.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A configuration field violates its documented range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Matrix or vector dimensions do not match the declared system size.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// CEQ resolution below the 2-bit minimum.
    #[error("CEQ resolution must be at least 2 bits (got {0})")]
    ResolutionTooLow(u32),

    /// A covariance matrix handed to the quantizer statistics is not
    /// normalized to unit diagonal.
    #[error("covariance diagonal entry {index} is {value}, expected 1")]
    NonUnitDiagonal { index: usize, value: f64 },

    /// A correlation magnitude exceeds 1 beyond numerical noise.
    #[error("correlation entry ({row},{col}) has magnitude {value} > 1")]
    CorrelationOutOfRange { row: usize, col: usize, value: f64 },

    /// An input covariance has a zero (or negative) diagonal entry, so the
    /// Bussgang gain is singular.
    #[error("covariance diagonal entry {index} is not strictly positive")]
    SingularDiagonal { index: usize },

    /// An antenna carries no transmit signal at all; the Bussgang
    /// linearization of the quantizer is undefined there.
    #[error("degenerate precoder: antenna {antenna} carries zero signal power")]
    DegeneratePrecoder { antenna: usize },

    /// A beamformer is orthogonal to its own channel, so the direct gain is
    /// zero and the SQINR balancing system has an infinite diagonal entry.
    #[error("beamformer for user {k} on subcarrier {n} is orthogonal to its channel")]
    InfeasibleDirectGain { k: usize, n: usize },

    /// Power iteration failed to settle within the iteration cap.
    #[error("power iteration did not converge within {iters} iterations")]
    PowerIterationDiverged { iters: usize },

    /// The dominant eigenvector of an extended coupling matrix has
    /// non-positive entries, which signals a reducible coupling matrix
    /// (degenerate channel) rather than a Perron eigenpair.
    #[error("dominant eigenvector has a non-positive entry at index {index}")]
    NonPositiveEigenvector { index: usize },

    /// The per-subcarrier channel matrix is rank deficient, so zero-forcing
    /// is undefined.
    #[error("rank-deficient channel on subcarrier {n}")]
    RankDeficient { n: usize },

    /// The linear system produced by the quantizer statistics could not be
    /// factorized.
    #[error("singular linear system: {0}")]
    SingularSystem(String),

    /// Channel (de)serialization failed.
    #[error("channel file format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
