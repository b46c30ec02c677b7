use thiserror::Error;

/// Errors produced by the simulation and verification routines.
///
/// Precondition violations are reported eagerly and carry enough context to
/// identify the offending argument without a debugger.
#[derive(Debug, Error)]
pub enum Error {
    /// Noise model construction or use rejected the parameters.
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    /// A parameter was outside its documented domain.
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// An index walked off the retained noise history of a sample path.
    #[error("history range: {0}")]
    HistoryRange(String),

    /// A lag was too large for the path or series it was applied to.
    #[error("lag {lag} out of range: {message}")]
    LagRange { lag: usize, message: String },

    /// An estimator denominator vanished; the sample carries no information.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// A window violated the separation invariant between the block length
    /// and the maximal lag.
    #[error("window invariant violated: {0}")]
    WindowInvariant(String),

    /// The moment query needs coefficients but the window carries none.
    #[error("missing coefficients: {0}")]
    MissingCoefficients(String),

    /// Exhaustive enumeration would visit more states than the guard allows.
    #[error("enumeration guard exceeded: {states:.3e} states, limit {limit:.3e}")]
    EnumerationGuard { states: f64, limit: f64 },

    /// Exhaustive enumeration requires a finitely supported noise law.
    #[error("enumeration requires a finitely supported noise law, got {0}")]
    EnumerationUnsupported(String),

    /// A growth schedule failed its admissibility inequality.
    #[error("schedule rejected: {0}")]
    ScheduleRejected(String),

    /// A rate function was queried with a deviation level that has no rate.
    #[error("invalid deviation level: {0}")]
    InvalidDeviation(String),

    /// The coefficient vector sums to zero, so the limiting variance of the
    /// linear statistic degenerates and no rate exists.
    #[error("degenerate rate: coefficient sum is zero, limiting variance vanishes")]
    DegenerateRate,

    /// A sequence was too short for the requested block geometry.
    #[error("sequence too short: {0}")]
    TooShort(String),

    /// No admissible block spacing exists for the requested geometry.
    #[error("infeasible block geometry: {0}")]
    Infeasible(String),

    /// A Monte Carlo routine was configured below its minimum sample size.
    #[error("insufficient replicates: {0}")]
    InsufficientReplicates(String),
}

pub type Result<T> = std::result::Result<T, Error>;
