//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while ingesting data, building dictionaries,
/// selecting terms, predicting, or integrating the epidemic model.
#[derive(Debug, Error)]
pub enum Error {
    // ---- data ingestion / container validation ----
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV parse error: {0}")]
    Csv(#[from] csv::Error),

    #[error("CSV is missing required column '{name}'")]
    MissingColumn { name: String },

    #[error("CSV contains no data rows")]
    EmptyData,

    #[error("duplicate date {date} in input")]
    DuplicateDate { date: String },

    #[error("missing date {date}: input must be one row per consecutive day (or use forward fill)")]
    MissingDate { date: String },

    #[error("non-numeric cell '{value}' in column '{column}', data row {row}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid date '{value}' in data row {row}: expected YYYY-MM-DD")]
    InvalidDate { row: usize, value: String },

    #[error("series '{name}' contains a non-finite value at index {index}")]
    NonFiniteValue { name: String, index: usize },

    #[error("series '{a}' and '{b}' are not on the same date axis")]
    AxisMismatch { a: String, b: String },

    #[error("duplicate series name '{name}' in dataset")]
    DuplicateSeries { name: String },

    #[error("dataset has no series named '{name}'")]
    UnknownSeries { name: String },

    #[error("split of {requested} samples exceeds dataset length {len}")]
    SplitTooLong { requested: usize, len: usize },

    #[error("invalid split: {reason}")]
    InvalidSplit { reason: String },

    #[error("invalid CSV schema: {reason}")]
    InvalidSchema { reason: String },

    #[error("autocorrelation undefined: {reason}")]
    UndefinedCorrelation { reason: String },

    // ---- dictionary ----
    #[error("invalid lag specification: {reason}")]
    InvalidLagSpec { reason: String },

    #[error("lag specification produces an empty dictionary")]
    EmptyDictionary,

    #[error("dictionary references variable '{name}' which the dataset does not contain")]
    UnknownVariable { name: String },

    #[error("dataset of length {len} is too short for maximum lag {max_lag}")]
    SeriesTooShort { len: usize, max_lag: usize },

    #[error("dataset output is '{dataset}' but the lag specification predicts '{spec}'")]
    OutputMismatch { dataset: String, spec: String },

    // ---- regression / selection ----
    #[error("invalid selection config: {reason}")]
    InvalidSelectionConfig { reason: String },

    #[error("squared correlation undefined: {reason}")]
    ZeroNorm { reason: String },

    #[error("regression target has zero energy; nothing to explain")]
    DegenerateTarget,

    #[error("selected columns are numerically dependent at step {step} (orthogonalized norm vanished)")]
    IllConditioned { step: usize },

    #[error("model term '{term}' is not a column of the regression problem")]
    TermNotInProblem { term: String },

    #[error("not enough rows ({rows}) for {terms} terms: {context}")]
    InsufficientData {
        rows: usize,
        terms: usize,
        context: String,
    },

    #[error("model and problem disagree: {reason}")]
    ModelMismatch { reason: String },

    // ---- prediction ----
    #[error("free-run simulation diverged at step {step} (|prediction| exceeded {bound:.3e})")]
    Diverged { step: usize, bound: f64 },

    #[error("seed of {given} values does not cover the maximum output lag {needed}")]
    SeedTooShort { given: usize, needed: usize },

    #[error("coefficient of determination undefined: {reason}")]
    UndefinedRSquare { reason: String },

    #[error("residual diagnostics need at least {needed} points, got {got}")]
    TooFewResiduals { needed: usize, got: usize },

    // ---- epidemic model ----
    #[error("invalid epidemic parameters: {reason}")]
    InvalidEpiParams { reason: String },

    #[error("integration failed on day {day}: compartment {compartment} = {value:.3e} went negative beyond tolerance")]
    IntegratorFailure {
        day: usize,
        compartment: &'static str,
        value: f64,
    },

    #[error("active infections are zero on {date}: rates undefined there")]
    RateGap { date: String },

    #[error("cumulative deaths decrease on {date}")]
    DecreasingDeaths { date: String },

    #[error("susceptible reconstruction hit {value:.3e} on {date}; population accounting failed")]
    SusceptibleExhausted { date: String, value: f64 },

    #[error("reproduction number undefined: {reason}")]
    UndefinedReproductionNumber { reason: String },
}

impl Error {
    /// Helper to wrap I/O errors with the offending path.
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
