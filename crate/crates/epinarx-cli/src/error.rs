//! Pipeline error type: every failure names the stage it happened in and
//! maps onto the process exit codes (1 validation, 2 data, 3 numerical).

use std::fmt;
use std::path::Path;

/// Exit classes for the binary. `Success` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Validation,
    Data,
    Numerical,
}

impl ExitClass {
    pub fn code(self) -> u8 {
        match self {
            ExitClass::Validation => 1,
            ExitClass::Data => 2,
            ExitClass::Numerical => 3,
        }
    }
}

/// A failure annotated with the pipeline stage that produced it.
#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub message: String,
    pub class: ExitClass,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn validation(stage: &'static str, message: impl Into<String>) -> CliError {
        CliError {
            stage,
            message: message.into(),
            class: ExitClass::Validation,
        }
    }

    pub fn data(stage: &'static str, message: impl Into<String>) -> CliError {
        CliError {
            stage,
            message: message.into(),
            class: ExitClass::Data,
        }
    }

    pub fn io(stage: &'static str, path: &Path, err: std::io::Error) -> CliError {
        CliError::data(stage, format!("{}: {err}", path.display()))
    }

    /// Wraps a library error, classifying it by variant.
    pub fn lib(stage: &'static str, err: epinarx::Error) -> CliError {
        CliError {
            stage,
            message: err.to_string(),
            class: classify(&err),
        }
    }
}

/// Clusters library errors into the three exit classes: configuration and
/// specification problems are validation; anything about file or series
/// content is a data error; degeneracies arising during computation are
/// numerical.
fn classify(err: &epinarx::Error) -> ExitClass {
    use epinarx::Error as E;
    match err {
        E::InvalidSplit { .. }
        | E::InvalidSchema { .. }
        | E::InvalidLagSpec { .. }
        | E::EmptyDictionary
        | E::UnknownVariable { .. }
        | E::OutputMismatch { .. }
        | E::InvalidSelectionConfig { .. }
        | E::TermNotInProblem { .. }
        | E::ModelMismatch { .. }
        | E::SeedTooShort { .. }
        | E::InvalidEpiParams { .. }
        | E::UnknownSeries { .. } => ExitClass::Validation,

        E::Io { .. }
        | E::Csv(_)
        | E::MissingColumn { .. }
        | E::EmptyData
        | E::DuplicateDate { .. }
        | E::MissingDate { .. }
        | E::NonNumericCell { .. }
        | E::InvalidDate { .. }
        | E::NonFiniteValue { .. }
        | E::AxisMismatch { .. }
        | E::DuplicateSeries { .. }
        | E::SplitTooLong { .. }
        | E::SeriesTooShort { .. }
        | E::InsufficientData { .. }
        | E::RateGap { .. }
        | E::DecreasingDeaths { .. } => ExitClass::Data,

        E::UndefinedCorrelation { .. }
        | E::ZeroNorm { .. }
        | E::DegenerateTarget
        | E::IllConditioned { .. }
        | E::Diverged { .. }
        | E::UndefinedRSquare { .. }
        | E::TooFewResiduals { .. }
        | E::IntegratorFailure { .. }
        | E::SusceptibleExhausted { .. }
        | E::UndefinedReproductionNumber { .. } => ExitClass::Numerical,
    }
}

/// Shorthand for stage-wrapping a library result.
pub fn at_stage<T>(stage: &'static str, result: epinarx::Result<T>) -> Result<T, CliError> {
    result.map_err(|e| CliError::lib(stage, e))
}
