//! Sparse polynomial NARX identification for daily epidemic series.
//!
//! The crate covers the full path from raw daily CSV data to a compact,
//! human-readable difference-equation model:
//!
//! * [`data`] — validated daily time series, CSV ingestion, train/test splits;
//! * [`dictionary`] — polynomial lagged-term dictionaries and their
//!   regression matrices;
//! * [`frols`] — forward regression with orthogonal least squares: greedy
//!   term selection by error-reduction ratio, model-size criteria,
//!   cross-validated identification, parameter estimates and p-values;
//! * [`predict`] — one-step and free-run prediction, fit scores, residual
//!   whiteness diagnostics;
//! * [`epi`] — a compartmental susceptible/exposed/infected/removed/deceased
//!   model, time-varying transmission- and lethality-rate reconstruction
//!   from case counts, and the resulting reproduction-number series;
//! * [`report`] — stable text/CSV rendering of fitted models and traces.

pub mod data;
pub mod dictionary;
pub mod epi;
pub mod error;
pub mod frols;
pub mod linalg;
pub mod predict;
pub mod report;

pub use error::{Error, Result};
