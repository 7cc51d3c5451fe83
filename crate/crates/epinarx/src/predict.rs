//! Model simulation (one-step and free-run), fit scores, and residual
//! whiteness diagnostics.

use crate::data::{Dataset, TimeSeries};
use crate::error::{Error, Result};
use crate::frols::IdentifiedModel;

/// How a prediction series was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionMode {
    /// Every lagged value comes from measured data.
    OneStep,
    /// Lagged outputs come from the model's own previous predictions.
    FreeRun,
}

/// A prediction series paired with the measured values on the same date axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRun {
    pub mode: PredictionMode,
    pub predictions: TimeSeries,
    pub actual: TimeSeries,
    /// Smallest lag appearing in the model's terms: predictions use no
    /// information newer than this many days (0 for a constant-only or empty
    /// model).
    pub horizon_days: usize,
}

impl PredictionRun {
    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    /// Pointwise residuals `actual − predicted`.
    pub fn residuals(&self) -> Vec<f64> {
        self.actual
            .values()
            .iter()
            .zip(self.predictions.values())
            .map(|(a, p)| a - p)
            .collect()
    }
}

/// One term's factors resolved against a dataset: the output variable is kept
/// symbolic so free-run can substitute simulated values.
enum FactorSource<'a> {
    Input(&'a [f64]),
    Output,
}

struct CompiledModel<'a> {
    terms: Vec<Vec<(FactorSource<'a>, usize)>>,
    parameters: &'a [f64],
}

impl<'a> CompiledModel<'a> {
    fn compile(model: &'a IdentifiedModel, dataset: &'a Dataset) -> Result<CompiledModel<'a>> {
        if dataset.output_name() != model.output_name() {
            return Err(Error::OutputMismatch {
                dataset: dataset.output_name().to_string(),
                spec: model.output_name().to_string(),
            });
        }
        let mut terms = Vec::with_capacity(model.len());
        for term in model.terms() {
            let mut factors = Vec::with_capacity(term.degree());
            for f in term.factors() {
                let source = if f.variable == model.output_name() {
                    FactorSource::Output
                } else {
                    let series = dataset.series(&f.variable).ok_or_else(|| Error::UnknownVariable {
                        name: f.variable.clone(),
                    })?;
                    FactorSource::Input(series.values())
                };
                factors.push((source, f.lag));
            }
            terms.push(factors);
        }
        Ok(CompiledModel {
            terms,
            parameters: model.parameters(),
        })
    }

    /// Model output at dataset index `t`, with `output_at` supplying lagged
    /// output values. Both prediction modes run this exact arithmetic, so a
    /// model with no autoregressive terms produces bitwise-identical results
    /// in either mode.
    fn eval_at(&self, t: usize, output_at: &dyn Fn(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for (theta, factors) in self.parameters.iter().zip(&self.terms) {
            let mut prod = 1.0;
            for (source, lag) in factors {
                prod *= match source {
                    FactorSource::Input(values) => values[t - lag],
                    FactorSource::Output => output_at(t - lag),
                };
            }
            acc += theta * prod;
        }
        acc
    }
}

/// Smallest lag over the model's non-constant terms.
fn model_horizon(model: &IdentifiedModel) -> usize {
    model
        .terms()
        .iter()
        .filter(|t| !t.is_constant())
        .map(|t| t.min_lag())
        .min()
        .unwrap_or(0)
}

fn check_coverage(model: &IdentifiedModel, dataset: &Dataset) -> Result<usize> {
    let max_lag = model.max_lag();
    if dataset.len() <= max_lag {
        return Err(Error::SeriesTooShort {
            len: dataset.len(),
            max_lag,
        });
    }
    Ok(max_lag)
}

/// One-step-ahead prediction: ŷ(t) = Σ θ_m·ψ_m(t) with every lagged value
/// measured. Defined for t from the model's max lag to the end of the data.
pub fn one_step_predict(model: &IdentifiedModel, dataset: &Dataset) -> Result<PredictionRun> {
    let max_lag = check_coverage(model, dataset)?;
    let compiled = CompiledModel::compile(model, dataset)?;
    let measured = dataset.output().values();
    let output_at = |s: usize| measured[s];
    let values: Vec<f64> = (max_lag..dataset.len())
        .map(|t| compiled.eval_at(t, &output_at))
        .collect();
    let start = dataset.start().offset(max_lag as i64);
    Ok(PredictionRun {
        mode: PredictionMode::OneStep,
        predictions: TimeSeries::new("predicted", start, values)?,
        actual: dataset
            .output()
            .slice(max_lag..dataset.len())
            .renamed("actual"),
        horizon_days: model_horizon(model),
    })
}

/// Free-run simulation: autoregressive terms consume previously *simulated*
/// outputs; input terms consume measured inputs. `initial_output` seeds the
/// lagged outputs needed before the first prediction — its last values fill
/// dataset indices `max_lag − L .. max_lag`, where `L` is the model's largest
/// output lag. The dataset's output series is used only as the comparison
/// series (and for the divergence bound), never fed back.
///
/// Simulation aborts with [`Error::Diverged`] when a simulated value stops
/// being finite or exceeds 10⁶ × max|measured output|.
pub fn free_run_simulate(
    model: &IdentifiedModel,
    dataset: &Dataset,
    initial_output: &[f64],
) -> Result<PredictionRun> {
    let max_lag = check_coverage(model, dataset)?;
    let compiled = CompiledModel::compile(model, dataset)?;

    let output_lag = model
        .terms()
        .iter()
        .flat_map(|t| t.factors())
        .filter(|f| f.variable == model.output_name())
        .map(|f| f.lag)
        .max()
        .unwrap_or(0);
    if initial_output.len() < output_lag {
        return Err(Error::SeedTooShort {
            given: initial_output.len(),
            needed: output_lag,
        });
    }

    let n = dataset.len();
    let max_abs = dataset
        .output()
        .values()
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()));
    let bound = if max_abs > 0.0 { 1e6 * max_abs } else { f64::INFINITY };

    // Simulated outputs on the dataset's index axis; only indices
    // max_lag − output_lag .. n are ever read.
    let mut simulated = vec![0.0; n];
    let seed_tail = &initial_output[initial_output.len() - output_lag..];
    for (offset, &v) in seed_tail.iter().enumerate() {
        simulated[max_lag - output_lag + offset] = v;
    }

    let mut values = Vec::with_capacity(n - max_lag);
    for t in max_lag..n {
        let v = {
            let output_at = |s: usize| simulated[s];
            compiled.eval_at(t, &output_at)
        };
        if !v.is_finite() || v.abs() > bound {
            return Err(Error::Diverged {
                step: t - max_lag,
                bound,
            });
        }
        simulated[t] = v;
        values.push(v);
    }

    let start = dataset.start().offset(max_lag as i64);
    Ok(PredictionRun {
        mode: PredictionMode::FreeRun,
        predictions: TimeSeries::new("predicted", start, values)?,
        actual: dataset.output().slice(max_lag..n).renamed("actual"),
        horizon_days: model_horizon(model),
    })
}

/// Coefficient of determination: `1 − SS_res/SS_tot` with `SS_tot` taken
/// about the mean of `actual`. Undefined for constant actuals or fewer than
/// two points.
pub fn r_square(pred: &TimeSeries, actual: &TimeSeries) -> Result<f64> {
    if !pred.same_axis(actual) {
        return Err(Error::AxisMismatch {
            a: pred.name().to_string(),
            b: actual.name().to_string(),
        });
    }
    let n = actual.len();
    if n < 2 {
        return Err(Error::UndefinedRSquare {
            reason: format!("needs at least 2 points, got {n}"),
        });
    }
    let mean = actual.values().iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = actual.values().iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedRSquare {
            reason: "actual series is constant".to_string(),
        });
    }
    let ss_res: f64 = actual
        .values()
        .iter()
        .zip(pred.values())
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Number of autocorrelation lags reported by [`residual_diagnostics`].
pub const DIAGNOSTIC_LAGS: usize = 20;

/// Minimum number of residuals the diagnostics accept.
pub const MIN_DIAGNOSTIC_POINTS: usize = 30;

/// Residual summary: mean, variance, and the sample autocorrelation function
/// over lags `1..=20` with its ±1.96/√N whiteness band.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualDiagnostics {
    pub n: usize,
    pub mean: f64,
    /// Population variance of the residuals.
    pub variance: f64,
    /// Sample autocorrelations at lags `1..=DIAGNOSTIC_LAGS`
    /// (`autocorrelations[0]` is lag 1).
    pub autocorrelations: Vec<f64>,
    /// Two-sided whiteness band: white residuals keep roughly 95% of lags
    /// within ±band.
    pub band: f64,
}

impl ResidualDiagnostics {
    /// How many reported lags fall inside the whiteness band.
    pub fn lags_inside_band(&self) -> usize {
        self.autocorrelations
            .iter()
            .filter(|r| r.abs() <= self.band)
            .count()
    }
}

/// Computes residual diagnostics for a prediction run.
///
/// The autocorrelation at lag k is `Σ c_t·c_{t−k} / Σ c_t²` over mean-centered
/// residuals `c`. A run with zero residual energy (exact fit) reports all
/// autocorrelations as zero.
pub fn residual_diagnostics(run: &PredictionRun) -> Result<ResidualDiagnostics> {
    let residuals = run.residuals();
    let n = residuals.len();
    if n < MIN_DIAGNOSTIC_POINTS {
        return Err(Error::TooFewResiduals {
            needed: MIN_DIAGNOSTIC_POINTS,
            got: n,
        });
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = residuals.iter().map(|e| e - mean).collect();
    let denom: f64 = centered.iter().map(|c| c * c).sum();
    let variance = denom / n as f64;
    let autocorrelations = (1..=DIAGNOSTIC_LAGS)
        .map(|lag| {
            if denom == 0.0 {
                return 0.0;
            }
            let num: f64 = (lag..n).map(|t| centered[t] * centered[t - lag]).sum();
            num / denom
        })
        .collect();
    Ok(ResidualDiagnostics {
        n,
        mean,
        variance,
        autocorrelations,
        band: 1.96 / (n as f64).sqrt(),
    })
}
