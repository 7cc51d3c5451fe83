//! Greedy forward selection of regression terms by error-reduction ratio,
//! with orthogonal least-squares parameter estimation.
//!
//! The selection engine ([`frols_select`]) builds a model one term at a time.
//! At each step every remaining candidate column is orthogonalized against the
//! columns already chosen and scored by the fraction of target energy it would
//! explain; the best-scoring candidate is added and the explicit residual
//! vector is updated. Companion routines estimate parameters for a selected
//! term set ([`estimate_parameters`]), attach significance levels
//! ([`compute_p_values`]), pick a final model size from the selection trace
//! ([`select_model_size`]), and run the whole pipeline with cross-validation
//! ([`identify`]).

mod criteria;
mod estimate;
mod identify;
mod select;

pub use criteria::{criterion_curve, select_model_size};
pub use estimate::{compute_p_values, estimate_parameters};
pub use identify::{cross_validated_selection, identify, identify_full, FoldOutcome, Identification, DEFAULT_FOLDS};
pub use select::frols_select;

use ndarray::ArrayView1;

use crate::dictionary::{LagSpec, Term};
use crate::error::{Error, Result};

/// Squared correlation between two vectors, without mean-centering:
/// `(x·y)² / ((x·x)(y·y))`.
///
/// This is the score underlying the error-reduction ratio. It is undefined
/// when either vector has zero norm.
pub fn squared_correlation(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::UndefinedCorrelation {
            reason: format!("length mismatch: {} vs {}", x.len(), y.len()),
        });
    }
    if x.is_empty() {
        return Err(Error::UndefinedCorrelation {
            reason: "empty vectors".to_string(),
        });
    }
    let xx = x.dot(&x);
    let yy = y.dot(&y);
    if xx == 0.0 || yy == 0.0 {
        return Err(Error::UndefinedCorrelation {
            reason: "zero-norm vector".to_string(),
        });
    }
    let xy = x.dot(&y);
    Ok((xy * xy) / (xx * yy))
}

/// How the candidate scan reuses work between selection steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanMode {
    /// Re-orthogonalize every candidate from its original column at every
    /// step. Slower but numerically self-contained; this is the reference
    /// behaviour.
    #[default]
    Rescan,
    /// Keep a working copy of each candidate and project out only the newest
    /// basis vector after each step. Must select the same terms as
    /// [`ScanMode::Rescan`]; it only trades arithmetic for speed.
    Incremental,
}

/// Criterion used to pick the final model size from a selection trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SizeCriterion {
    /// `N·ln(MSE) + 2n`
    Aic,
    /// `N·ln(MSE) + n·ln(N)`
    Bic,
    /// `MSE / (1 − n/N)²`
    Gcv,
    /// `MSE / (1 − αn/N)²`; `alpha = 1` reproduces [`SizeCriterion::Gcv`],
    /// larger values penalize model size more aggressively.
    Apress { alpha: f64 },
    /// Keep every selected term (the trace length decides the size).
    Fixed,
}

/// Configuration for [`frols_select`] and the identification pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    /// Hard cap on the number of selected terms.
    pub max_terms: usize,
    /// Optional early stop: end the search once the cumulative
    /// error-reduction ratio reaches this value. When set, it also decides
    /// the final model size (the size criterion is not consulted).
    pub err_sum_threshold: Option<f64>,
    /// Criterion for trimming the trace to a final model size.
    pub size_criterion: SizeCriterion,
    /// A candidate is dropped for good when its orthogonalized squared norm
    /// falls below `collinearity_tol` times its original squared norm.
    pub collinearity_tol: f64,
    /// Scan strategy; see [`ScanMode`].
    pub scan_mode: ScanMode,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            max_terms: 20,
            err_sum_threshold: None,
            size_criterion: SizeCriterion::Apress { alpha: 4.0 },
            collinearity_tol: 1e-10,
            scan_mode: ScanMode::Rescan,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_terms == 0 {
            return Err(Error::InvalidSelectionConfig {
                reason: "max_terms must be at least 1".to_string(),
            });
        }
        if let Some(t) = self.err_sum_threshold {
            if !t.is_finite() || t <= 0.0 || t > 1.0 {
                return Err(Error::InvalidSelectionConfig {
                    reason: format!("err_sum_threshold must be in (0, 1], got {t}"),
                });
            }
        }
        if !self.collinearity_tol.is_finite() || self.collinearity_tol <= 0.0 || self.collinearity_tol >= 1.0 {
            return Err(Error::InvalidSelectionConfig {
                reason: format!("collinearity_tol must be in (0, 1), got {}", self.collinearity_tol),
            });
        }
        if let SizeCriterion::Apress { alpha } = self.size_criterion {
            if !alpha.is_finite() || alpha <= 0.0 {
                return Err(Error::InvalidSelectionConfig {
                    reason: format!("apress alpha must be positive, got {alpha}"),
                });
            }
        }
        Ok(())
    }

    /// Final model size implied by a finished trace: the ERR threshold (when
    /// set) keeps everything the search accepted, otherwise the size
    /// criterion trims the trace.
    pub fn decide_size(&self, trace: &SelectionTrace) -> usize {
        if self.err_sum_threshold.is_some() {
            trace.len()
        } else {
            select_model_size(trace, self.size_criterion, trace.n_rows())
        }
    }
}

/// One accepted term in a selection trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    /// Index of the chosen column in the scanned problem's dictionary.
    pub term_index: usize,
    /// Error-reduction ratio of this step (fraction of target energy).
    pub err: f64,
    /// Squared norm of the explicit residual vector *after* this step.
    pub residual_energy: f64,
    /// Projection coefficient of the target on this step's orthogonal basis
    /// vector.
    pub g: f64,
}

/// Full record of a forward-selection run.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace {
    steps: Vec<SelectionStep>,
    target_energy: f64,
    n_rows: usize,
    stopped_early: bool,
}

impl SelectionTrace {
    /// Assemble a trace from raw parts, checking the invariants that hold for
    /// any genuine run: positive target energy, non-increasing residual
    /// energies bounded by the target energy, ERR values in `[0, 1]` (up to
    /// rounding), and distinct term indices.
    pub fn from_parts(
        steps: Vec<SelectionStep>,
        target_energy: f64,
        n_rows: usize,
        stopped_early: bool,
    ) -> Result<Self> {
        if !target_energy.is_finite() || target_energy <= 0.0 {
            return Err(Error::DegenerateTarget);
        }
        let mut prev = target_energy;
        for (i, step) in steps.iter().enumerate() {
            if !(0.0..=1.0 + 1e-9).contains(&step.err) {
                return Err(Error::ModelMismatch {
                    reason: format!("step {i}: error-reduction ratio {} outside [0, 1]", step.err),
                });
            }
            if step.residual_energy < 0.0 || step.residual_energy > prev * (1.0 + 1e-9) {
                return Err(Error::ModelMismatch {
                    reason: format!(
                        "step {i}: residual energy {} exceeds previous energy {prev}",
                        step.residual_energy
                    ),
                });
            }
            if steps[..i].iter().any(|s| s.term_index == step.term_index) {
                return Err(Error::ModelMismatch {
                    reason: format!("step {i}: term index {} selected twice", step.term_index),
                });
            }
            prev = step.residual_energy;
        }
        Ok(SelectionTrace {
            steps,
            target_energy,
            n_rows,
            stopped_early,
        })
    }

    pub fn steps(&self) -> &[SelectionStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Selected column indices, in selection order.
    pub fn indices(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.term_index).collect()
    }

    /// Cumulative error-reduction ratio over all steps.
    pub fn err_sum(&self) -> f64 {
        self.steps.iter().map(|s| s.err).sum()
    }

    /// Squared norm of the target vector the trace was computed against.
    pub fn target_energy(&self) -> f64 {
        self.target_energy
    }

    /// Number of rows in the regression problem the trace was computed on.
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// True when the search ended because no admissible candidate remained,
    /// rather than by reaching a configured stop.
    pub fn stopped_early(&self) -> bool {
        self.stopped_early
    }

    /// Residual energy after `size` steps (`size = 0` gives the target
    /// energy).
    pub fn residual_energy_at(&self, size: usize) -> f64 {
        if size == 0 {
            self.target_energy
        } else {
            self.steps[size - 1].residual_energy
        }
    }
}

/// Per-model training bookkeeping carried alongside the fitted parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSummary {
    /// Number of regression rows the final fit used.
    pub n_eff: usize,
    /// Degrees-of-freedom-corrected residual variance of the final fit.
    pub residual_variance: f64,
}

/// A fitted model: selected terms with their estimated coefficients,
/// per-term error-reduction ratios and significance levels, and the lag
/// structure needed to re-evaluate the model on new data.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentifiedModel {
    spec: LagSpec,
    terms: Vec<Term>,
    parameters: Vec<f64>,
    err: Vec<f64>,
    p_values: Vec<f64>,
    training: TrainingSummary,
}

impl IdentifiedModel {
    pub fn new(
        spec: LagSpec,
        terms: Vec<Term>,
        parameters: Vec<f64>,
        err: Vec<f64>,
        p_values: Vec<f64>,
        training: TrainingSummary,
    ) -> Result<Self> {
        if terms.len() != parameters.len() || terms.len() != err.len() || terms.len() != p_values.len() {
            return Err(Error::ModelMismatch {
                reason: format!(
                    "terms/parameters/err/p-values lengths differ: {}/{}/{}/{}",
                    terms.len(),
                    parameters.len(),
                    err.len(),
                    p_values.len()
                ),
            });
        }
        for (i, term) in terms.iter().enumerate() {
            if terms[..i].contains(term) {
                return Err(Error::ModelMismatch {
                    reason: format!("duplicate term {term}"),
                });
            }
        }
        Ok(IdentifiedModel {
            spec,
            terms,
            parameters,
            err,
            p_values,
            training,
        })
    }

    /// Build a model directly from `(term, coefficient)` pairs, e.g. for
    /// simulating a known system. ERR and p-value slots are zeroed and the
    /// training summary is empty. An empty pair list gives the zero model
    /// (no terms, predictions identically zero).
    pub fn from_coefficients(output_name: &str, terms_and_params: Vec<(Term, f64)>) -> Result<Self> {
        let (terms, parameters): (Vec<Term>, Vec<f64>) = terms_and_params.into_iter().unzip();
        let spec = if terms.is_empty() {
            LagSpec::new(output_name, None, Vec::new(), 1, true)?
        } else {
            crate::dictionary::Dictionary::from_terms(output_name, terms.clone())?
                .spec()
                .clone()
        };
        let n = terms.len();
        IdentifiedModel::new(
            spec,
            terms,
            parameters,
            vec![0.0; n],
            vec![0.0; n],
            TrainingSummary {
                n_eff: 0,
                residual_variance: 0.0,
            },
        )
    }

    pub fn spec(&self) -> &LagSpec {
        &self.spec
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn parameters(&self) -> &[f64] {
        &self.parameters
    }

    pub fn err(&self) -> &[f64] {
        &self.err
    }

    pub fn p_values(&self) -> &[f64] {
        &self.p_values
    }

    pub fn training(&self) -> &TrainingSummary {
        &self.training
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn output_name(&self) -> &str {
        self.spec.output_name()
    }

    /// Deepest lag over all terms (0 for a constant-only model).
    pub fn max_lag(&self) -> usize {
        self.terms.iter().map(|t| t.max_lag()).max().unwrap_or(0)
    }

    pub fn err_sum(&self) -> f64 {
        self.err.iter().sum()
    }
}
