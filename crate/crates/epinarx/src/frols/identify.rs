//! End-to-end identification: dictionary evaluation, cross-validated term
//! selection, and a final refit with significance levels.

use crate::data::{self, Dataset, SplitSpec};
use crate::dictionary::{build_dictionary, LagSpec, RegressionProblem};
use crate::error::{Error, Result};

use super::estimate::{back_substitute, orthogonal_fit, p_values_for_indices};
use super::select::frols_select;
use super::{IdentifiedModel, SelectionConfig, SelectionStep, SelectionTrace, TrainingSummary};

/// Fold count used by [`identify`] and [`identify_full`].
pub const DEFAULT_FOLDS: usize = 10;

/// What one cross-validation fold selected and how it generalized.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    /// Column indices the fold selected (in selection order), after trimming
    /// to the fold's chosen model size.
    pub term_indices: Vec<usize>,
    /// Mean squared one-step error on the fold's held-out rows, using
    /// parameters fitted on the fold's training rows.
    pub holdout_mse: f64,
}

/// Result of [`identify_full`]: the final model plus the evidence that chose
/// its term set.
#[derive(Debug, Clone, PartialEq)]
pub struct Identification {
    pub model: IdentifiedModel,
    /// Final-refit trace of the winning term set over all training rows.
    pub trace: SelectionTrace,
    pub folds: Vec<FoldOutcome>,
    /// Index into `folds` of the winner (lowest hold-out error).
    pub best_fold: usize,
}

/// Contiguous row blocks covering `0..n_rows` as evenly as possible; the
/// first `n_rows % folds` blocks are one row longer.
fn contiguous_folds(n_rows: usize, folds: usize) -> Vec<std::ops::Range<usize>> {
    let base = n_rows / folds;
    let extra = n_rows % folds;
    let mut blocks = Vec::with_capacity(folds);
    let mut start = 0;
    for i in 0..folds {
        let len = base + usize::from(i < extra);
        blocks.push(start..start + len);
        start += len;
    }
    blocks
}

/// Runs the selection search once per fold, holding out one contiguous block
/// of rows each time, and scores each fold's trimmed model on its held-out
/// block. Returns the per-fold outcomes and the index of the best fold.
///
/// Rows are blocked contiguously rather than sampled: the rows are time
/// steps, and shuffling them would leak near-duplicate neighbours of training
/// rows into the hold-out set.
pub fn cross_validated_selection(
    problem: &RegressionProblem,
    config: &SelectionConfig,
    folds: usize,
) -> Result<(Vec<FoldOutcome>, usize)> {
    config.validate()?;
    if folds < 2 {
        return Err(Error::InvalidSelectionConfig {
            reason: format!("cross-validation needs at least 2 folds, got {folds}"),
        });
    }
    let n_rows = problem.n_rows();
    if n_rows < folds * 2 {
        return Err(Error::InsufficientData {
            rows: n_rows,
            terms: folds,
            context: format!("{folds}-fold cross-validation needs at least {} rows", folds * 2),
        });
    }

    let blocks = contiguous_folds(n_rows, folds);
    let mut outcomes = Vec::with_capacity(folds);
    for hold in &blocks {
        let train_ranges = [0..hold.start, hold.end..n_rows];
        let fold_problem = problem.subset_rows(&train_ranges);
        let trace = frols_select(&fold_problem, config)?;
        let size = config.decide_size(&trace);
        let indices: Vec<usize> = trace.indices()[..size].to_vec();

        let fit = orthogonal_fit(&fold_problem, &indices)?;
        let theta = back_substitute(&fit.r, &fit.g);

        let holdout = problem.subset_rows(std::slice::from_ref(hold));
        let mut sse = 0.0;
        for row in 0..holdout.n_rows() {
            let mut pred = 0.0;
            for (slot, &idx) in indices.iter().enumerate() {
                pred += theta[slot] * holdout.columns()[[row, idx]];
            }
            let e = holdout.target()[row] - pred;
            sse += e * e;
        }
        outcomes.push(FoldOutcome {
            term_indices: indices,
            holdout_mse: sse / holdout.n_rows() as f64,
        });
    }

    let mut best = 0;
    for (i, outcome) in outcomes.iter().enumerate().skip(1) {
        if outcome.holdout_mse < outcomes[best].holdout_mse {
            best = i;
        }
    }
    Ok((outcomes, best))
}

/// Refits `indices` on the whole problem and packages the result as a model:
/// least-squares parameters, per-term error-reduction ratios of the refit,
/// p-values, and a trace whose residual energies come from explicit partial
/// residual vectors.
fn finalize(
    problem: &RegressionProblem,
    spec: &LagSpec,
    indices: &[usize],
) -> Result<(IdentifiedModel, SelectionTrace)> {
    let n = indices.len();
    let rows = problem.n_rows();
    let fit = orthogonal_fit(problem, indices)?;
    let theta = back_substitute(&fit.r, &fit.g);
    let y = problem.target();
    let target_energy = y.dot(y);
    if target_energy <= 0.0 {
        return Err(Error::DegenerateTarget);
    }

    let mut steps = Vec::with_capacity(n);
    let mut partial = y.to_owned();
    for (k, &index) in indices.iter().enumerate() {
        partial.scaled_add(-fit.g[k], &fit.q[k]);
        let residual_energy = partial.dot(&partial);
        let err = (fit.g[k] * fit.g[k] * fit.d[k] / target_energy).clamp(0.0, 1.0);
        steps.push(SelectionStep {
            term_index: index,
            err,
            residual_energy,
            g: fit.g[k],
        });
    }
    let trace = SelectionTrace::from_parts(steps, target_energy, rows, false)?;

    let p_values = p_values_for_indices(problem, indices)?;
    let rss = fit.residual.dot(&fit.residual);
    let residual_variance = if rows > n { rss / (rows - n) as f64 } else { 0.0 };
    let err: Vec<f64> = trace.steps().iter().map(|s| s.err).collect();
    let terms = indices.iter().map(|&i| problem.terms()[i].clone()).collect();

    let model = IdentifiedModel::new(
        spec.clone(),
        terms,
        theta,
        err,
        p_values,
        TrainingSummary {
            n_eff: rows,
            residual_variance,
        },
    )?;
    Ok((model, trace))
}

/// Identifies a model on the training portion of `dataset`:
///
/// 1. build the term dictionary from `spec` and evaluate it over the training
///    rows;
/// 2. run [`DEFAULT_FOLDS`]-fold cross-validated selection and keep the term
///    set of the fold with the lowest hold-out error;
/// 3. refit that term set on all training rows, attaching final
///    error-reduction ratios, p-values, and the residual variance.
///
/// The test portion of the split is untouched — it is reserved for whatever
/// out-of-sample evaluation the caller runs afterwards.
pub fn identify_full(
    dataset: &Dataset,
    spec: &LagSpec,
    config: &SelectionConfig,
    split: &SplitSpec,
) -> Result<Identification> {
    let (train, _test) = data::split(dataset, split)?;
    let dictionary = build_dictionary(spec)?;
    let problem = crate::dictionary::evaluate(&dictionary, &train)?;
    let (folds, best_fold) = cross_validated_selection(&problem, config, DEFAULT_FOLDS)?;
    let winner = folds[best_fold].term_indices.clone();
    let (model, trace) = finalize(&problem, spec, &winner)?;
    Ok(Identification {
        model,
        trace,
        folds,
        best_fold,
    })
}

/// [`identify_full`] without the diagnostics: returns just the fitted model.
pub fn identify(
    dataset: &Dataset,
    spec: &LagSpec,
    config: &SelectionConfig,
    split: &SplitSpec,
) -> Result<IdentifiedModel> {
    identify_full(dataset, spec, config, split).map(|id| id.model)
}
