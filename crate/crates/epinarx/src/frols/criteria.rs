//! Model-size selection from a finished trace.

use super::{SelectionTrace, SizeCriterion};

/// Criterion value at each candidate size `1..=trace.len()`.
///
/// `n_eff` is the number of regression rows behind the trace. For
/// [`SizeCriterion::Fixed`] the curve is all zeros — the criterion never
/// inspects the fit. A size whose penalty denominator is non-positive (more
/// effective parameters than rows) scores `+∞`; an exact fit drives the
/// log-likelihood criteria to `−∞`, which is ordered correctly by the
/// first-minimum rule.
pub fn criterion_curve(trace: &SelectionTrace, criterion: SizeCriterion, n_eff: usize) -> Vec<f64> {
    let n = n_eff as f64;
    (1..=trace.len())
        .map(|size| {
            let mse = trace.residual_energy_at(size) / n;
            let k = size as f64;
            match criterion {
                SizeCriterion::Aic => n * mse.ln() + 2.0 * k,
                SizeCriterion::Bic => n * mse.ln() + k * n.ln(),
                SizeCriterion::Gcv => shrinkage_penalty(mse, k, n, 1.0),
                SizeCriterion::Apress { alpha } => shrinkage_penalty(mse, k, n, alpha),
                SizeCriterion::Fixed => 0.0,
            }
        })
        .collect()
}

fn shrinkage_penalty(mse: f64, k: f64, n: f64, alpha: f64) -> f64 {
    let denom = 1.0 - alpha * k / n;
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        mse / (denom * denom)
    }
}

/// Picks the model size minimizing `criterion` over the trace, taking the
/// *first* minimum when several sizes score equally (ties favour the smaller
/// model). [`SizeCriterion::Fixed`] keeps the whole trace. An empty trace has
/// size 0.
pub fn select_model_size(trace: &SelectionTrace, criterion: SizeCriterion, n_eff: usize) -> usize {
    if trace.is_empty() {
        return 0;
    }
    if criterion == SizeCriterion::Fixed {
        return trace.len();
    }
    let curve = criterion_curve(trace, criterion, n_eff);
    let mut best_size = 1;
    let mut best_value = curve[0];
    for (i, &value) in curve.iter().enumerate().skip(1) {
        if value < best_value {
            best_value = value;
            best_size = i + 1;
        }
    }
    best_size
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frols::SelectionStep;

    /// A trace with the given residual energies (target energy 100).
    fn trace_with_energies(energies: &[f64]) -> SelectionTrace {
        let target = 100.0;
        let mut prev = target;
        let steps = energies
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                let step = SelectionStep {
                    term_index: i,
                    err: (prev - e) / target,
                    residual_energy: e,
                    g: 1.0,
                };
                prev = e;
                step
            })
            .collect();
        SelectionTrace::from_parts(steps, target, 50, false).unwrap()
    }

    #[test]
    fn aic_and_bic_match_hand_computation() {
        let trace = trace_with_energies(&[40.0, 10.0, 9.0]);
        let n = 50.0_f64;
        let aic = criterion_curve(&trace, SizeCriterion::Aic, 50);
        let bic = criterion_curve(&trace, SizeCriterion::Bic, 50);
        for (i, &e) in [40.0, 10.0, 9.0].iter().enumerate() {
            let mse = e / n;
            let k = (i + 1) as f64;
            assert!((aic[i] - (n * mse.ln() + 2.0 * k)).abs() < 1e-12);
            assert!((bic[i] - (n * mse.ln() + k * n.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn gcv_equals_apress_with_alpha_one() {
        let trace = trace_with_energies(&[40.0, 10.0, 9.0, 8.8]);
        let gcv = criterion_curve(&trace, SizeCriterion::Gcv, 50);
        let apress1 = criterion_curve(&trace, SizeCriterion::Apress { alpha: 1.0 }, 50);
        assert_eq!(gcv, apress1);
    }

    #[test]
    fn stronger_alpha_prefers_smaller_models() {
        // Energy keeps dropping slightly; a weak penalty keeps all terms,
        // a strong one stops at the big drop.
        let trace = trace_with_energies(&[40.0, 10.0, 9.5, 9.2, 9.0]);
        let weak = select_model_size(&trace, SizeCriterion::Apress { alpha: 1.0 }, 50);
        let strong = select_model_size(&trace, SizeCriterion::Apress { alpha: 8.0 }, 50);
        assert!(strong <= weak, "strong {strong} vs weak {weak}");
        assert_eq!(strong, 2);
    }

    #[test]
    fn fixed_keeps_the_whole_trace() {
        let trace = trace_with_energies(&[40.0, 10.0, 9.0]);
        assert_eq!(select_model_size(&trace, SizeCriterion::Fixed, 50), 3);
    }

    #[test]
    fn flat_tail_ties_resolve_to_first_minimum() {
        // Identical residual energy at sizes 2 and 3 ⇒ identical AIC shifted
        // by the 2k penalty, so AIC strictly prefers 2; with an exactly equal
        // criterion value the first minimum must win. Build that via Fixed's
        // all-zero curve: every size ties, size 1 wins.
        let trace = trace_with_energies(&[40.0, 10.0, 10.0]);
        let aic = select_model_size(&trace, SizeCriterion::Aic, 50);
        assert_eq!(aic, 2);

        let gcv_curve = criterion_curve(&trace, SizeCriterion::Gcv, 50);
        assert!(gcv_curve[2] > gcv_curve[1]);
    }

    #[test]
    fn exact_fit_is_preferred_by_likelihood_criteria() {
        // Zero residual at size 2: AIC/BIC go to −∞ there and stay (−∞ ties
        // resolve to the first), so size 2 wins over sizes 3+.
        let trace = trace_with_energies(&[40.0, 0.0, 0.0]);
        assert_eq!(select_model_size(&trace, SizeCriterion::Aic, 50), 2);
        assert_eq!(select_model_size(&trace, SizeCriterion::Bic, 50), 2);
    }

    #[test]
    fn oversized_penalty_denominator_scores_infinite() {
        // alpha·k ≥ n ⇒ denominator ≤ 0 ⇒ +∞; the curve must not panic and
        // the selection must avoid those sizes.
        let trace = trace_with_energies(&[40.0, 10.0, 9.0, 8.0, 7.0, 6.0]);
        let curve = criterion_curve(&trace, SizeCriterion::Apress { alpha: 2.0 }, 10);
        assert!(curve[4].is_infinite()); // 1 − 2·5/10 = 0
        assert!(curve[5].is_infinite());
        let size = select_model_size(&trace, SizeCriterion::Apress { alpha: 2.0 }, 10);
        assert!(size < 5);
    }

    #[test]
    fn empty_trace_selects_size_zero() {
        let trace = SelectionTrace::from_parts(vec![], 100.0, 50, true).unwrap();
        assert_eq!(select_model_size(&trace, SizeCriterion::Aic, 50), 0);
    }
}
