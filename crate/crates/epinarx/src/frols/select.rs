//! The forward-selection search.

use ndarray::Array1;
use rayon::prelude::*;

use crate::dictionary::RegressionProblem;
use crate::error::{Error, Result};

use super::{ScanMode, SelectionConfig, SelectionStep, SelectionTrace};

/// ERR values this close together are treated as a tie and resolved to the
/// lowest dictionary index.
const TIE_TOL: f64 = 1e-14;

/// The search stops once the residual energy falls below this fraction of the
/// target energy; anything smaller is rounding noise from an exact fit.
const RESIDUAL_FLOOR_REL: f64 = 1e-28;

enum Score {
    /// Candidate is unavailable this step (already selected or excluded).
    Skip,
    /// Candidate collapsed under orthogonalization; exclude it permanently.
    Collinear,
    /// Candidate survives with this error-reduction ratio.
    Err(f64),
}

/// Greedy forward selection by error-reduction ratio.
///
/// Each step orthogonalizes every available candidate column against the
/// already-selected basis (modified Gram–Schmidt with a second
/// clean-up pass), scores it by the fraction of target energy its orthogonal
/// component explains, and admits the best. Candidates whose orthogonalized
/// norm collapses below `collinearity_tol` times their original norm are
/// excluded for the rest of the run. The search stops at `max_terms`, at the
/// cumulative-ERR threshold when one is configured, when the residual is
/// exhausted, or when no admissible candidate remains.
///
/// The residual is maintained as an explicit vector — each step's recorded
/// `residual_energy` is the squared norm of that vector, not a value derived
/// from the ERR recursion — so energy-balance checks against the trace are
/// meaningful.
pub fn frols_select(problem: &RegressionProblem, config: &SelectionConfig) -> Result<SelectionTrace> {
    config.validate()?;

    let n_terms = problem.n_terms();
    let n_rows = problem.n_rows();
    if n_terms == 0 {
        return Err(Error::EmptyDictionary);
    }
    let y = problem.target();
    let target_energy = y.dot(y);
    if target_energy <= 0.0 || !target_energy.is_finite() {
        return Err(Error::DegenerateTarget);
    }

    let column_energy: Vec<f64> = (0..n_terms)
        .map(|j| {
            let c = problem.column(j);
            c.dot(&c)
        })
        .collect();

    // Zero columns can never be selected; drop them before the scan so the
    // ERR ratio is never 0/0.
    let mut excluded: Vec<bool> = column_energy.iter().map(|&e| e == 0.0).collect();
    let mut selected: Vec<bool> = vec![false; n_terms];

    // Working copies for the incremental scan: each candidate's column with
    // the already-selected basis progressively projected out.
    let mut work: Option<Vec<Array1<f64>>> = match config.scan_mode {
        ScanMode::Rescan => None,
        ScanMode::Incremental => Some((0..n_terms).map(|j| problem.column(j).to_owned()).collect()),
    };

    let mut basis: Vec<Array1<f64>> = Vec::new();
    let mut basis_energy: Vec<f64> = Vec::new();
    let mut residual = y.to_owned();
    let mut residual_energy = target_energy;
    let mut steps: Vec<SelectionStep> = Vec::new();
    let mut err_sum = 0.0;
    let mut stopped_early = false;

    while steps.len() < config.max_terms.min(n_rows) {
        if residual_energy <= target_energy * RESIDUAL_FLOOR_REL {
            break;
        }

        let scores: Vec<Score> = (0..n_terms)
            .into_par_iter()
            .map(|j| {
                if excluded[j] || selected[j] {
                    return Score::Skip;
                }
                let orthogonalized;
                let v = match &work {
                    None => {
                        let mut v = problem.column(j).to_owned();
                        orthogonalize(&mut v, &basis, &basis_energy);
                        orthogonalized = v;
                        &orthogonalized
                    }
                    Some(w) => &w[j],
                };
                let norm2 = v.dot(v);
                if norm2 < config.collinearity_tol * column_energy[j] {
                    return Score::Collinear;
                }
                let yv = y.dot(v);
                Score::Err((yv * yv) / (target_energy * norm2))
            })
            .collect();

        // The argmax is taken sequentially over the positionally collected
        // scores, so thread scheduling cannot influence the winner.
        let mut best: Option<(usize, f64)> = None;
        for (j, score) in scores.iter().enumerate() {
            match score {
                Score::Skip => {}
                Score::Collinear => excluded[j] = true,
                Score::Err(e) => match best {
                    None => best = Some((j, *e)),
                    Some((_, be)) if *e > be + TIE_TOL => best = Some((j, *e)),
                    Some(_) => {}
                },
            }
        }

        let Some((winner, err)) = best else {
            stopped_early = true;
            break;
        };

        let mut q = match &work {
            None => {
                let mut q = problem.column(winner).to_owned();
                orthogonalize(&mut q, &basis, &basis_energy);
                q
            }
            Some(w) => w[winner].clone(),
        };
        // One extra clean-up projection keeps the basis orthogonal to working
        // precision even after many steps.
        project_out(&mut q, &basis, &basis_energy);
        let q_energy = q.dot(&q);
        if q_energy < config.collinearity_tol * column_energy[winner] {
            // The clean-up pass revealed the winner as dependent after all.
            excluded[winner] = true;
            continue;
        }
        let g = y.dot(&q) / q_energy;

        residual.scaled_add(-g, &q);
        residual_energy = residual.dot(&residual);
        selected[winner] = true;

        if let Some(w) = work.as_mut() {
            let updates: Vec<Option<Array1<f64>>> = (0..n_terms)
                .into_par_iter()
                .map(|j| {
                    if excluded[j] || selected[j] {
                        return None;
                    }
                    let mut v = w[j].clone();
                    for _ in 0..2 {
                        let c = v.dot(&q) / q_energy;
                        v.scaled_add(-c, &q);
                    }
                    Some(v)
                })
                .collect();
            for (j, update) in updates.into_iter().enumerate() {
                if let Some(v) = update {
                    w[j] = v;
                }
            }
        }

        basis.push(q);
        basis_energy.push(q_energy);
        steps.push(SelectionStep {
            term_index: winner,
            err,
            residual_energy,
            g,
        });
        err_sum += err;

        if let Some(threshold) = config.err_sum_threshold {
            if err_sum >= threshold {
                break;
            }
        }
    }

    SelectionTrace::from_parts(steps, target_energy, n_rows, stopped_early)
}

/// Modified Gram–Schmidt against `basis`, run twice; the second pass removes
/// the components that first-pass rounding left behind.
fn orthogonalize(v: &mut Array1<f64>, basis: &[Array1<f64>], basis_energy: &[f64]) {
    for _ in 0..2 {
        project_out(v, basis, basis_energy);
    }
}

fn project_out(v: &mut Array1<f64>, basis: &[Array1<f64>], basis_energy: &[f64]) {
    for (q, &d) in basis.iter().zip(basis_energy) {
        let c = v.dot(q) / d;
        v.scaled_add(-c, q);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{Dictionary, Factor, RegressionProblem, Term};
    use crate::frols::SizeCriterion;
    use ndarray::{Array1, Array2};

    fn named_problem(names: &[&str], columns: Vec<Vec<f64>>, target: Vec<f64>) -> RegressionProblem {
        let n_rows = target.len();
        let terms: Vec<Term> = names
            .iter()
            .map(|n| {
                Term::new(vec![Factor {
                    variable: (*n).to_string(),
                    lag: 1,
                }])
            })
            .collect();
        let dict = Dictionary::from_terms("y", terms.clone()).unwrap();
        let mut data = Array2::zeros((n_rows, columns.len()));
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[[i, j]] = v;
            }
        }
        RegressionProblem::from_parts(data, Array1::from_vec(target), 0, dict.terms().to_vec())
    }

    fn config(max_terms: usize) -> SelectionConfig {
        SelectionConfig {
            max_terms,
            size_criterion: SizeCriterion::Fixed,
            ..SelectionConfig::default()
        }
    }

    #[test]
    fn picks_the_best_single_term() {
        // Target is exactly column b; column a is a poor match.
        let problem = named_problem(
            &["a", "b"],
            vec![vec![1.0, 0.0, 1.0, 0.0], vec![1.0, 2.0, 3.0, 4.0]],
            vec![2.0, 4.0, 6.0, 8.0],
        );
        let trace = frols_select(&problem, &config(1)).unwrap();
        assert_eq!(trace.indices(), vec![1]);
        let step = &trace.steps()[0];
        assert!((step.err - 1.0).abs() < 1e-12);
        assert!(step.residual_energy < 1e-20);
        assert!((step.g - 2.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_columns_recover_exact_coefficients() {
        // Orthogonal design: selection order follows energy contribution and
        // the g values are the exact per-column coefficients.
        let problem = named_problem(
            &["a", "b", "c"],
            vec![
                vec![1.0, 1.0, 0.0, 0.0],
                vec![1.0, -1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, -1.0],
            ],
            // y = 1·a + 3·b + 2·c
            vec![4.0, -2.0, 2.0, -2.0],
        );
        let trace = frols_select(&problem, &config(3)).unwrap();
        assert_eq!(trace.indices(), vec![1, 2, 0]);
        let err_sum = trace.err_sum();
        assert!((err_sum - 1.0).abs() < 1e-12, "err_sum {err_sum}");
        assert!(trace.steps()[2].residual_energy < 1e-20);
        let g: Vec<f64> = trace.steps().iter().map(|s| s.g).collect();
        assert!((g[0] - 3.0).abs() < 1e-12);
        assert!((g[1] - 2.0).abs() < 1e-12);
        assert!((g[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residual_energy_matches_energy_balance() {
        let problem = named_problem(
            &["a", "b", "c"],
            vec![
                vec![1.0, 0.3, -0.2, 0.8, 1.1, -0.4],
                vec![0.2, -1.0, 0.7, 0.1, -0.3, 0.9],
                vec![0.5, 0.5, 0.5, -0.5, -0.5, 0.4],
            ],
            vec![1.3, -0.9, 0.6, 1.0, 0.7, 0.2],
        );
        let trace = frols_select(&problem, &config(3)).unwrap();
        let target_energy = trace.target_energy();
        for (m, step) in trace.steps().iter().enumerate() {
            let explained: f64 = trace.steps()[..=m].iter().map(|s| s.err).sum();
            let implied = target_energy * (1.0 - explained);
            assert!(
                (implied - step.residual_energy).abs() <= 1e-10 * target_energy,
                "step {m}: implied {implied} vs explicit {}",
                step.residual_energy
            );
        }
    }

    #[test]
    fn duplicate_column_is_excluded_not_reselected() {
        // Columns a and b are identical; after a is taken, b must be dropped
        // as collinear rather than picked with a zero contribution.
        let problem = named_problem(
            &["a", "b", "c"],
            vec![
                vec![1.0, 2.0, 3.0, 4.0],
                vec![1.0, 2.0, 3.0, 4.0],
                vec![1.0, -1.0, 1.0, -1.0],
            ],
            vec![3.0, 3.0, 7.0, 7.0],
        );
        let trace = frols_select(&problem, &config(3)).unwrap();
        assert_eq!(trace.len(), 2);
        assert!(trace.indices().contains(&0));
        assert!(trace.indices().contains(&2));
        assert!(!trace.indices().contains(&1));
    }

    #[test]
    fn exact_tie_resolves_to_lowest_index() {
        // Columns b and a are byte-identical except for order; both correlate
        // equally with the target, so index 0 must win.
        let problem = named_problem(
            &["a", "b"],
            vec![vec![1.0, 1.0, -1.0, -1.0], vec![1.0, -1.0, 1.0, -1.0]],
            vec![2.0, 0.0, 0.0, -2.0], // = a + b
        );
        let trace = frols_select(&problem, &config(2)).unwrap();
        assert_eq!(trace.indices()[0], 0);
    }

    #[test]
    fn all_zero_columns_stop_the_search() {
        let problem = named_problem(
            &["a", "b"],
            vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]],
            vec![1.0, 2.0, 3.0],
        );
        let trace = frols_select(&problem, &config(2)).unwrap();
        assert!(trace.is_empty());
        assert!(trace.stopped_early());
    }

    #[test]
    fn zero_target_is_rejected() {
        let problem = named_problem(&["a"], vec![vec![1.0, 2.0]], vec![0.0, 0.0]);
        assert!(matches!(
            frols_select(&problem, &config(1)),
            Err(Error::DegenerateTarget)
        ));
    }

    #[test]
    fn err_threshold_stops_after_crossing_step() {
        let problem = named_problem(
            &["a", "b", "c"],
            vec![
                vec![1.0, 1.0, 0.0, 0.0],
                vec![1.0, -1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, -1.0],
            ],
            vec![4.0, -2.0, 2.0, -2.0],
        );
        let mut cfg = config(3);
        // First step explains 9·2/28 ≈ 0.64 of the energy; threshold 0.5 must
        // stop right there.
        cfg.err_sum_threshold = Some(0.5);
        let trace = frols_select(&problem, &cfg).unwrap();
        assert_eq!(trace.len(), 1);
        assert!(trace.err_sum() >= 0.5);
        assert!(!trace.stopped_early());
    }

    #[test]
    fn max_terms_caps_the_trace() {
        let problem = named_problem(
            &["a", "b", "c"],
            vec![
                vec![1.0, 0.3, -0.2, 0.8],
                vec![0.2, -1.0, 0.7, 0.1],
                vec![0.5, 0.5, 0.5, -0.5],
            ],
            vec![1.3, -0.9, 0.6, 1.0],
        );
        let trace = frols_select(&problem, &config(2)).unwrap();
        assert_eq!(trace.len(), 2);
        assert!(!trace.stopped_early());
    }

    #[test]
    fn incremental_scan_selects_identical_terms() {
        // A moderately correlated 8-column problem; both scan strategies must
        // agree on the full selection order.
        let n = 40;
        let mut columns = Vec::new();
        for j in 0..8usize {
            let col: Vec<f64> = (0..n)
                .map(|i| {
                    let t = i as f64;
                    ((t * 0.37 + j as f64 * 1.3).sin() + 0.25 * (t * 0.11 * (j as f64 + 1.0)).cos()).powi(1 + (j % 2) as i32)
                })
                .collect();
            columns.push(col);
        }
        let target: Vec<f64> = (0..n)
            .map(|i| {
                2.0 * columns[1][i] - 1.5 * columns[4][i] + 0.7 * columns[6][i]
                    + 0.01 * ((i * 2654435761usize % 97) as f64 / 97.0 - 0.5)
            })
            .collect();
        let names: Vec<String> = (0..8).map(|j| format!("c{j:02}")).collect();
        let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let problem = named_problem(&name_refs, columns, target);

        let rescan = frols_select(&problem, &config(6)).unwrap();
        let mut cfg = config(6);
        cfg.scan_mode = ScanMode::Incremental;
        let incremental = frols_select(&problem, &cfg).unwrap();
        assert_eq!(rescan.indices(), incremental.indices());
        assert_eq!(rescan.len(), 6);
    }

    #[test]
    fn selection_is_reproducible_across_runs() {
        let problem = named_problem(
            &["a", "b", "c", "d"],
            vec![
                vec![1.0, 0.3, -0.2, 0.8, 1.1, -0.4, 0.9, 0.0],
                vec![0.2, -1.0, 0.7, 0.1, -0.3, 0.9, 0.2, 0.4],
                vec![0.5, 0.5, 0.5, -0.5, -0.5, 0.4, -0.1, 0.3],
                vec![0.9, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
            ],
            vec![1.3, -0.9, 0.6, 1.0, 0.7, 0.2, -0.5, 0.8],
        );
        let a = frols_select(&problem, &config(4)).unwrap();
        for _ in 0..5 {
            let b = frols_select(&problem, &config(4)).unwrap();
            assert_eq!(a, b);
        }
    }
}
