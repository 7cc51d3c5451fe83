//! Selection-engine checks against independent oracles.
//!
//! The oracles deliberately take different numerical routes than the engine:
//! exhaustive least-squares refits through the normal equations, candidate
//! orthogonalization via regression residuals, and seeded Monte-Carlo
//! recovery of known systems.

use std::collections::BTreeSet;

use epinarx::data::{Dataset, EpochDay, SplitSpec, TimeSeries};
use epinarx::dictionary::{
    build_dictionary, evaluate, Factor, LagSpec, RegressionProblem, Term, VariableLags,
};
use epinarx::frols::{
    estimate_parameters, frols_select, identify_full, ScanMode, SelectionConfig, SizeCriterion,
};
use epinarx::linalg;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn start_day() -> EpochDay {
    EpochDay::parse_iso("2020-03-04").unwrap()
}

/// A dense random regression problem: Gaussian columns, target built from a
/// few of them plus noise.
fn random_problem(seed: u64, max_rows: usize, max_cols: usize) -> RegressionProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(20..=max_rows);
    let m = rng.gen_range(2..=max_cols);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut columns = Array2::zeros((n, m));
    for v in columns.iter_mut() {
        *v = normal.sample(&mut rng);
    }
    let k = rng.gen_range(1..=3.min(m));
    let mut target = Array1::zeros(n);
    for _ in 0..k {
        let j = rng.gen_range(0..m);
        let coef: f64 = rng.gen_range(-2.0..2.0);
        for i in 0..n {
            target[i] += coef * columns[[i, j]];
        }
    }
    for v in target.iter_mut() {
        *v += 0.1 * normal.sample(&mut rng);
    }
    let terms = (0..m)
        .map(|j| Term::new(vec![Factor::new(format!("x{j:03}"), 1)]))
        .collect();
    RegressionProblem::from_parts(columns, target, 0, terms)
}

fn subset_matrix(problem: &RegressionProblem, indices: &[usize]) -> Array2<f64> {
    let mut m = Array2::zeros((problem.n_rows(), indices.len()));
    for (slot, &idx) in indices.iter().enumerate() {
        for row in 0..problem.n_rows() {
            m[[row, slot]] = problem.columns()[[row, idx]];
        }
    }
    m
}

/// Residual sum of squares of the least-squares fit on a column subset,
/// through the normal equations.
fn oracle_rss(problem: &RegressionProblem, indices: &[usize]) -> f64 {
    let x = subset_matrix(problem, indices);
    let theta = linalg::least_squares(x.view(), problem.target().view()).unwrap();
    linalg::residual_sum_of_squares(x.view(), problem.target().view(), theta.view())
}

fn fixed_config(max_terms: usize) -> SelectionConfig {
    SelectionConfig {
        max_terms,
        size_criterion: SizeCriterion::Fixed,
        ..SelectionConfig::default()
    }
}

#[test]
fn first_pick_matches_best_single_column_refit() {
    for seed in 0..20 {
        let problem = random_problem(seed, 120, 25);
        let trace = frols_select(&problem, &fixed_config(1)).unwrap();
        let picked = trace.indices()[0];
        let picked_rss = oracle_rss(&problem, &[picked]);
        let y_energy: f64 = problem.target().dot(problem.target());
        for j in 0..problem.n_terms() {
            let rss = oracle_rss(&problem, &[j]);
            assert!(
                picked_rss <= rss + 1e-9 * y_energy,
                "seed {seed}: picked column {picked} (rss {picked_rss}) but column {j} fits better ({rss})"
            );
        }
    }
}

#[test]
fn every_step_maximizes_rss_drop_over_exhaustive_refits() {
    // Greedy ERR maximization is equivalent to picking the candidate whose
    // addition minimizes the least-squares residual; verify step by step
    // against refits of every alternative.
    for seed in 0..10 {
        let problem = random_problem(seed + 100, 80, 15);
        let steps = 6.min(problem.n_terms());
        let trace = frols_select(&problem, &fixed_config(steps)).unwrap();
        let y_energy: f64 = problem.target().dot(problem.target());
        let indices = trace.indices();
        for m in 0..indices.len() {
            let mut chosen: Vec<usize> = indices[..=m].to_vec();
            let chosen_rss = oracle_rss(&problem, &chosen);
            for j in 0..problem.n_terms() {
                if indices[..m].contains(&j) {
                    continue;
                }
                *chosen.last_mut().unwrap() = j;
                let alternative = oracle_rss(&problem, &chosen);
                assert!(
                    chosen_rss <= alternative + 1e-9 * y_energy,
                    "seed {seed} step {m}: chose {} (rss {chosen_rss}) over {j} (rss {alternative})",
                    indices[m]
                );
            }
        }
    }
}

#[test]
fn step_err_dominates_all_survivors_by_independent_orthogonalization() {
    // Independent rescan: a candidate's component orthogonal to the selected
    // columns is the residual of regressing the candidate on them. Every
    // selected step's ERR must be at least every survivor's ERR.
    for seed in 0..10 {
        let problem = random_problem(seed + 300, 80, 12);
        let steps = 5.min(problem.n_terms());
        let trace = frols_select(&problem, &fixed_config(steps)).unwrap();
        let y = problem.target();
        let y_energy = y.dot(y);
        let indices = trace.indices();
        for (m, step) in trace.steps().iter().enumerate() {
            let selected = &indices[..m];
            for j in 0..problem.n_terms() {
                if selected.contains(&j) {
                    continue;
                }
                let phi = problem.column(j).to_owned();
                let v = if selected.is_empty() {
                    phi.clone()
                } else {
                    let x = subset_matrix(&problem, selected);
                    let theta = linalg::least_squares(x.view(), phi.view()).unwrap();
                    &phi - &x.dot(&theta)
                };
                let norm2 = v.dot(&v);
                if norm2 < 1e-10 * phi.dot(&phi) {
                    continue; // collinear: not a survivor
                }
                let yv = y.dot(&v);
                let candidate_err = (yv * yv) / (y_energy * norm2);
                assert!(
                    step.err >= candidate_err - 1e-9,
                    "seed {seed} step {m}: err {} below survivor {j}'s {candidate_err}",
                    step.err
                );
            }
        }
    }
}

#[test]
fn selected_parameters_match_normal_equations_refit() {
    for seed in 0..15 {
        let problem = random_problem(seed + 500, 150, 30);
        let steps = 8.min(problem.n_terms());
        let trace = frols_select(&problem, &fixed_config(steps)).unwrap();
        let theta = estimate_parameters(&problem, &trace).unwrap();
        let x = subset_matrix(&problem, &trace.indices());
        let oracle = linalg::least_squares(x.view(), problem.target().view()).unwrap();
        let scale = oracle.iter().fold(1e-30_f64, |a, v| a.max(v.abs()));
        for (slot, (&ours, &direct)) in theta.iter().zip(oracle.iter()).enumerate() {
            assert!(
                (ours - direct).abs() <= 1e-8 * scale,
                "seed {seed} slot {slot}: {ours} vs {direct}"
            );
        }
    }
}

#[test]
fn full_dictionary_selection_reaches_the_full_ols_residual() {
    for seed in 0..10 {
        let problem = random_problem(seed + 700, 100, 12);
        let m = problem.n_terms();
        let trace = frols_select(&problem, &fixed_config(m)).unwrap();
        assert_eq!(trace.len(), m, "seed {seed}: Gaussian columns should all be independent");
        let all: Vec<usize> = (0..m).collect();
        let oracle = oracle_rss(&problem, &all);
        let ours = trace.residual_energy_at(m);
        let y_energy: f64 = problem.target().dot(problem.target());
        assert!(
            (ours - oracle).abs() <= 1e-8 * y_energy,
            "seed {seed}: residual {ours} vs oracle {oracle}"
        );
    }
}

#[test]
fn energy_identity_against_explicit_refit_residual() {
    // ‖y‖²·(1 − Σ ERR) must equal the squared norm of the residual of the
    // least-squares fit on the selected columns, and the trace's recorded
    // energy must agree with both.
    for seed in 0..40 {
        let problem = random_problem(seed + 900, 200, 40);
        let steps = problem.n_terms().min(20);
        let trace = frols_select(&problem, &fixed_config(steps)).unwrap();
        let y_energy = trace.target_energy();
        let implied = y_energy * (1.0 - trace.err_sum());
        let recorded = trace.residual_energy_at(trace.len());
        let oracle = oracle_rss(&problem, &trace.indices());
        assert!(
            (implied - oracle).abs() <= 1e-10 * y_energy,
            "seed {seed}: implied {implied} vs refit {oracle}"
        );
        assert!(
            (recorded - oracle).abs() <= 1e-10 * y_energy,
            "seed {seed}: recorded {recorded} vs refit {oracle}"
        );
    }
}

/// The 3-term system y(t) = 0.5·y(t−1) − 0.3·u(t−1) + 0.1·u²(t−1) + e with
/// white Gaussian input, as a dataset. Noise is scaled to `noise_frac` of the
/// noise-free output's standard deviation.
fn three_term_dataset(seed: u64, n: usize, noise_frac: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let u: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();

    let step = |y_prev: f64, u_prev: f64| 0.5 * y_prev - 0.3 * u_prev + 0.1 * u_prev * u_prev;

    // Pass 1: noise-free output fixes the scale.
    let mut clean = vec![0.0];
    for t in 1..n {
        clean.push(step(clean[t - 1], u[t - 1]));
    }
    let mean = clean.iter().sum::<f64>() / n as f64;
    let sd = (clean.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();

    // Pass 2: same input, process noise at the requested fraction of scale.
    let mut y = vec![0.0];
    for t in 1..n {
        y.push(step(y[t - 1], u[t - 1]) + noise_frac * sd * normal.sample(&mut rng));
    }

    Dataset::new(
        vec![
            TimeSeries::new("y", start_day(), y).unwrap(),
            TimeSeries::new("u", start_day(), u).unwrap(),
        ],
        "y",
    )
    .unwrap()
}

fn cubic_siso_spec() -> LagSpec {
    LagSpec::new(
        "y",
        Some((1, 1)),
        vec![VariableLags::new("u", 1, 1)],
        3,
        false,
    )
    .unwrap()
}

fn term_names(terms: &[Term]) -> BTreeSet<String> {
    terms.iter().map(|t| t.to_string()).collect()
}

#[test]
fn three_term_system_is_recovered_across_seeds() {
    let expected: BTreeSet<String> = ["y(t-1)", "u(t-1)", "u^2(t-1)"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let truth = [("y(t-1)", 0.5), ("u(t-1)", -0.3), ("u^2(t-1)", 0.1)];
    let config = SelectionConfig::default();
    let split = SplitSpec {
        train_len: 500,
        test_len: 0,
    };
    let mut recovered = 0;
    for seed in 0..30 {
        let dataset = three_term_dataset(seed, 500, 0.01);
        let id = identify_full(&dataset, &cubic_siso_spec(), &config, &split).unwrap();
        if term_names(id.model.terms()) != expected {
            continue;
        }
        recovered += 1;
        for (term, &coef) in id.model.terms().iter().zip(id.model.parameters()) {
            let expect = truth
                .iter()
                .find(|(n, _)| *n == term.to_string())
                .unwrap()
                .1;
            assert!(
                (coef - expect).abs() <= 0.05 * expect.abs(),
                "seed {seed} {term}: {coef} vs {expect}"
            );
        }
    }
    assert!(recovered >= 28, "only {recovered}/30 seeds recovered the term set");
}

#[test]
fn clean_three_term_system_recovers_exactly() {
    let split = SplitSpec {
        train_len: 300,
        test_len: 0,
    };
    let dataset = three_term_dataset(42, 300, 0.0);
    let id = identify_full(&dataset, &cubic_siso_spec(), &SelectionConfig::default(), &split).unwrap();
    let names = term_names(id.model.terms());
    let expected: BTreeSet<String> = ["y(t-1)", "u(t-1)", "u^2(t-1)"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    assert_eq!(names, expected);
    for (term, &coef) in id.model.terms().iter().zip(id.model.parameters()) {
        let expect = match term.to_string().as_str() {
            "y(t-1)" => 0.5,
            "u(t-1)" => -0.3,
            "u^2(t-1)" => 0.1,
            other => panic!("unexpected {other}"),
        };
        assert!((coef - expect).abs() < 1e-9, "{term}: {coef}");
    }
    // Noise-free data: every fold must agree on the same term set.
    let first: BTreeSet<usize> = id.folds[0].term_indices.iter().copied().collect();
    for (i, fold) in id.folds.iter().enumerate() {
        let set: BTreeSet<usize> = fold.term_indices.iter().copied().collect();
        assert_eq!(set, first, "fold {i} disagrees");
    }
}

/// Output built from two delayed copies of the input plus a constant, the
/// structure of a dead-time linear channel: y(t) = a·u(t−12) + b·u(t−40) + c.
#[test]
fn delayed_input_lags_and_constant_are_recovered() {
    let (a, b, c) = (3.5551e4, -6.2117e3, -1.17395e4);
    let n = 529;
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let u: Vec<f64> = (0..n)
        .map(|t| 1.0 + 0.4 * (t as f64 * 0.07).sin() + 0.25 * normal.sample(&mut rng))
        .collect();
    let clean: Vec<f64> = (0..n)
        .map(|t| {
            let u12 = if t >= 12 { u[t - 12] } else { u[0] };
            let u40 = if t >= 40 { u[t - 40] } else { u[0] };
            a * u12 + b * u40 + c
        })
        .collect();
    let mean = clean.iter().sum::<f64>() / n as f64;
    let sd = (clean.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
    let y: Vec<f64> = clean
        .iter()
        .map(|v| v + 0.01 * sd * normal.sample(&mut rng))
        .collect();
    let dataset = Dataset::new(
        vec![
            TimeSeries::new("y", start_day(), y).unwrap(),
            TimeSeries::new("u", start_day(), u).unwrap(),
        ],
        "y",
    )
    .unwrap();

    let spec = LagSpec::new("y", None, vec![VariableLags::new("u", 1, 45)], 1, true).unwrap();
    let split = SplitSpec {
        train_len: 361,
        test_len: 168,
    };
    let id = identify_full(&dataset, &spec, &SelectionConfig::default(), &split).unwrap();
    let names = term_names(id.model.terms());
    let expected: BTreeSet<String> = ["u(t-12)", "u(t-40)", "1"].iter().map(|s| s.to_string()).collect();
    assert_eq!(names, expected, "picked terms {names:?}");
    for (term, &coef) in id.model.terms().iter().zip(id.model.parameters()) {
        let expect = match term.to_string().as_str() {
            "u(t-12)" => a,
            "u(t-40)" => b,
            "1" => c,
            other => panic!("unexpected {other}"),
        };
        assert!(
            (coef - expect).abs() <= 0.05 * expect.abs(),
            "{term}: {coef} vs {expect}"
        );
    }
}

#[test]
fn incremental_mode_matches_rescan_on_a_dictionary_problem() {
    let dataset = three_term_dataset(7, 400, 0.05);
    let spec = LagSpec::new(
        "y",
        Some((1, 2)),
        vec![VariableLags::new("u", 1, 2)],
        3,
        true,
    )
    .unwrap();
    let dict = build_dictionary(&spec).unwrap();
    let problem = evaluate(&dict, &dataset).unwrap();

    let rescan = frols_select(&problem, &fixed_config(12)).unwrap();
    let mut config = fixed_config(12);
    config.scan_mode = ScanMode::Incremental;
    let incremental = frols_select(&problem, &config).unwrap();
    assert_eq!(rescan.indices(), incremental.indices());
}

#[test]
fn null_coefficient_p_values_are_roughly_uniform() {
    // A regressor with a true zero coefficient has a t-distributed statistic,
    // so its p-value is uniform on (0,1): across seeds, about 5% fall below
    // 0.05. The generous band still catches systematic errors (e.g. a factor
    // of two in the variance, or one-sided tails).
    let normal = Normal::new(0.0, 1.0).unwrap();
    let trials = 300;
    let mut below = 0;
    let mut sum = 0.0;
    for seed in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64 + 40_000);
        let n = 50;
        let mut columns = Array2::zeros((n, 2));
        let mut y = Array1::zeros(n);
        for i in 0..n {
            let x0 = (i as f64 * 0.3).sin() + 1.2;
            let x1: f64 = normal.sample(&mut rng);
            columns[[i, 0]] = x0;
            columns[[i, 1]] = x1;
            y[i] = 2.0 * x0 + normal.sample(&mut rng);
        }
        let terms = vec![
            Term::new(vec![Factor::new("a", 1)]),
            Term::new(vec![Factor::new("b", 1)]),
        ];
        let problem = RegressionProblem::from_parts(columns, y, 0, terms.clone());
        let model = epinarx::frols::IdentifiedModel::from_coefficients(
            "y",
            terms.into_iter().map(|t| (t, 0.0)).collect(),
        )
        .unwrap();
        let p = epinarx::frols::compute_p_values(&problem, &model).unwrap();
        sum += p[1];
        if p[1] < 0.05 {
            below += 1;
        }
    }
    let frac = below as f64 / trials as f64;
    assert!(
        (0.01..=0.12).contains(&frac),
        "P(p < 0.05) = {frac}, expected ≈ 0.05"
    );
    let mean = sum / trials as f64;
    assert!((mean - 0.5).abs() < 0.1, "mean null p-value {mean}, expected ≈ 0.5");
}
