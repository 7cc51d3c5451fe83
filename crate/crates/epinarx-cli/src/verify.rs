//! Self-verification suite: executable checks over synthetic fixtures
//! covering dictionary construction, selection, estimation, the epidemic
//! model, prediction, reporting, and configuration handling.
//!
//! The rendered report is deterministic for a given seed — no timestamps,
//! no timings — so identical invocations produce byte-identical output.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use epinarx::data::{Dataset, EpochDay, SplitSpec, TimeSeries};
use epinarx::dictionary::{build_dictionary, evaluate, LagSpec, RegressionProblem, VariableLags};
use epinarx::epi::{
    estimate_rates, reproduction_number, seir_integrate, RateEstimation, RatePath, SEIRParams,
    SEIRState, Smoothing,
};
use epinarx::frols::{
    estimate_parameters, frols_select, identify_full, squared_correlation, IdentifiedModel,
    ScanMode, SelectionConfig, SizeCriterion,
};
use epinarx::linalg::least_squares;
use epinarx::predict::{free_run_simulate, one_step_predict};
use epinarx::report::{model_report_csv, parse_model_report_csv, Provenance};

use crate::config::PipelineConfig;
use crate::synth::{
    delayed_response, delayed_response_spec, delayed_response_truth, rendered_terms,
    three_term_narx, three_term_spec, three_term_truth,
};

/// One executed check.
#[derive(Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// The whole suite's outcome.
#[derive(Debug)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Deterministic text form: one PASS/FAIL line per check plus a summary.
    pub fn render(&self) -> String {
        let mut out = format!("verification suite: seed {}\n", self.seed);
        for check in &self.checks {
            if check.passed {
                writeln!(out, "PASS {}", check.name).expect("string writes cannot fail");
            } else {
                writeln!(out, "FAIL {}: {}", check.name, check.detail)
                    .expect("string writes cannot fail");
            }
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        writeln!(
            out,
            "result: {} checks, {} passed, {} failed",
            self.checks.len(),
            self.checks.len() - failed,
            failed
        )
        .expect("string writes cannot fail");
        out
    }
}

type CheckResult = Result<(), String>;

/// A random multi-series dataset evaluated through a quadratic lag
/// dictionary — the regression problems the algebraic checks run on.
fn random_problem(rng: &mut ChaCha8Rng) -> RegressionProblem {
    let n = rng.gen_range(90..=180);
    let normal = Normal::new(0.0, 1.0).expect("unit normal is valid");
    let start = EpochDay::parse_iso("2020-03-04").expect("valid date");
    let series = |rng: &mut ChaCha8Rng, name: &str| {
        let values: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
        TimeSeries::new(name, start, values).expect("finite by construction")
    };
    let dataset = Dataset::new(
        vec![
            series(rng, "y"),
            series(rng, "a"),
            series(rng, "b"),
        ],
        "y",
    )
    .expect("aligned by construction");
    let spec = LagSpec::new(
        "y",
        Some((1, 2)),
        vec![VariableLags::new("a", 1, 3), VariableLags::new("b", 1, 3)],
        2,
        true,
    )
    .expect("fixed spec is valid");
    let dictionary = build_dictionary(&spec).expect("non-empty spec");
    evaluate(&dictionary, &dataset).expect("dataset covers the lags")
}

fn exhaustive_config() -> SelectionConfig {
    SelectionConfig {
        max_terms: usize::MAX,
        size_criterion: SizeCriterion::Fixed,
        ..SelectionConfig::default()
    }
}

fn check_dictionary_exactness() -> CheckResult {
    let spec = LagSpec::new(
        "y",
        Some((1, 1)),
        vec![VariableLags::new("u", 1, 1)],
        3,
        false,
    )
    .map_err(|e| e.to_string())?;
    let dictionary = build_dictionary(&spec).map_err(|e| e.to_string())?;
    let rendered = rendered_terms(dictionary.terms());
    let expected = [
        "u(t-1)",
        "y(t-1)",
        "u^2(t-1)",
        "u(t-1)*y(t-1)",
        "y^2(t-1)",
        "u^3(t-1)",
        "u^2(t-1)*y(t-1)",
        "u(t-1)*y^2(t-1)",
        "y^3(t-1)",
    ];
    if rendered != expected {
        return Err(format!("dictionary order {rendered:?}"));
    }
    Ok(())
}

fn check_energy_identity(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x01);
    for i in 0..20 {
        let problem = random_problem(&mut rng);
        let trace = frols_select(&problem, &exhaustive_config()).map_err(|e| e.to_string())?;
        let energy = trace.target_energy();
        let implied = energy * (1.0 - trace.err_sum());
        let recorded = trace
            .steps()
            .last()
            .map(|s| s.residual_energy)
            .unwrap_or(energy);
        if (implied - recorded).abs() > 1e-10 * energy {
            return Err(format!(
                "problem {i}: implied residual {implied} vs recorded {recorded}"
            ));
        }
    }
    Ok(())
}

fn subset_columns(problem: &RegressionProblem, indices: &[usize]) -> Array2<f64> {
    let columns = problem.columns();
    Array2::from_shape_fn((columns.nrows(), indices.len()), |(i, j)| {
        columns[[i, indices[j]]]
    })
}

fn rss(a: &Array2<f64>, theta: &[f64], y: ArrayView1<'_, f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..a.nrows() {
        let mut fit = 0.0;
        for (j, t) in theta.iter().enumerate() {
            fit += a[[i, j]] * t;
        }
        total += (y[i] - fit) * (y[i] - fit);
    }
    total
}

fn check_ols_equivalence(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x02);
    for i in 0..10 {
        let problem = random_problem(&mut rng);
        let trace = frols_select(&problem, &exhaustive_config()).map_err(|e| e.to_string())?;
        let params = estimate_parameters(&problem, &trace).map_err(|e| e.to_string())?;
        let subset = subset_columns(&problem, &trace.indices());
        let oracle = least_squares(subset.view(), problem.target().view())
            .map_err(|e| e.to_string())?;
        let scale = oracle
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()))
            .max(1e-30);
        for (k, (have, want)) in params.iter().zip(oracle.iter()).enumerate() {
            if (have - want).abs() > 1e-8 * scale {
                return Err(format!("problem {i} parameter {k}: {have} vs {want}"));
            }
        }
        // The selection's final residual equals the oracle's RSS.
        let recorded = trace
            .steps()
            .last()
            .map(|s| s.residual_energy)
            .unwrap_or_else(|| trace.target_energy());
        let oracle_rss = rss(&subset, oracle.as_slice().unwrap(), problem.target().view());
        if (recorded - oracle_rss).abs() > 1e-8 * trace.target_energy() {
            return Err(format!("problem {i}: residual {recorded} vs rss {oracle_rss}"));
        }
    }
    Ok(())
}

fn check_first_pick_is_argmax(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x03);
    for i in 0..10 {
        let problem = random_problem(&mut rng);
        let trace = frols_select(&problem, &exhaustive_config()).map_err(|e| e.to_string())?;
        let first = trace.steps().first().ok_or("empty trace")?;
        let mut best = (0usize, f64::NEG_INFINITY);
        for j in 0..problem.n_terms() {
            let column = problem.columns().column(j);
            if let Ok(c) = squared_correlation(column, problem.target().view()) {
                if c > best.1 {
                    best = (j, c);
                }
            }
        }
        if best.0 != first.term_index {
            return Err(format!(
                "problem {i}: greedy picked {} but argmax is {}",
                first.term_index, best.0
            ));
        }
        if (best.1 - first.err).abs() > 1e-12 {
            return Err(format!("problem {i}: err {} vs {}", first.err, best.1));
        }
    }
    Ok(())
}

fn check_scan_modes_agree(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x04);
    for i in 0..10 {
        let problem = random_problem(&mut rng);
        let rescan = frols_select(&problem, &exhaustive_config()).map_err(|e| e.to_string())?;
        let incremental = frols_select(
            &problem,
            &SelectionConfig {
                scan_mode: ScanMode::Incremental,
                ..exhaustive_config()
            },
        )
        .map_err(|e| e.to_string())?;
        if rescan.indices() != incremental.indices() {
            return Err(format!(
                "problem {i}: rescan {:?} vs incremental {:?}",
                rescan.indices(),
                incremental.indices()
            ));
        }
    }
    Ok(())
}

/// Matches a fitted model against (rendered term, coefficient) truth within
/// `tol_rel` per coefficient.
fn match_model(model: &IdentifiedModel, truth: &[(String, f64)], tol_rel: f64) -> CheckResult {
    let rendered = rendered_terms(model.terms());
    let mut sorted_have = rendered.clone();
    sorted_have.sort();
    let mut sorted_want: Vec<String> = truth.iter().map(|(t, _)| t.clone()).collect();
    sorted_want.sort();
    if sorted_have != sorted_want {
        return Err(format!("terms {rendered:?}"));
    }
    for (term, want) in truth {
        let k = rendered
            .iter()
            .position(|t| t == term)
            .expect("term sets match");
        let have = model.parameters()[k];
        if (have - want).abs() > tol_rel * want.abs() {
            return Err(format!("{term}: coefficient {have} vs {want}"));
        }
    }
    Ok(())
}

/// The selection settings the recovery fixtures are calibrated for: a
/// heavier size penalty than the pipeline default, which holds the
/// false-term rate at zero across the calibration seeds.
fn recovery_config() -> SelectionConfig {
    SelectionConfig {
        size_criterion: SizeCriterion::Apress { alpha: 6.0 },
        ..SelectionConfig::default()
    }
}

fn identify_three_term(seed: u64) -> Result<IdentifiedModel, String> {
    let data = three_term_narx(seed, 500, 0.01);
    let split = SplitSpec::new(500, 0).map_err(|e| e.to_string())?;
    identify_full(&data, &three_term_spec(), &recovery_config(), &split)
        .map(|id| id.model)
        .map_err(|e| e.to_string())
}

fn check_three_term_recovery(seed: u64) -> CheckResult {
    let model = identify_three_term(seed)?;
    match_model(&model, &three_term_truth(), 0.05)
}

fn check_delayed_recovery(seed: u64) -> CheckResult {
    let data = delayed_response(seed, 529, 0.01);
    let split = SplitSpec::new(361, 168).map_err(|e| e.to_string())?;
    let model = identify_full(&data, &delayed_response_spec(), &recovery_config(), &split)
        .map(|id| id.model)
        .map_err(|e| e.to_string())?;
    match_model(&model, &delayed_response_truth(), 0.05)
}

fn check_identification_determinism(seed: u64) -> CheckResult {
    let first = identify_three_term(seed)?;
    let second = identify_three_term(seed)?;
    if rendered_terms(first.terms()) != rendered_terms(second.terms()) {
        return Err("term sets differ between runs".to_string());
    }
    if first.parameters() != second.parameters() {
        return Err("parameters differ between runs".to_string());
    }
    Ok(())
}

fn check_seir_conservation() -> CheckResult {
    let population = 1e6;
    let params = SEIRParams::new(
        population,
        RatePath::Constant(0.3),
        RatePath::Constant(0.001),
    );
    let initial = SEIRState::new(population - 100.0, 0.0, 100.0, 0.0, 0.0);
    let trajectory =
        seir_integrate(&params, &initial, 500, 0.1).map_err(|e| e.to_string())?;
    let worst = trajectory
        .iter()
        .map(|s| (s.total() - population).abs())
        .fold(0.0, f64::max);
    if worst > 1e-9 * population {
        return Err(format!("conservation drift {worst:e}"));
    }
    Ok(())
}

fn check_disease_free_constancy() -> CheckResult {
    let params = SEIRParams::new(5e5, RatePath::Constant(0.0), RatePath::Constant(0.01));
    let initial = SEIRState::new(4e5, 0.0, 0.0, 7e4, 3e4);
    let trajectory = seir_integrate(&params, &initial, 365, 0.1).map_err(|e| e.to_string())?;
    for state in &trajectory {
        if state.susceptible != 4e5
            || state.exposed != 0.0
            || state.infected != 0.0
            || state.removed != 7e4
            || state.deceased != 3e4
        {
            return Err(format!("state drifted on day {}", state.day));
        }
    }
    Ok(())
}

fn check_closed_loop_rates() -> CheckResult {
    let population = 1e7;
    let (beta_true, lethality_true) = (0.3, 0.001);
    let mut params = SEIRParams::new(
        population,
        RatePath::Constant(beta_true),
        RatePath::Constant(lethality_true),
    );
    params.delta = 0.2;
    params.gamma = 0.28;
    let (i0, e0) = (1e4, 1.444e4);
    let initial = SEIRState::new(population - i0 - e0, e0, i0, 0.0, 0.0);
    let trajectory = seir_integrate(&params, &initial, 200, 0.1).map_err(|e| e.to_string())?;

    let start = EpochDay::parse_iso("2020-03-04").expect("valid date");
    let cases = TimeSeries::new(
        "cases",
        start,
        trajectory.iter().map(|s| s.infected).collect(),
    )
    .map_err(|e| e.to_string())?;
    let deaths = TimeSeries::new(
        "deaths",
        start,
        trajectory.iter().map(|s| s.deceased).collect(),
    )
    .map_err(|e| e.to_string())?;
    let estimation = RateEstimation {
        population,
        delta: 0.2,
        gamma: 0.28,
        initial_removed: 0.0,
        smoothing: Smoothing::Raw,
    };
    let rates = estimate_rates(&cases, &deaths, &estimation).map_err(|e| e.to_string())?;
    for t in 5..=190 {
        let beta = rates.beta.values()[t];
        let lethality = rates.lethality.values()[t];
        if (beta - beta_true).abs() > 0.02 * beta_true {
            return Err(format!("day {t}: beta {beta}"));
        }
        if (lethality - lethality_true).abs() > 0.02 * lethality_true {
            return Err(format!("day {t}: lethality {lethality}"));
        }
    }
    Ok(())
}

fn check_reproduction_number() -> CheckResult {
    let n = 6.7e7;
    let gamma = 1.0 / 14.0;
    let rn = reproduction_number(0.3, n, 0.001, gamma, n).map_err(|e| e.to_string())?;
    let expected = 0.3 / (0.001 + gamma);
    if (rn - expected).abs() > 1e-12 {
        return Err(format!("{rn} vs {expected}"));
    }
    let exact = reproduction_number(0.3, n, 0.0, gamma, n).map_err(|e| e.to_string())?;
    if exact != 0.3 / gamma {
        return Err(format!("S=N, r=0 gave {exact}"));
    }
    let base = reproduction_number(0.3, 0.5 * n, 0.004, gamma, n).map_err(|e| e.to_string())?;
    let scaled =
        reproduction_number(1024.0 * 0.3, 0.5 * n, 0.004, gamma, n).map_err(|e| e.to_string())?;
    if scaled != 1024.0 * base {
        return Err(format!("homogeneity broke: {scaled} vs {}", 1024.0 * base));
    }
    Ok(())
}

fn check_prediction_mode_parity(seed: u64) -> CheckResult {
    let data = delayed_response(seed ^ 0x05, 200, 0.0);
    let model = IdentifiedModel::from_coefficients(
        "y",
        delayed_response_truth()
            .into_iter()
            .map(|(term, coeff)| (parse_simple_term(&term), coeff))
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let one_step = one_step_predict(&model, &data).map_err(|e| e.to_string())?;
    let max_lag = model.max_lag();
    let free = free_run_simulate(&model, &data, &data.output().values()[..max_lag])
        .map_err(|e| e.to_string())?;
    if one_step.predictions.values() != free.predictions.values() {
        return Err("input-only model differs between prediction modes".to_string());
    }
    Ok(())
}

/// Builds the handful of term shapes the fixtures use (`u(t-12)`, `1`).
fn parse_simple_term(rendered: &str) -> epinarx::dictionary::Term {
    use epinarx::dictionary::{Factor, Term};
    if rendered == "1" {
        return Term::constant();
    }
    let (var, rest) = rendered.split_once("(t-").expect("fixture term shape");
    let lag: usize = rest
        .trim_end_matches(')')
        .parse()
        .expect("fixture lag is numeric");
    Term::new(vec![Factor::new(var, lag)])
}

fn check_report_round_trip(seed: u64) -> CheckResult {
    let model = identify_three_term(seed)?;
    let provenance = Provenance::new(b"verify", b"synthetic");
    let csv = model_report_csv(&model, &provenance);
    let rows = parse_model_report_csv(&csv).map_err(|e| e.to_string())?;
    if rows.len() != model.len() {
        return Err(format!("{} rows for {} terms", rows.len(), model.len()));
    }
    for (k, row) in rows.iter().enumerate() {
        if row.index != k + 1 {
            return Err(format!("row {k} has index {}", row.index));
        }
        if row.term != model.terms()[k].to_string() {
            return Err(format!("row {k} term {}", row.term));
        }
        let want = model.parameters()[k];
        if (row.parameter - want).abs() > 1e-4 * want.abs().max(1e-30) {
            return Err(format!("row {k} parameter {} vs {want}", row.parameter));
        }
    }
    Ok(())
}

fn check_config_round_trip() -> CheckResult {
    let config = PipelineConfig::default_config();
    let text = config.to_toml_string().map_err(|e| e.to_string())?;
    let parsed: PipelineConfig = toml::from_str(&text).map_err(|e| e.to_string())?;
    if parsed != config {
        return Err("config did not round-trip".to_string());
    }
    Ok(())
}

fn check_config_rejects_zero_max_terms() -> CheckResult {
    let mut config = PipelineConfig::default_config();
    config.selection.max_terms = 0;
    match config.validate() {
        Err(_) => Ok(()),
        Ok(()) => Err("max_terms = 0 was accepted".to_string()),
    }
}

/// Runs every check and collects the outcomes.
pub fn run_synthetic_suite(seed: u64) -> VerifyReport {
    let mut checks = Vec::new();
    let mut run = |name: &'static str, result: CheckResult| {
        checks.push(match result {
            Ok(()) => Check {
                name,
                passed: true,
                detail: String::new(),
            },
            Err(detail) => Check {
                name,
                passed: false,
                detail,
            },
        });
    };

    run("dictionary-exactness", check_dictionary_exactness());
    run("energy-identity", check_energy_identity(seed));
    run("ols-equivalence", check_ols_equivalence(seed));
    run("greedy-first-pick", check_first_pick_is_argmax(seed));
    run("scan-mode-equivalence", check_scan_modes_agree(seed));
    run("three-term-recovery", check_three_term_recovery(seed));
    run("delayed-response-recovery", check_delayed_recovery(seed));
    run(
        "identification-determinism",
        check_identification_determinism(seed),
    );
    run("seir-conservation", check_seir_conservation());
    run("disease-free-constancy", check_disease_free_constancy());
    run("closed-loop-rates", check_closed_loop_rates());
    run("reproduction-number", check_reproduction_number());
    run("prediction-mode-parity", check_prediction_mode_parity(seed));
    run("report-round-trip", check_report_round_trip(seed));
    run("config-round-trip", check_config_round_trip());
    run(
        "config-rejects-zero-max-terms",
        check_config_rejects_zero_max_terms(),
    );

    VerifyReport { seed, checks }
}
