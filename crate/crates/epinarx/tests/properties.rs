//! Property-based tests over the public API: structural invariants that
//! should hold for arbitrary well-formed inputs, not just the fixtures the
//! unit tests pin down.

use proptest::prelude::*;

use epinarx::data::{
    ingest_csv_reader, split, CsvSchema, Dataset, EpochDay, FillPolicy, Role, SplitSpec,
    TimeSeries,
};
use epinarx::dictionary::{build_dictionary, evaluate, LagSpec, VariableLags};
use epinarx::epi::reproduction_number;
use epinarx::predict::{r_square, residual_diagnostics, PredictionMode, PredictionRun};

fn day0() -> EpochDay {
    EpochDay::parse_iso("2020-03-04").expect("valid date")
}

fn series(name: &str, values: Vec<f64>) -> TimeSeries {
    TimeSeries::new(name, day0(), values).expect("strategy yields finite values")
}

/// Finite, moderately sized values — large enough to exercise scaling,
/// small enough that products of three stay well inside f64 range.
fn value() -> impl Strategy<Value = f64> {
    -1e4..1e4f64
}

proptest! {
    /// Splitting partitions every series: lengths add up, values are the
    /// original prefix/middle bitwise, and the test axis starts right after
    /// the training block.
    #[test]
    fn split_partitions_every_series(
        values in proptest::collection::vec(value(), 2..200),
        train_frac in 0.01..0.99f64,
        test_frac in 0.0..1.0f64,
    ) {
        let n = values.len();
        let train_len = ((n as f64 * train_frac) as usize).clamp(1, n - 1);
        let test_len = ((n - train_len) as f64 * test_frac) as usize;
        let dataset = Dataset::new(
            vec![series("y", values.clone()), series("u", values.iter().rev().copied().collect())],
            "y",
        ).expect("aligned");
        let spec = SplitSpec::new(train_len, test_len).expect("train_len >= 1");

        let (train, test) = split(&dataset, &spec).expect("spec fits");
        prop_assert_eq!(train.len(), train_len);
        prop_assert_eq!(test.len(), test_len);
        prop_assert_eq!(train.output().values(), &values[..train_len]);
        prop_assert_eq!(test.output().values(), &values[train_len..train_len + test_len]);
        prop_assert_eq!(train.start(), dataset.start());
        if test_len > 0 {
            prop_assert_eq!(test.start(), dataset.start().offset(train_len as i64));
        }
    }

    /// The residual autocorrelation function is invariant under reversing
    /// the residual sequence (each lag-k product pair appears in both sums).
    #[test]
    fn autocorrelation_is_reversal_invariant(
        values in proptest::collection::vec(value(), 30..150),
    ) {
        let zero = vec![0.0; values.len()];
        let run = |vals: Vec<f64>| PredictionRun {
            mode: PredictionMode::OneStep,
            predictions: series("predicted", zero.clone()),
            actual: series("actual", vals),
            horizon_days: 1,
        };
        let forward = residual_diagnostics(&run(values.clone())).expect("enough points");
        let backward =
            residual_diagnostics(&run(values.into_iter().rev().collect())).expect("enough points");
        prop_assert_eq!(forward.n, backward.n);
        for (a, b) in forward.autocorrelations.iter().zip(&backward.autocorrelations) {
            prop_assert!((a - b).abs() <= 1e-9, "acf {} vs {}", a, b);
        }
    }

    /// Every regression-problem cell equals the product of the lagged values
    /// its term names, recomputed directly from the dataset.
    #[test]
    fn dictionary_columns_are_products_of_lagged_values(
        y in proptest::collection::vec(value(), 12..60),
        degree in 1..=3usize,
        max_lag in 1..=3usize,
    ) {
        let n = y.len();
        let u: Vec<f64> = y.iter().map(|v| 0.5 * v + 1.0).collect();
        let dataset = Dataset::new(vec![series("y", y), series("u", u)], "y").expect("aligned");
        let spec = LagSpec::new(
            "y",
            Some((1, max_lag)),
            vec![VariableLags::new("u", 1, max_lag)],
            degree,
            true,
        ).expect("valid spec");
        let dictionary = build_dictionary(&spec).expect("non-empty");
        let problem = evaluate(&dictionary, &dataset).expect("covered");

        prop_assert_eq!(problem.first_valid_t(), max_lag);
        prop_assert_eq!(problem.n_rows(), n - max_lag);
        for (m, term) in problem.terms().iter().enumerate() {
            for row in 0..problem.n_rows() {
                let t = problem.first_valid_t() + row;
                let mut want = 1.0;
                for factor in term.factors() {
                    let values = dataset
                        .series(&factor.variable)
                        .expect("term names a dataset series")
                        .values();
                    want *= values[t - factor.lag];
                }
                let have = problem.columns()[[row, m]];
                prop_assert!(
                    (have - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "term {} row {}: {} vs {}", term, row, have, want
                );
            }
        }
    }

    /// R² is invariant under shifting both series by the same constant, and
    /// a perfect fit scores exactly 1.
    #[test]
    fn r_square_is_shift_invariant(
        values in proptest::collection::vec(value(), 3..100),
        noise in proptest::collection::vec(-1.0..1.0f64, 3..100),
        shift in -1e4..1e4f64,
    ) {
        let n = values.len().min(noise.len());
        let actual: Vec<f64> = values[..n].to_vec();
        // Guard against a constant actual series (R² undefined).
        prop_assume!(actual.iter().any(|v| (v - actual[0]).abs() > 1e-6));
        let pred: Vec<f64> = actual.iter().zip(&noise).map(|(v, e)| v + e).collect();

        let base = r_square(&series("p", pred.clone()), &series("a", actual.clone()))
            .expect("non-constant");
        let shifted = r_square(
            &series("p", pred.iter().map(|v| v + shift).collect()),
            &series("a", actual.iter().map(|v| v + shift).collect()),
        ).expect("non-constant");
        prop_assert!((base - shifted).abs() <= 1e-6, "{} vs {}", base, shifted);

        let perfect = r_square(&series("p", actual.clone()), &series("a", actual))
            .expect("non-constant");
        prop_assert_eq!(perfect, 1.0);
    }

    /// Scaling transmission by a power of two scales the reproduction number
    /// by exactly that power (binary scaling commutes with the arithmetic).
    #[test]
    fn reproduction_number_is_homogeneous_in_binary_scales(
        beta in 0.01..2.0f64,
        s_frac in 0.1..1.0f64,
        lethality in 0.0..0.05f64,
        gamma in 0.01..1.0f64,
        k in -6..=6i32,
    ) {
        let population = 6.7e7;
        let susceptible = s_frac * population;
        let scale = (2.0f64).powi(k);
        let base = reproduction_number(beta, susceptible, lethality, gamma, population)
            .expect("rates positive");
        let scaled = reproduction_number(scale * beta, susceptible, lethality, gamma, population)
            .expect("rates positive");
        prop_assert_eq!(scaled, scale * base);
    }

    /// A dataset rendered to CSV at full precision ingests back bitwise,
    /// with the same date axis and roles.
    #[test]
    fn csv_ingest_round_trips_full_precision_values(
        cases in proptest::collection::vec(value(), 1..80),
        deaths in proptest::collection::vec(value(), 1..80),
    ) {
        let n = cases.len().min(deaths.len());
        let mut text = String::from("date,new_cases,new_deaths\n");
        for i in 0..n {
            text.push_str(&format!(
                "{},{:?},{:?}\n",
                day0().offset(i as i64).to_date(),
                cases[i],
                deaths[i]
            ));
        }
        let schema = CsvSchema::new(
            "date",
            vec![
                ("new_cases".to_string(), Role::Output),
                ("new_deaths".to_string(), Role::Input),
            ],
            FillPolicy::Strict,
        ).expect("valid schema");
        let dataset = ingest_csv_reader(text.as_bytes(), &schema).expect("well-formed csv");

        prop_assert_eq!(dataset.len(), n);
        prop_assert_eq!(dataset.start(), day0());
        prop_assert_eq!(dataset.output().values(), &cases[..n]);
        prop_assert_eq!(
            dataset.series("new_deaths").expect("ingested").values(),
            &deaths[..n]
        );
    }
}
