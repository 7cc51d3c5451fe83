//! The end-to-end pipeline behind the `identify`, `simulate-seir`, and
//! `derive-rn` subcommands: ingestion, rate derivation, identification,
//! prediction, and artifact emission. Every failure names its stage.

use std::path::{Path, PathBuf};

use epinarx::data::{ingest_csv_reader, CsvSchema, Dataset, EpochDay, Role, TimeSeries};
use epinarx::dictionary::build_dictionary;
use epinarx::epi::{
    active_infections, cumulative, estimate_rates, seir_integrate, RateEstimation, RatePath,
    RateSeries, SEIRParams, SEIRState,
};
use epinarx::frols::identify_full;
use epinarx::predict::{
    free_run_simulate, one_step_predict, r_square, residual_diagnostics, PredictionRun,
};
use epinarx::report::{
    diagnostics_csv, metrics_csv, model_report_csv, model_report_text, prediction_csv, trace_csv,
    Provenance,
};

use crate::config::{input_variable_name, CaseId, PipelineConfig, OUTPUT_VARIABLE};
use crate::error::{at_stage, CliError};
use crate::synth::synthetic_campaign;

/// The working dataset every case study draws from, plus the bytes that went
/// into it (for provenance hashing) and the rate series when one was derived.
pub struct BaseData {
    pub dataset: Dataset,
    pub data_bytes: Vec<u8>,
    pub rates: Option<RateSeries>,
}

/// Loads the configured CSV (or generates the synthetic campaign), producing
/// a dataset with canonical series names `cases`, `deaths`, and `rn`. The
/// reproduction number is taken from the configured column when present and
/// derived from the epidemic model otherwise.
pub fn load_base_data(config: &PipelineConfig) -> Result<BaseData, CliError> {
    let (raw, data_bytes) = match &config.data.path {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| CliError::io("ingest", path, e))?;
            let mut columns = vec![
                (config.data.case_column.clone(), Role::Output),
                (config.data.death_column.clone(), Role::Input),
            ];
            if let Some(rn) = &config.data.rn_column {
                columns.push((rn.clone(), Role::Input));
            }
            let schema = at_stage(
                "ingest",
                CsvSchema::new(config.data.date_column.clone(), columns, config.data.fill_policy()),
            )?;
            let dataset = at_stage("ingest", ingest_csv_reader(bytes.as_slice(), &schema))?;
            (dataset, bytes)
        }
        None => {
            let total = config.split.train_len + config.split.test_len.unwrap_or(168);
            let dataset = synthetic_campaign(config.data.synthetic_seed, total);
            let bytes = dataset.to_csv_string().into_bytes();
            (dataset, bytes)
        }
    };

    // Canonicalise the series names.
    let cases_name = if config.data.path.is_some() {
        config.data.case_column.as_str()
    } else {
        "cases"
    };
    let deaths_name = if config.data.path.is_some() {
        config.data.death_column.as_str()
    } else {
        "deaths"
    };
    let cases = at_stage(
        "ingest",
        raw.series(cases_name)
            .ok_or_else(|| epinarx::Error::UnknownSeries {
                name: cases_name.to_string(),
            }),
    )?
    .renamed("cases");
    let deaths = at_stage(
        "ingest",
        raw.series(deaths_name)
            .ok_or_else(|| epinarx::Error::UnknownSeries {
                name: deaths_name.to_string(),
            }),
    )?
    .renamed("deaths");

    let provided_rn = if config.data.path.is_some() {
        config.data.rn_column.as_deref()
    } else {
        Some("rn")
    };
    let (rn, rates) = match provided_rn {
        Some(column) => {
            let series = at_stage(
                "ingest",
                raw.series(column)
                    .ok_or_else(|| epinarx::Error::UnknownSeries {
                        name: column.to_string(),
                    }),
            )?
            .renamed("rn");
            (series, None)
        }
        None => {
            let rates = derive_rates(config, &cases, &deaths)?;
            (rates.rn.renamed("rn"), Some(rates))
        }
    };

    let dataset = at_stage("ingest", Dataset::new(vec![cases, deaths, rn], "cases"))?;
    Ok(BaseData {
        dataset,
        data_bytes,
        rates,
    })
}

/// Runs the epidemic-model reconstruction: daily cases → active infections,
/// daily deaths → cumulative deaths, then the rate estimator.
fn derive_rates(
    config: &PipelineConfig,
    cases: &TimeSeries,
    deaths: &TimeSeries,
) -> Result<RateSeries, CliError> {
    let active = at_stage(
        "rates",
        active_infections(cases, config.epi.active_window),
    )?;
    let total_deaths = cumulative(deaths);
    let estimation = RateEstimation {
        population: config.data.population,
        delta: 1.0 / config.epi.latent_days,
        gamma: 1.0 / config.epi.transmission_days,
        initial_removed: config.epi.initial_removed,
        smoothing: config.epi.smoothing(),
    };
    at_stage("rates", estimate_rates(&active, &total_deaths, &estimation))
}

/// Everything `identify` leaves behind for one case study.
pub struct CaseOutcome {
    pub case: CaseId,
    pub out_dir: PathBuf,
    pub n_terms: usize,
    pub top_term: String,
    pub r2_train: Option<f64>,
    pub r2_test: Option<f64>,
    pub free_run_diverged: bool,
    pub files: Vec<PathBuf>,
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io("write", &path, e))?;
    Ok(path)
}

/// Splits a prediction run at the train/test boundary and computes the
/// coefficient of determination on each side. Either side may be undefined
/// (too short or constant); that is reported as absence, not failure.
fn split_r_square(run: &PredictionRun, test_start: EpochDay) -> (Option<f64>, Option<f64>) {
    let n = run.len();
    let offset = test_start.0 - run.predictions.start().0;
    let k = offset.clamp(0, n as i64) as usize;
    let train = if k >= 2 {
        r_square(
            &run.predictions.slice(0..k),
            &run.actual.slice(0..k),
        )
        .ok()
    } else {
        None
    };
    let test = if n - k >= 2 {
        r_square(
            &run.predictions.slice(k..n),
            &run.actual.slice(k..n),
        )
        .ok()
    } else {
        None
    };
    (train, test)
}

/// Runs one case study end to end and writes its artifacts under
/// `<out>/<case>/`.
pub fn run_case_study(
    config: &PipelineConfig,
    config_bytes: &[u8],
    case_id: CaseId,
    out_override: Option<&Path>,
) -> Result<CaseOutcome, CliError> {
    let base = load_base_data(config)?;
    let case = config.case(case_id);

    // Assemble the identification dataset under canonical variable names.
    let output = at_stage(
        "alignment",
        base.dataset
            .series(&case.output)
            .ok_or_else(|| epinarx::Error::UnknownSeries {
                name: case.output.clone(),
            }),
    )?
    .renamed(OUTPUT_VARIABLE);
    let mut series = vec![output];
    for (i, input) in case.inputs.iter().enumerate() {
        let name = input_variable_name(i, case.inputs.len());
        let s = at_stage(
            "alignment",
            base.dataset
                .series(&input.series)
                .ok_or_else(|| epinarx::Error::UnknownSeries {
                    name: input.series.clone(),
                }),
        )?
        .renamed(name);
        series.push(s);
    }
    let case_data = at_stage("alignment", Dataset::new(series, OUTPUT_VARIABLE))?;

    // Identification on the training block.
    let spec = at_stage("identify", case.lag_spec())?;
    let selection = config.selection.to_selection_config();
    let split_spec = at_stage("identify", config.split.to_split(case_data.len()))?;
    let identification = at_stage(
        "identify",
        identify_full(&case_data, &spec, &selection, &split_spec),
    )?;
    let model = &identification.model;

    // Predictions over the whole axis (training and test).
    let one_step = at_stage("predict", one_step_predict(model, &case_data))?;
    let max_lag = model.max_lag();
    let seed = &case_data.output().values()[..max_lag];
    let free_run = match free_run_simulate(model, &case_data, seed) {
        Ok(run) => Some(run),
        Err(epinarx::Error::Diverged { .. }) => None,
        Err(other) => return Err(CliError::lib("predict", other)),
    };
    let test_start = case_data.start().offset(split_spec.train_len as i64);
    let (r2_train, r2_test) = split_r_square(&one_step, test_start);
    let free_run_r2 = free_run.as_ref().map(|run| split_r_square(run, test_start));
    let diagnostics = residual_diagnostics(&one_step).ok();

    // Artifacts.
    let out_root = out_override.unwrap_or(&config.output_dir);
    let out_dir = out_root.join(case_id.to_string());
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io("write", &out_dir, e))?;
    let provenance = Provenance::new(config_bytes, &base.data_bytes);

    let mut files = Vec::new();
    files.push(write_artifact(
        &out_dir,
        "model.csv",
        &model_report_csv(model, &provenance),
    )?);
    files.push(write_artifact(
        &out_dir,
        "model.txt",
        &model_report_text(model, &provenance),
    )?);

    let dictionary = at_stage("report", build_dictionary(&spec))?;
    let trace = at_stage(
        "report",
        trace_csv(&identification.trace, dictionary.terms(), &provenance),
    )?;
    files.push(write_artifact(&out_dir, "trace.csv", &trace)?);

    files.push(write_artifact(
        &out_dir,
        "predictions.csv",
        &prediction_csv(&one_step, test_start, &provenance),
    )?);
    if let Some(run) = &free_run {
        files.push(write_artifact(
            &out_dir,
            "freerun.csv",
            &prediction_csv(run, test_start, &provenance),
        )?);
    }

    let mut metrics: Vec<(&str, f64)> = vec![
        ("n_terms", model.len() as f64),
        ("err_sum", model.err_sum()),
        ("residual_variance", model.training().residual_variance),
        ("horizon_days", one_step.horizon_days as f64),
    ];
    if let Some(v) = r2_train {
        metrics.push(("r_square_train", v));
    }
    if let Some(v) = r2_test {
        metrics.push(("r_square_test", v));
    }
    if let Some((ftrain, ftest)) = free_run_r2 {
        if let Some(v) = ftrain {
            metrics.push(("r_square_train_free_run", v));
        }
        if let Some(v) = ftest {
            metrics.push(("r_square_test_free_run", v));
        }
    }
    metrics.push((
        "free_run_diverged",
        if free_run.is_some() { 0.0 } else { 1.0 },
    ));
    files.push(write_artifact(
        &out_dir,
        "metrics.csv",
        &metrics_csv(&metrics, &provenance),
    )?);

    if let Some(diag) = &diagnostics {
        files.push(write_artifact(
            &out_dir,
            "residuals.csv",
            &diagnostics_csv(diag, &provenance),
        )?);
    }

    let top_term = model
        .terms()
        .first()
        .map(|t| t.to_string())
        .unwrap_or_else(|| "(empty model)".to_string());
    Ok(CaseOutcome {
        case: case_id,
        out_dir,
        n_terms: model.len(),
        top_term,
        r2_train,
        r2_test,
        free_run_diverged: free_run.is_none(),
        files,
    })
}

/// Derives the reproduction-number series from the configured data and
/// writes `rn.csv` (`date,beta,r,rn`) into the output directory.
pub fn derive_rn(config: &PipelineConfig, config_bytes: &[u8]) -> Result<PathBuf, CliError> {
    let base = load_base_data(config)?;
    let rates = match base.rates {
        Some(r) => r,
        None => {
            // An rn column was supplied; derive anyway — that is this
            // subcommand's whole job.
            let cases = base.dataset.series("cases").expect("canonical name");
            let deaths = base.dataset.series("deaths").expect("canonical name");
            derive_rates(config, cases, deaths)?
        }
    };
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| CliError::io("write", &config.output_dir, e))?;
    let provenance = Provenance::new(config_bytes, &base.data_bytes);
    let mut contents = format!(
        "# config: sha256:{}\n# data: sha256:{}\n# version: {}\n",
        provenance.config_hash, provenance.data_hash, provenance.version
    );
    contents.push_str(&rates.to_csv_string());
    write_artifact(&config.output_dir, "rn.csv", &contents)
}

/// Integrates the configured scenario and writes `seir.csv` into the output
/// directory. Returns the path and the final state.
pub fn simulate_seir(
    config: &PipelineConfig,
    config_bytes: &[u8],
) -> Result<(PathBuf, SEIRState), CliError> {
    let sim = config.simulation.as_ref().ok_or_else(|| {
        CliError::validation("config", "simulate-seir needs a [simulation] section")
    })?;
    let mut params = SEIRParams::new(
        sim.population,
        RatePath::Constant(sim.beta),
        RatePath::Constant(sim.lethality),
    );
    params.delta = 1.0 / sim.latent_days;
    params.gamma = 1.0 / sim.transmission_days;
    let susceptible = sim.population
        - sim.initial_exposed
        - sim.initial_infected
        - sim.initial_removed
        - sim.initial_deceased;
    let initial = SEIRState::new(
        susceptible,
        sim.initial_exposed,
        sim.initial_infected,
        sim.initial_removed,
        sim.initial_deceased,
    );
    let trajectory = at_stage(
        "integrate",
        seir_integrate(&params, &initial, sim.days, sim.step),
    )?;

    let start = EpochDay::parse_iso(&sim.start_date)
        .ok_or_else(|| CliError::validation("config", "invalid simulation.start_date"))?;
    let provenance = Provenance::new(config_bytes, b"");
    let mut contents = format!(
        "# config: sha256:{}\n# data: sha256:{}\n# version: {}\n",
        provenance.config_hash, provenance.data_hash, provenance.version
    );
    contents.push_str("date,susceptible,exposed,infected,removed,deceased\n");
    for state in &trajectory {
        contents.push_str(&format!(
            "{},{},{},{},{},{}\n",
            start.offset(state.day as i64),
            state.susceptible,
            state.exposed,
            state.infected,
            state.removed,
            state.deceased
        ));
    }
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| CliError::io("write", &config.output_dir, e))?;
    let path = write_artifact(&config.output_dir, "seir.csv", &contents)?;
    Ok((path, *trajectory.last().expect("days >= 1")))
}
