//! Pipeline configuration: a TOML schema that round-trips losslessly and
//! rejects unknown keys, mapped onto the library's domain types.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use epinarx::data::{FillPolicy, SplitSpec};
use epinarx::dictionary::{LagSpec, VariableLags};
use epinarx::epi::Smoothing;
use epinarx::frols::{ScanMode, SelectionConfig, SizeCriterion};

use crate::error::{CliError, ExitClass};

/// Which of the three case studies to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CaseId {
    Cs1,
    Cs2,
    Cs3,
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseId::Cs1 => write!(f, "cs1"),
            CaseId::Cs2 => write!(f, "cs2"),
            CaseId::Cs3 => write!(f, "cs3"),
        }
    }
}

/// Top-level configuration for every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory artifacts are written into (per-case subdirectories).
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub split: SplitConfig,
    pub selection: SelectionSettings,
    pub epi: EpiConfig,
    pub cs1: CaseStudy,
    pub cs2: CaseStudy,
    pub cs3: CaseStudy,
    /// Only needed by `simulate-seir`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
}

/// Where the daily series come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// CSV of daily counts; when absent, a deterministic synthetic campaign
    /// is generated instead (see `synthetic_seed`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_date_column")]
    pub date_column: String,
    #[serde(default = "default_case_column")]
    pub case_column: String,
    #[serde(default = "default_death_column")]
    pub death_column: String,
    /// Optional column holding a precomputed reproduction-number series;
    /// when absent the pipeline derives one from cases and deaths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rn_column: Option<String>,
    /// Repeat the previous row over calendar gaps instead of rejecting them.
    #[serde(default)]
    pub forward_fill: bool,
    pub population: f64,
    #[serde(default)]
    pub synthetic_seed: u64,
}

fn default_date_column() -> String {
    "date".to_string()
}
fn default_case_column() -> String {
    "new_cases".to_string()
}
fn default_death_column() -> String {
    "new_deaths".to_string()
}

impl DataConfig {
    pub fn fill_policy(&self) -> FillPolicy {
        if self.forward_fill {
            FillPolicy::ForwardFill
        } else {
            FillPolicy::Strict
        }
    }
}

/// Leading training block and the test block that follows it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train_len: usize,
    /// Defaults to everything after the training block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_len: Option<usize>,
}

impl SplitConfig {
    /// Resolves against the actual dataset length.
    pub fn to_split(&self, data_len: usize) -> epinarx::Result<SplitSpec> {
        let test = match self.test_len {
            Some(t) => t,
            None => data_len.saturating_sub(self.train_len),
        };
        SplitSpec::new(self.train_len, test)
    }
}

/// Term-selection settings shared by all case studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionSettings {
    #[serde(default = "default_max_terms")]
    pub max_terms: usize,
    /// Stop once the error-reduction sum crosses this value (overrides the
    /// size criterion).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub err_sum_threshold: Option<f64>,
    #[serde(default = "default_collinearity_tol")]
    pub collinearity_tol: f64,
    /// Use the incremental candidate-scan fast path (selects identically).
    #[serde(default)]
    pub incremental_scan: bool,
    #[serde(default = "default_criterion")]
    pub criterion: CriterionConfig,
}

fn default_max_terms() -> usize {
    20
}
fn default_collinearity_tol() -> f64 {
    1e-10
}
fn default_criterion() -> CriterionConfig {
    CriterionConfig::Apress { alpha: 4.0 }
}

/// Model-size criterion in config form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CriterionConfig {
    Aic,
    Bic,
    Gcv,
    Apress { alpha: f64 },
    /// Keep every selected term (no size search).
    Fixed,
}

impl SelectionSettings {
    pub fn to_selection_config(&self) -> SelectionConfig {
        let size_criterion = match self.criterion {
            CriterionConfig::Aic => SizeCriterion::Aic,
            CriterionConfig::Bic => SizeCriterion::Bic,
            CriterionConfig::Gcv => SizeCriterion::Gcv,
            CriterionConfig::Apress { alpha } => SizeCriterion::Apress { alpha },
            CriterionConfig::Fixed => SizeCriterion::Fixed,
        };
        SelectionConfig {
            max_terms: self.max_terms,
            err_sum_threshold: self.err_sum_threshold,
            size_criterion,
            collinearity_tol: self.collinearity_tol,
            scan_mode: if self.incremental_scan {
                ScanMode::Incremental
            } else {
                ScanMode::Rescan
            },
        }
    }
}

/// Epidemic-model settings for rate derivation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpiConfig {
    #[serde(default = "default_latent_days")]
    pub latent_days: f64,
    #[serde(default = "default_transmission_days")]
    pub transmission_days: f64,
    /// Trailing window (days) that converts daily new cases into an active
    /// infection count.
    #[serde(default = "default_active_window")]
    pub active_window: usize,
    #[serde(default)]
    pub initial_removed: f64,
    /// Centered moving-average width for the rate series; 0 disables
    /// smoothing.
    #[serde(default = "default_smoothing_window")]
    pub smoothing_window: usize,
}

fn default_latent_days() -> f64 {
    epinarx::epi::DEFAULT_LATENT_DAYS
}
fn default_transmission_days() -> f64 {
    epinarx::epi::DEFAULT_TRANSMISSION_DAYS
}
fn default_active_window() -> usize {
    14
}
fn default_smoothing_window() -> usize {
    7
}

impl EpiConfig {
    pub fn smoothing(&self) -> Smoothing {
        if self.smoothing_window == 0 {
            Smoothing::Raw
        } else {
            Smoothing::CenteredMovingAverage {
                window: self.smoothing_window,
            }
        }
    }
}

/// An input series with its lag range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputColumn {
    /// Name in the working dataset: `cases`, `deaths`, or `rn`.
    pub series: String,
    pub min_lag: usize,
    pub max_lag: usize,
}

/// An inclusive lag range for autoregressive terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagRange {
    pub min: usize,
    pub max: usize,
}

/// One identification experiment: which series is the output, which feed in
/// as lagged inputs, and the dictionary shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseStudy {
    /// Output series name in the working dataset.
    pub output: String,
    pub degree: usize,
    #[serde(default = "default_true")]
    pub include_constant: bool,
    /// Lagged-output (autoregressive) range; omit for input-only models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_lags: Option<LagRange>,
    pub inputs: Vec<InputColumn>,
}

fn default_true() -> bool {
    true
}

/// The canonical variable name for input `index` out of `total`: `u` for a
/// single input, `u_1`, `u_2`, … otherwise (reports render terms with these).
pub fn input_variable_name(index: usize, total: usize) -> String {
    if total == 1 {
        "u".to_string()
    } else {
        format!("u_{}", index + 1)
    }
}

/// The canonical output variable name in identification datasets.
pub const OUTPUT_VARIABLE: &str = "y";

impl CaseStudy {
    /// The dictionary specification over the canonical variable names.
    pub fn lag_spec(&self) -> epinarx::Result<LagSpec> {
        let inputs = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                VariableLags::new(input_variable_name(i, self.inputs.len()), c.min_lag, c.max_lag)
            })
            .collect();
        LagSpec::new(
            OUTPUT_VARIABLE,
            self.output_lags.map(|r| (r.min, r.max)),
            inputs,
            self.degree,
            self.include_constant,
        )
    }
}

/// Scenario for the `simulate-seir` subcommand (constant rates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub population: f64,
    pub beta: f64,
    pub lethality: f64,
    #[serde(default = "default_latent_days")]
    pub latent_days: f64,
    #[serde(default = "default_transmission_days")]
    pub transmission_days: f64,
    #[serde(default)]
    pub initial_exposed: f64,
    pub initial_infected: f64,
    #[serde(default)]
    pub initial_removed: f64,
    #[serde(default)]
    pub initial_deceased: f64,
    pub days: usize,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_start_date")]
    pub start_date: String,
}

fn default_step() -> f64 {
    0.1
}
fn default_start_date() -> String {
    "2020-03-04".to_string()
}

impl PipelineConfig {
    pub fn case(&self, id: CaseId) -> &CaseStudy {
        match id {
            CaseId::Cs1 => &self.cs1,
            CaseId::Cs2 => &self.cs2,
            CaseId::Cs3 => &self.cs3,
        }
    }

    /// A ready-to-run configuration: synthetic data, the historical split
    /// sizes, and the three standard experiment shapes.
    pub fn default_config() -> PipelineConfig {
        PipelineConfig {
            output_dir: PathBuf::from("out"),
            data: DataConfig {
                path: None,
                date_column: default_date_column(),
                case_column: default_case_column(),
                death_column: default_death_column(),
                rn_column: None,
                forward_fill: false,
                population: 6.7e7,
                synthetic_seed: 0,
            },
            split: SplitConfig {
                train_len: 361,
                test_len: Some(168),
            },
            selection: SelectionSettings {
                max_terms: default_max_terms(),
                err_sum_threshold: None,
                collinearity_tol: default_collinearity_tol(),
                incremental_scan: false,
                criterion: default_criterion(),
            },
            epi: EpiConfig {
                latent_days: default_latent_days(),
                transmission_days: default_transmission_days(),
                active_window: default_active_window(),
                initial_removed: 0.0,
                smoothing_window: default_smoothing_window(),
            },
            cs1: CaseStudy {
                output: "cases".to_string(),
                degree: 1,
                include_constant: true,
                output_lags: None,
                inputs: vec![InputColumn {
                    series: "rn".to_string(),
                    min_lag: 1,
                    max_lag: 42,
                }],
            },
            cs2: CaseStudy {
                output: "cases".to_string(),
                degree: 2,
                include_constant: true,
                output_lags: Some(LagRange { min: 12, max: 42 }),
                inputs: vec![InputColumn {
                    series: "rn".to_string(),
                    min_lag: 12,
                    max_lag: 42,
                }],
            },
            cs3: CaseStudy {
                output: "deaths".to_string(),
                degree: 2,
                include_constant: true,
                output_lags: None,
                inputs: vec![
                    InputColumn {
                        series: "rn".to_string(),
                        min_lag: 12,
                        max_lag: 42,
                    },
                    InputColumn {
                        series: "cases".to_string(),
                        min_lag: 12,
                        max_lag: 42,
                    },
                ],
            },
            simulation: Some(SimulationConfig {
                population: 1e6,
                beta: 0.3,
                lethality: 0.001,
                latent_days: default_latent_days(),
                transmission_days: default_transmission_days(),
                initial_exposed: 0.0,
                initial_infected: 100.0,
                initial_removed: 0.0,
                initial_deceased: 0.0,
                days: 500,
                step: default_step(),
                start_date: default_start_date(),
            }),
        }
    }

    pub fn to_toml_string(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::validation("config", format!("serialization failed: {e}")))
    }

    /// Semantic checks beyond what the schema enforces.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| CliError::validation("config", msg);
        if !self.data.population.is_finite() || self.data.population <= 0.0 {
            return Err(bad(format!(
                "data.population must be positive, got {}",
                self.data.population
            )));
        }
        if self.split.train_len == 0 {
            return Err(bad("split.train_len must be at least 1".to_string()));
        }
        self.selection
            .to_selection_config()
            .validate()
            .map_err(|e| bad(format!("selection: {e}")))?;
        for (name, v) in [
            ("epi.latent_days", self.epi.latent_days),
            ("epi.transmission_days", self.epi.transmission_days),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(bad(format!("{name} must be positive, got {v}")));
            }
        }
        if self.epi.active_window == 0 {
            return Err(bad("epi.active_window must be at least 1".to_string()));
        }
        if self.epi.smoothing_window != 0 && self.epi.smoothing_window % 2 == 0 {
            return Err(bad(format!(
                "epi.smoothing_window must be odd (or 0 for raw), got {}",
                self.epi.smoothing_window
            )));
        }
        for (label, case) in [("cs1", &self.cs1), ("cs2", &self.cs2), ("cs3", &self.cs3)] {
            case.lag_spec()
                .map_err(|e| bad(format!("{label}: {e}")))?;
        }
        if let Some(sim) = &self.simulation {
            for (name, v) in [
                ("simulation.population", sim.population),
                ("simulation.latent_days", sim.latent_days),
                ("simulation.transmission_days", sim.transmission_days),
            ] {
                if !v.is_finite() || v <= 0.0 {
                    return Err(bad(format!("{name} must be positive, got {v}")));
                }
            }
            for (name, v) in [
                ("simulation.beta", sim.beta),
                ("simulation.lethality", sim.lethality),
                ("simulation.initial_exposed", sim.initial_exposed),
                ("simulation.initial_infected", sim.initial_infected),
                ("simulation.initial_removed", sim.initial_removed),
                ("simulation.initial_deceased", sim.initial_deceased),
            ] {
                if !v.is_finite() || v < 0.0 {
                    return Err(bad(format!("{name} must be non-negative, got {v}")));
                }
            }
            if sim.days == 0 {
                return Err(bad("simulation.days must be at least 1".to_string()));
            }
            if !(0.0..=1.0).contains(&sim.step) || sim.step == 0.0 {
                return Err(bad(format!(
                    "simulation.step must be in (0, 1], got {}",
                    sim.step
                )));
            }
            if epinarx::data::EpochDay::parse_iso(&sim.start_date).is_none() {
                return Err(bad(format!(
                    "simulation.start_date '{}' is not YYYY-MM-DD",
                    sim.start_date
                )));
            }
        }
        Ok(())
    }
}

/// Reads, parses, and validates a config file, returning the raw bytes too
/// (they feed the provenance hash).
pub fn load_config(path: &Path) -> Result<(PipelineConfig, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io("config", path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| {
        CliError::validation("config", format!("{} is not UTF-8", path.display()))
    })?;
    let config: PipelineConfig = toml::from_str(text).map_err(|e| CliError {
        stage: "config",
        message: format!("{}: {e}", path.display()),
        class: ExitClass::Validation,
    })?;
    config.validate()?;
    Ok((config, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let config = PipelineConfig::default_config();
        config.validate().unwrap();
        let text = config.to_toml_string().unwrap();
        let parsed: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed, config);
        // And a second serialization is byte-identical.
        assert_eq!(parsed.to_toml_string().unwrap(), text);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = PipelineConfig::default_config().to_toml_string().unwrap();
        text.push_str("\nunknown_key = 3\n");
        assert!(toml::from_str::<PipelineConfig>(&text).is_err());

        let nested = text.replace("[split]", "[split]\nwibble = 1");
        assert!(toml::from_str::<PipelineConfig>(&nested).is_err());
    }

    #[test]
    fn zero_max_terms_fails_validation() {
        let mut config = PipelineConfig::default_config();
        config.selection.max_terms = 0;
        let err = config.validate().unwrap_err();
        assert_eq!(err.class, ExitClass::Validation);
        assert!(err.to_string().contains("max_terms"), "{err}");
    }

    #[test]
    fn semantic_validation_catches_bad_sections() {
        let mut c = PipelineConfig::default_config();
        c.epi.smoothing_window = 4;
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::default_config();
        c.cs1.degree = 0;
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::default_config();
        c.data.population = -1.0;
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::default_config();
        c.simulation.as_mut().unwrap().step = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn selection_settings_map_onto_library_types() {
        let mut settings = PipelineConfig::default_config().selection;
        settings.incremental_scan = true;
        settings.criterion = CriterionConfig::Apress { alpha: 6.0 };
        let sc = settings.to_selection_config();
        assert_eq!(sc.scan_mode, ScanMode::Incremental);
        assert_eq!(sc.size_criterion, SizeCriterion::Apress { alpha: 6.0 });
        assert_eq!(sc.max_terms, 20);
    }

    #[test]
    fn input_names_follow_the_table_convention() {
        assert_eq!(input_variable_name(0, 1), "u");
        assert_eq!(input_variable_name(0, 2), "u_1");
        assert_eq!(input_variable_name(1, 2), "u_2");
    }

    #[test]
    fn case_specs_build_lag_specs() {
        let config = PipelineConfig::default_config();
        let spec3 = config.cs3.lag_spec().unwrap();
        assert_eq!(spec3.output_name(), "y");
        let spec1 = config.cs1.lag_spec().unwrap();
        assert_eq!(spec1.max_lag(), 42);
    }
}
