//! Artifact serialization: model tables (CSV and aligned text), selection
//! traces, prediction series, fit metrics, and residual diagnostics.
//!
//! Every artifact opens with a deterministic provenance header (`#` comment
//! lines carrying a config hash, a data hash, and the crate version — never
//! a timestamp), so identical inputs produce byte-identical files.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::data::EpochDay;
use crate::dictionary::Term;
use crate::error::{Error, Result};
use crate::frols::{IdentifiedModel, SelectionTrace};
use crate::predict::{PredictionRun, ResidualDiagnostics};

/// Lowercase hex SHA-256 digest of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").expect("string writes cannot fail");
    }
    out
}

/// Identifies the exact configuration and data behind an artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub data_hash: String,
    pub version: String,
}

impl Provenance {
    /// Hashes the raw config and data bytes; the version is the crate's.
    pub fn new(config_bytes: &[u8], data_bytes: &[u8]) -> Provenance {
        Provenance {
            config_hash: sha256_hex(config_bytes),
            data_hash: sha256_hex(data_bytes),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn header(&self) -> String {
        format!(
            "# config: sha256:{}\n# data: sha256:{}\n# version: {}\n",
            self.config_hash, self.data_hash, self.version
        )
    }
}

/// Scientific notation with a 4-decimal mantissa and a signed two-digit
/// exponent: `1.1674e+01`, `-6.2117e+03`, `0.0000e+00`.
pub fn format_scientific(x: f64) -> String {
    let raw = format!("{x:.4e}");
    let (mantissa, exponent) = raw
        .split_once('e')
        .expect("float scientific form always contains an exponent");
    let exp: i32 = exponent.parse().expect("exponent is a small integer");
    format!("{mantissa}e{exp:+03}")
}

/// Probability rendering for report tables: an exact zero prints as `0`,
/// anything else in scientific notation.
pub fn format_p_value(p: f64) -> String {
    if p == 0.0 {
        "0".to_string()
    } else {
        format_scientific(p)
    }
}

const MODEL_HEADER: &str = "Index,Model Term,Parameter,ERR(100%),P-value";

fn model_cells(model: &IdentifiedModel) -> Vec<[String; 5]> {
    (0..model.len())
        .map(|k| {
            [
                (k + 1).to_string(),
                model.terms()[k].to_string(),
                format_scientific(model.parameters()[k]),
                format!("{:.4}", model.err()[k] * 100.0),
                format_p_value(model.p_values()[k]),
            ]
        })
        .collect()
}

/// The model table as CSV under a provenance header.
pub fn model_report_csv(model: &IdentifiedModel, provenance: &Provenance) -> String {
    let mut out = provenance.header();
    out.push_str(MODEL_HEADER);
    out.push('\n');
    for row in model_cells(model) {
        writeln!(out, "{}", row.join(",")).expect("string writes cannot fail");
    }
    out
}

/// The model table as aligned monospace text under a provenance header,
/// with a training-summary footer.
pub fn model_report_text(model: &IdentifiedModel, provenance: &Provenance) -> String {
    let headers = ["Index", "Model Term", "Parameter", "ERR(100%)", "P-value"];
    let rows = model_cells(model);
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }

    let mut out = provenance.header();
    let mut line = String::new();
    for (j, h) in headers.iter().enumerate() {
        if j > 0 {
            line.push_str("  ");
        }
        write!(line, "{h:<width$}", width = widths[j]).expect("string writes cannot fail");
    }
    out.push_str(line.trim_end());
    out.push('\n');
    for row in &rows {
        let mut line = String::new();
        for (j, cell) in row.iter().enumerate() {
            if j > 0 {
                line.push_str("  ");
            }
            // The term column reads left-to-right; numbers align right.
            if j == 1 {
                write!(line, "{cell:<width$}", width = widths[j])
            } else {
                write!(line, "{cell:>width$}", width = widths[j])
            }
            .expect("string writes cannot fail");
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    writeln!(
        out,
        "# rows: {}  residual variance: {}",
        model.training().n_eff,
        format_scientific(model.training().residual_variance)
    )
    .expect("string writes cannot fail");
    out
}

/// One parsed row of a model report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub index: usize,
    pub term: String,
    pub parameter: f64,
    pub err_percent: f64,
    pub p_value: f64,
}

/// Parses [`model_report_csv`] output back into rows (provenance lines are
/// skipped), so reports round-trip.
pub fn parse_model_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let bad = |reason: String| Error::InvalidSchema { reason };
    let mut rows = Vec::new();
    let mut saw_header = false;
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            if line != MODEL_HEADER {
                return Err(bad(format!("expected model report header, got '{line}'")));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 columns, got {}", fields.len())));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| bad(format!("unparseable number '{s}'")))
        };
        rows.push(ReportRow {
            index: fields[0]
                .parse()
                .map_err(|_| bad(format!("unparseable index '{}'", fields[0])))?,
            term: fields[1].to_string(),
            parameter: parse(fields[2])?,
            err_percent: parse(fields[3])?,
            p_value: parse(fields[4])?,
        });
    }
    if !saw_header {
        return Err(bad("model report header missing".to_string()));
    }
    Ok(rows)
}

/// The selection trace as CSV: one row per greedy step, full-precision
/// values so the file is exact.
pub fn trace_csv(
    trace: &SelectionTrace,
    terms: &[Term],
    provenance: &Provenance,
) -> Result<String> {
    let mut out = provenance.header();
    out.push_str("step,term,err,residual_energy\n");
    for (k, step) in trace.steps().iter().enumerate() {
        let term = terms.get(step.term_index).ok_or_else(|| Error::TermNotInProblem {
            term: format!("column {}", step.term_index),
        })?;
        writeln!(
            out,
            "{},{},{},{}",
            k + 1,
            term,
            step.err,
            step.residual_energy
        )
        .expect("string writes cannot fail");
    }
    Ok(out)
}

/// Predictions next to measurements as CSV: `date,actual,predicted,split`,
/// where `split` marks rows on or after `test_start` as test rows.
pub fn prediction_csv(
    run: &PredictionRun,
    test_start: EpochDay,
    provenance: &Provenance,
) -> String {
    let mut out = provenance.header();
    out.push_str("date,actual,predicted,split\n");
    for t in 0..run.len() {
        let date = run.actual.date_at(t);
        let split = if date < test_start { "train" } else { "test" };
        writeln!(
            out,
            "{},{},{},{}",
            date,
            run.actual.values()[t],
            run.predictions.values()[t],
            split
        )
        .expect("string writes cannot fail");
    }
    out
}

/// Named scalar metrics as CSV: `metric,value` rows, full precision.
pub fn metrics_csv(metrics: &[(&str, f64)], provenance: &Provenance) -> String {
    let mut out = provenance.header();
    out.push_str("metric,value\n");
    for (name, value) in metrics {
        writeln!(out, "{name},{value}").expect("string writes cannot fail");
    }
    out
}

/// Residual autocorrelations as CSV with the summary statistics in the
/// header: `lag,autocorrelation` rows for lags 1..=20.
pub fn diagnostics_csv(diag: &ResidualDiagnostics, provenance: &Provenance) -> String {
    let mut out = provenance.header();
    writeln!(
        out,
        "# n: {}  mean: {}  variance: {}  band: {}",
        diag.n, diag.mean, diag.variance, diag.band
    )
    .expect("string writes cannot fail");
    out.push_str("lag,autocorrelation\n");
    for (k, rho) in diag.autocorrelations.iter().enumerate() {
        writeln!(out, "{},{}", k + 1, rho).expect("string writes cannot fail");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{Factor, Term};

    fn prov() -> Provenance {
        Provenance::new(b"config-bytes", b"data-bytes")
    }

    #[test]
    fn scientific_format_matches_the_table_style() {
        assert_eq!(format_scientific(11.674), "1.1674e+01");
        assert_eq!(format_scientific(-6211.7), "-6.2117e+03");
        assert_eq!(format_scientific(35551.0), "3.5551e+04");
        assert_eq!(format_scientific(0.001), "1.0000e-03");
        assert_eq!(format_scientific(0.0), "0.0000e+00");
        // Rounding carries into the exponent cleanly.
        assert_eq!(format_scientific(0.0999999), "1.0000e-01");
        assert_eq!(format_scientific(9.99999e99), "1.0000e+100");
    }

    #[test]
    fn p_value_zero_prints_bare() {
        assert_eq!(format_p_value(0.0), "0");
        assert_eq!(format_p_value(0.0321), "3.2100e-02");
    }

    fn sample_model() -> IdentifiedModel {
        let u2_13 = Term::new(vec![Factor::new("u_2", 13)]);
        let u1_12 = Term::new(vec![Factor::new("u_1", 12)]);
        IdentifiedModel::from_coefficients(
            "y",
            vec![(u2_13, 11.674), (u1_12, -6211.7), (Term::constant(), 35551.0)],
        )
        .unwrap()
    }

    #[test]
    fn model_csv_round_trips() {
        let model = sample_model();
        let csv = model_report_csv(&model, &prov());
        assert!(csv.starts_with("# config: sha256:"));
        let rows = parse_model_report_csv(&csv).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].index, 1);
        assert_eq!(rows[0].term, "u_2(t-13)");
        assert!((rows[0].parameter - 11.674).abs() < 1e-3);
        assert_eq!(rows[2].term, "1");
        assert_eq!(rows[0].p_value, 0.0);
    }

    #[test]
    fn parse_rejects_malformed_tables() {
        assert!(parse_model_report_csv("").is_err());
        assert!(parse_model_report_csv("not,the,header\n").is_err());
        let missing_column = format!("{MODEL_HEADER}\n1,u(t-1),2.0,50.0\n");
        assert!(parse_model_report_csv(&missing_column).is_err());
        let bad_number = format!("{MODEL_HEADER}\n1,u(t-1),2.0,50.0,zero\n");
        assert!(parse_model_report_csv(&bad_number).is_err());
    }

    #[test]
    fn text_report_aligns_and_carries_the_footer() {
        let model = sample_model();
        let text = model_report_text(&model, &prov());
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# config:"));
        assert!(lines[3].starts_with("Index"));
        // Numeric cells right-align: every data line ends with the p-value 0.
        for line in &lines[4..7] {
            assert!(line.ends_with('0'), "{line}");
        }
        assert!(lines[7].starts_with("# rows: 0"));
    }

    #[test]
    fn provenance_is_deterministic_and_input_sensitive() {
        let a = Provenance::new(b"cfg", b"data");
        let b = Provenance::new(b"cfg", b"data");
        assert_eq!(a, b);
        let c = Provenance::new(b"cfg2", b"data");
        assert_ne!(a.config_hash, c.config_hash);
        assert_eq!(a.data_hash, c.data_hash);
        // Well-known digest: sha256 of the empty string.
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn metrics_and_diagnostics_serialize_with_headers() {
        let metrics = metrics_csv(&[("r_square_train", 0.8991), ("r_square_test", 0.8544)], &prov());
        assert!(metrics.contains("metric,value\n"));
        assert!(metrics.contains("r_square_train,0.8991\n"));

        let diag = ResidualDiagnostics {
            n: 40,
            mean: 0.0,
            variance: 1.0,
            autocorrelations: vec![0.1; 20],
            band: 1.96 / (40.0_f64).sqrt(),
        };
        let csv = diagnostics_csv(&diag, &prov());
        assert!(csv.contains("lag,autocorrelation\n"));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 21);
        assert!(csv.contains("# n: 40"));
    }
}
