//! Daily time-series containers, CSV ingestion, and train/test splitting.
//!
//! Dates are stored internally as integer days since the Unix epoch so the
//! daily-contiguity invariant is a plain index calculation; ISO-8601 strings
//! appear only at the I/O boundary.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::ops::Range;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// A calendar day as a count of days since 1970-01-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EpochDay(pub i64);

impl EpochDay {
    /// Parses a `YYYY-MM-DD` string.
    pub fn parse_iso(s: &str) -> Option<EpochDay> {
        let date = NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()?;
        Some(EpochDay::from_date(date))
    }

    pub fn from_date(d: NaiveDate) -> EpochDay {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap();
        EpochDay(d.signed_duration_since(epoch).num_days())
    }

    pub fn to_date(self) -> NaiveDate {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap();
        epoch + chrono::Duration::days(self.0)
    }

    /// The day `offset` days later (or earlier for negative offsets).
    pub fn offset(self, offset: i64) -> EpochDay {
        EpochDay(self.0 + offset)
    }
}

impl fmt::Display for EpochDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_date().format("%Y-%m-%d"))
    }
}

/// A named, daily-sampled series of finite values starting at a fixed date.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    name: String,
    start: EpochDay,
    values: Vec<f64>,
}

impl TimeSeries {
    /// Builds a series, rejecting NaN and infinite values.
    pub fn new(name: impl Into<String>, start: EpochDay, values: Vec<f64>) -> Result<TimeSeries> {
        let name = name.into();
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    name,
                    index: i,
                });
            }
        }
        Ok(TimeSeries {
            name,
            start,
            values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn start(&self) -> EpochDay {
        self.start
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// The date of sample `index`.
    pub fn date_at(&self, index: usize) -> EpochDay {
        self.start.offset(index as i64)
    }

    /// A copy of `range` with the start date shifted accordingly.
    pub fn slice(&self, range: Range<usize>) -> TimeSeries {
        TimeSeries {
            name: self.name.clone(),
            start: self.start.offset(range.start as i64),
            values: self.values[range].to_vec(),
        }
    }

    /// Same values under a different name (series identity is name-based).
    pub fn renamed(&self, name: impl Into<String>) -> TimeSeries {
        TimeSeries {
            name: name.into(),
            start: self.start,
            values: self.values.clone(),
        }
    }

    pub(crate) fn same_axis(&self, other: &TimeSeries) -> bool {
        self.start == other.start && self.values.len() == other.values.len()
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Role a series plays in an identification problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Output,
    Input,
}

/// A set of equally long, date-aligned series with exactly one output.
#[derive(Debug, Clone)]
pub struct Dataset {
    series: Vec<TimeSeries>,
    output: usize,
}

impl Dataset {
    /// Builds a dataset from aligned series; `output` names the target.
    pub fn new(series: Vec<TimeSeries>, output: &str) -> Result<Dataset> {
        if series.is_empty() {
            return Err(Error::EmptyData);
        }
        for i in 1..series.len() {
            if !series[0].same_axis(&series[i]) {
                return Err(Error::AxisMismatch {
                    a: series[0].name().to_string(),
                    b: series[i].name().to_string(),
                });
            }
        }
        for i in 0..series.len() {
            for j in i + 1..series.len() {
                if series[i].name() == series[j].name() {
                    return Err(Error::DuplicateSeries {
                        name: series[i].name().to_string(),
                    });
                }
            }
        }
        let output_idx = series
            .iter()
            .position(|s| s.name() == output)
            .ok_or_else(|| Error::UnknownSeries {
                name: output.to_string(),
            })?;
        Ok(Dataset {
            series,
            output: output_idx,
        })
    }

    /// Number of samples (shared by every series).
    pub fn len(&self) -> usize {
        self.series[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> EpochDay {
        self.series[0].start()
    }

    pub fn date_at(&self, index: usize) -> EpochDay {
        self.series[0].date_at(index)
    }

    pub fn series_names(&self) -> Vec<&str> {
        self.series.iter().map(|s| s.name()).collect()
    }

    pub fn series(&self, name: &str) -> Option<&TimeSeries> {
        self.series.iter().find(|s| s.name() == name)
    }

    pub fn output(&self) -> &TimeSeries {
        &self.series[self.output]
    }

    pub fn output_name(&self) -> &str {
        self.series[self.output].name()
    }

    pub fn role(&self, name: &str) -> Option<Role> {
        self.series.iter().position(|s| s.name() == name).map(|i| {
            if i == self.output {
                Role::Output
            } else {
                Role::Input
            }
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &TimeSeries> {
        self.series.iter()
    }

    /// The same dataset with a different series marked as output.
    pub fn with_output(&self, output: &str) -> Result<Dataset> {
        Dataset::new(self.series.clone(), output)
    }

    /// A dataset restricted to `names` (order preserved), re-rolled to `output`.
    pub fn select(&self, names: &[&str], output: &str) -> Result<Dataset> {
        let mut picked = Vec::with_capacity(names.len());
        for &n in names {
            let s = self.series(n).ok_or_else(|| Error::UnknownSeries {
                name: n.to_string(),
            })?;
            picked.push(s.clone());
        }
        Dataset::new(picked, output)
    }

    /// Adds an aligned series (e.g. a derived input) to the dataset.
    pub fn insert(&mut self, series: TimeSeries) -> Result<()> {
        if !self.series[0].same_axis(&series) {
            return Err(Error::AxisMismatch {
                a: self.series[0].name().to_string(),
                b: series.name().to_string(),
            });
        }
        if self.series.iter().any(|s| s.name() == series.name()) {
            return Err(Error::DuplicateSeries {
                name: series.name().to_string(),
            });
        }
        self.series.push(series);
        Ok(())
    }

    /// Serializes as `date,<name>,...` CSV; floats use shortest round-trip form.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str("date");
        for s in &self.series {
            out.push(',');
            out.push_str(s.name());
        }
        out.push('\n');
        for t in 0..self.len() {
            out.push_str(&self.date_at(t).to_string());
            for s in &self.series {
                out.push(',');
                out.push_str(&format!("{}", s.value(t)));
            }
            out.push('\n');
        }
        out
    }
}

/// Contiguous train/test split lengths, applied from the start of the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_len: usize,
    pub test_len: usize,
}

impl SplitSpec {
    pub fn new(train_len: usize, test_len: usize) -> Result<SplitSpec> {
        if train_len == 0 {
            return Err(Error::InvalidSplit {
                reason: "train_len must be at least 1".to_string(),
            });
        }
        Ok(SplitSpec {
            train_len,
            test_len,
        })
    }

    pub fn total(&self) -> usize {
        self.train_len + self.test_len
    }
}

/// Splits every series into a training prefix and the following test block.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if spec.total() > dataset.len() {
        return Err(Error::SplitTooLong {
            requested: spec.total(),
            len: dataset.len(),
        });
    }
    let cut = |range: Range<usize>| -> Dataset {
        let series = dataset
            .iter()
            .map(|s| s.slice(range.clone()))
            .collect::<Vec<_>>();
        Dataset {
            series,
            output: dataset.output,
        }
    };
    let train = cut(0..spec.train_len);
    let test = cut(spec.train_len..spec.train_len + spec.test_len);
    Ok((train, test))
}

/// Pearson correlation between a series and itself shifted by `lag` days.
pub fn lag_autocorrelation(series: &TimeSeries, lag: usize) -> Result<f64> {
    if lag == 0 {
        return Err(Error::UndefinedCorrelation {
            reason: "lag must be positive".to_string(),
        });
    }
    let n = series.len();
    if lag >= n || n - lag < 2 {
        return Err(Error::UndefinedCorrelation {
            reason: format!("need at least lag + 2 = {} samples, got {}", lag + 2, n),
        });
    }
    let head = &series.values()[..n - lag];
    let tail = &series.values()[lag..];
    pearson(tail, head)
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation {
            reason: "a slice is constant (zero variance)".to_string(),
        });
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// What to do when the date column skips days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillPolicy {
    /// Reject the file, naming the first missing date.
    #[default]
    Strict,
    /// Repeat the previous row's values for each missing day.
    ForwardFill,
}

/// Maps CSV columns onto dataset series.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    date_column: String,
    columns: Vec<(String, Role)>,
    fill: FillPolicy,
}

impl CsvSchema {
    /// Builds a schema; exactly one column must carry [`Role::Output`].
    pub fn new(
        date_column: impl Into<String>,
        columns: Vec<(String, Role)>,
        fill: FillPolicy,
    ) -> Result<CsvSchema> {
        if columns.is_empty() {
            return Err(Error::InvalidSchema {
                reason: "schema needs at least one value column".to_string(),
            });
        }
        let outputs = columns.iter().filter(|(_, r)| *r == Role::Output).count();
        if outputs != 1 {
            return Err(Error::InvalidSchema {
                reason: format!("schema must mark exactly one output column, found {outputs}"),
            });
        }
        for i in 0..columns.len() {
            for j in i + 1..columns.len() {
                if columns[i].0 == columns[j].0 {
                    return Err(Error::DuplicateSeries {
                        name: columns[i].0.clone(),
                    });
                }
            }
        }
        Ok(CsvSchema {
            date_column: date_column.into(),
            columns,
            fill,
        })
    }

    pub fn fill(&self) -> FillPolicy {
        self.fill
    }
}

/// Reads a daily CSV file into a [`Dataset`] according to `schema`.
///
/// The file needs a header row; columns not named by the schema are ignored,
/// and lines starting with `#` are treated as comments. Rows are sorted by
/// date; duplicate dates are an error, and gaps follow the schema's
/// [`FillPolicy`].
pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_csv_reader(file, schema)
}

/// Same as [`ingest_csv`] for any reader (useful for in-memory sources).
pub fn ingest_csv_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                name: name.to_string(),
            })
    };
    let date_idx = col_index(&schema.date_column)?;
    let value_idx = schema
        .columns
        .iter()
        .map(|(name, _)| col_index(name))
        .collect::<Result<Vec<_>>>()?;

    // Collect rows keyed by date so ordering is independent of file order.
    let mut rows: BTreeMap<EpochDay, Vec<f64>> = BTreeMap::new();
    for (row_no, record) in rdr.records().enumerate() {
        let record = record?;
        let data_row = row_no + 1;
        let date_str = record.get(date_idx).unwrap_or("");
        let day = EpochDay::parse_iso(date_str).ok_or_else(|| Error::InvalidDate {
            row: data_row,
            value: date_str.to_string(),
        })?;
        let mut values = Vec::with_capacity(value_idx.len());
        for (&idx, (name, _)) in value_idx.iter().zip(&schema.columns) {
            let cell = record.get(idx).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                row: data_row,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumericCell {
                    row: data_row,
                    column: name.clone(),
                    value: cell.to_string(),
                });
            }
            values.push(v);
        }
        if rows.insert(day, values).is_some() {
            return Err(Error::DuplicateDate {
                date: day.to_string(),
            });
        }
    }

    if rows.is_empty() {
        return Err(Error::EmptyData);
    }

    let start = *rows.keys().next().unwrap();
    let end = *rows.keys().next_back().unwrap();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); schema.columns.len()];
    let mut previous: Option<Vec<f64>> = None;
    for offset in 0..=(end.0 - start.0) {
        let day = start.offset(offset);
        match rows.get(&day) {
            Some(values) => {
                for (c, &v) in values.iter().enumerate() {
                    columns[c].push(v);
                }
                previous = Some(values.clone());
            }
            None => match schema.fill {
                FillPolicy::Strict => {
                    return Err(Error::MissingDate {
                        date: day.to_string(),
                    });
                }
                FillPolicy::ForwardFill => {
                    let prev = previous.as_ref().expect("first day always present");
                    for (c, &v) in prev.iter().enumerate() {
                        columns[c].push(v);
                    }
                }
            },
        }
    }

    let mut series = Vec::with_capacity(schema.columns.len());
    let mut output = None;
    for ((name, role), values) in schema.columns.iter().zip(columns) {
        if *role == Role::Output {
            output = Some(name.clone());
        }
        series.push(TimeSeries::new(name.clone(), start, values)?);
    }
    Dataset::new(series, &output.expect("schema has exactly one output"))
}
