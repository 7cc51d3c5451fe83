//! Polynomial lagged-term dictionaries and their regression matrices.
//!
//! A dictionary is the ordered candidate set for term selection: every
//! monomial of total degree 1..=`degree` over the lagged variables, plus an
//! optional constant. Ordering is deterministic — by total degree ascending,
//! then lexicographically on the canonical factor list — so identical
//! specifications always produce identical dictionaries.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// One lagged variable inside a term, e.g. `u(t-12)`.
///
/// Factors order by variable name, then lag; terms keep their factors sorted
/// in that canonical order so equal terms always compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Factor {
    pub variable: String,
    pub lag: usize,
}

impl Factor {
    pub fn new(variable: impl Into<String>, lag: usize) -> Factor {
        Factor {
            variable: variable.into(),
            lag,
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lag == 0 {
            write!(f, "{}(t)", self.variable)
        } else {
            write!(f, "{}(t-{})", self.variable, self.lag)
        }
    }
}

/// A product of lagged variables; the empty product is the constant term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    factors: Vec<Factor>,
}

impl Term {
    /// Builds a term from factors, normalizing to canonical order.
    pub fn new(mut factors: Vec<Factor>) -> Term {
        factors.sort();
        Term { factors }
    }

    /// The constant term (empty product, value 1).
    pub fn constant() -> Term {
        Term {
            factors: Vec::new(),
        }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Total degree; 0 for the constant term.
    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    pub fn is_constant(&self) -> bool {
        self.factors.is_empty()
    }

    /// Largest lag among the factors (0 for the constant term).
    pub fn max_lag(&self) -> usize {
        self.factors.iter().map(|f| f.lag).max().unwrap_or(0)
    }

    /// Smallest lag among the factors (0 for the constant term).
    pub fn min_lag(&self) -> usize {
        self.factors.iter().map(|f| f.lag).min().unwrap_or(0)
    }

    /// True if any factor references `variable`.
    pub fn references(&self, variable: &str) -> bool {
        self.factors.iter().any(|f| f.variable == variable)
    }
}

impl fmt::Display for Term {
    /// Renders like the identification literature: `u^2(t-1)*y(t-12)`, `1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        let mut i = 0;
        while i < self.factors.len() {
            let mut power = 1;
            while i + power < self.factors.len() && self.factors[i + power] == self.factors[i] {
                power += 1;
            }
            if !first {
                write!(f, "*")?;
            }
            let fac = &self.factors[i];
            if power == 1 {
                write!(f, "{fac}")?;
            } else if fac.lag == 0 {
                write!(f, "{}^{}(t)", fac.variable, power)?;
            } else {
                write!(f, "{}^{}(t-{})", fac.variable, power, fac.lag)?;
            }
            first = false;
            i += power;
        }
        Ok(())
    }
}

/// Contiguous lag range for one variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableLags {
    pub name: String,
    pub min_lag: usize,
    pub max_lag: usize,
}

impl VariableLags {
    pub fn new(name: impl Into<String>, min_lag: usize, max_lag: usize) -> VariableLags {
        VariableLags {
            name: name.into(),
            min_lag,
            max_lag,
        }
    }

    fn lag_count(&self) -> usize {
        self.max_lag - self.min_lag + 1
    }
}

/// Which lagged variables and polynomial degree a dictionary is built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagSpec {
    output_name: String,
    output_lags: Option<(usize, usize)>,
    inputs: Vec<VariableLags>,
    degree: usize,
    include_constant: bool,
}

impl LagSpec {
    /// Builds and validates a lag specification.
    ///
    /// The output may only enter with lag >= 1 (its present value is the
    /// regression target, never a regressor); inputs may use lag 0.
    pub fn new(
        output_name: impl Into<String>,
        output_lags: Option<(usize, usize)>,
        inputs: Vec<VariableLags>,
        degree: usize,
        include_constant: bool,
    ) -> Result<LagSpec> {
        let output_name = output_name.into();
        if degree == 0 {
            return Err(Error::InvalidLagSpec {
                reason: "degree must be at least 1".to_string(),
            });
        }
        if let Some((min, max)) = output_lags {
            if min == 0 {
                return Err(Error::InvalidLagSpec {
                    reason: format!("output '{output_name}' cannot appear at lag 0"),
                });
            }
            if min > max {
                return Err(Error::InvalidLagSpec {
                    reason: format!("output lag range {min}..={max} is empty"),
                });
            }
        }
        for v in &inputs {
            if v.min_lag > v.max_lag {
                return Err(Error::InvalidLagSpec {
                    reason: format!(
                        "input '{}' lag range {}..={} is empty",
                        v.name, v.min_lag, v.max_lag
                    ),
                });
            }
            if v.name == output_name {
                return Err(Error::InvalidLagSpec {
                    reason: format!("input '{}' reuses the output name", v.name),
                });
            }
        }
        for i in 0..inputs.len() {
            for j in i + 1..inputs.len() {
                if inputs[i].name == inputs[j].name {
                    return Err(Error::InvalidLagSpec {
                        reason: format!("input '{}' listed twice", inputs[i].name),
                    });
                }
            }
        }
        Ok(LagSpec {
            output_name,
            output_lags,
            inputs,
            degree,
            include_constant,
        })
    }

    pub fn output_name(&self) -> &str {
        &self.output_name
    }

    pub fn output_lags(&self) -> Option<(usize, usize)> {
        self.output_lags
    }

    pub fn inputs(&self) -> &[VariableLags] {
        &self.inputs
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn include_constant(&self) -> bool {
        self.include_constant
    }

    /// Total number of (variable, lag) regressor pairs.
    pub fn lagged_variable_count(&self) -> usize {
        let out = self.output_lags.map(|(lo, hi)| hi - lo + 1).unwrap_or(0);
        out + self.inputs.iter().map(|v| v.lag_count()).sum::<usize>()
    }

    /// Largest lag across every variable (0 if only a constant is possible).
    pub fn max_lag(&self) -> usize {
        let out = self.output_lags.map(|(_, hi)| hi).unwrap_or(0);
        let inp = self.inputs.iter().map(|v| v.max_lag).max().unwrap_or(0);
        out.max(inp)
    }

    /// Every (variable, lag) pair in canonical (name, lag) order.
    fn lagged_variables(&self) -> Vec<Factor> {
        let mut vars = Vec::with_capacity(self.lagged_variable_count());
        if let Some((lo, hi)) = self.output_lags {
            for lag in lo..=hi {
                vars.push(Factor::new(self.output_name.clone(), lag));
            }
        }
        for v in &self.inputs {
            for lag in v.min_lag..=v.max_lag {
                vars.push(Factor::new(v.name.clone(), lag));
            }
        }
        vars.sort();
        vars
    }
}

/// An ordered candidate-term set together with the [`LagSpec`] that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    terms: Vec<Term>,
    spec: LagSpec,
    max_lag: usize,
}

impl Dictionary {
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term(&self, index: usize) -> &Term {
        &self.terms[index]
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn spec(&self) -> &LagSpec {
        &self.spec
    }

    /// Largest lag any term reaches; rows before it cannot be evaluated.
    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// Wraps an explicit term list (e.g. a fitted model's terms) for
    /// evaluation, synthesizing per-variable lag ranges from the factors.
    pub fn from_terms(output_name: &str, terms: Vec<Term>) -> Result<Dictionary> {
        if terms.is_empty() {
            return Err(Error::EmptyDictionary);
        }
        for i in 0..terms.len() {
            for j in i + 1..terms.len() {
                if terms[i] == terms[j] {
                    return Err(Error::InvalidLagSpec {
                        reason: format!("term '{}' listed twice", terms[i]),
                    });
                }
            }
        }
        let mut ranges: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        let mut degree = 1;
        let mut include_constant = false;
        for t in &terms {
            if t.is_constant() {
                include_constant = true;
            }
            degree = degree.max(t.degree());
            for f in t.factors() {
                let e = ranges
                    .entry(f.variable.clone())
                    .or_insert((f.lag, f.lag));
                e.0 = e.0.min(f.lag);
                e.1 = e.1.max(f.lag);
            }
        }
        let output_lags = ranges.get(output_name).copied();
        let inputs = ranges
            .iter()
            .filter(|(name, _)| name.as_str() != output_name)
            .map(|(name, &(lo, hi))| VariableLags::new(name.clone(), lo, hi))
            .collect();
        let spec = LagSpec::new(output_name, output_lags, inputs, degree, include_constant)?;
        let max_lag = terms.iter().map(Term::max_lag).max().unwrap_or(0);
        Ok(Dictionary {
            terms,
            spec,
            max_lag,
        })
    }
}

/// Enumerates every candidate term for `spec` in the documented order.
pub fn build_dictionary(spec: &LagSpec) -> Result<Dictionary> {
    let vars = spec.lagged_variables();
    if vars.is_empty() && !spec.include_constant() {
        return Err(Error::EmptyDictionary);
    }
    let mut terms = Vec::new();
    if spec.include_constant() {
        terms.push(Term::constant());
    }
    for degree in 1..=spec.degree() {
        if vars.is_empty() {
            break;
        }
        append_multisets(&vars, degree, &mut terms);
    }
    if terms.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    let max_lag = spec.max_lag();
    Ok(Dictionary {
        terms,
        spec: spec.clone(),
        max_lag,
    })
}

/// Pushes all degree-`k` multisets over `vars` in lexicographic order.
fn append_multisets(vars: &[Factor], k: usize, out: &mut Vec<Term>) {
    let n = vars.len();
    let mut idx = vec![0usize; k];
    'outer: loop {
        out.push(Term {
            factors: idx.iter().map(|&i| vars[i].clone()).collect(),
        });
        let mut i = k;
        while i > 0 {
            i -= 1;
            if idx[i] + 1 < n {
                let v = idx[i] + 1;
                for slot in idx.iter_mut().skip(i) {
                    *slot = v;
                }
                continue 'outer;
            }
        }
        break;
    }
}

/// A dictionary evaluated over a dataset: one column per term, one row per
/// time step from `first_valid_t` (= max lag) to the end of the data.
#[derive(Debug, Clone)]
pub struct RegressionProblem {
    columns: Array2<f64>,
    target: Array1<f64>,
    first_valid_t: usize,
    terms: Vec<Term>,
}

impl RegressionProblem {
    /// Builds a problem from an explicit matrix, target, and column labels.
    ///
    /// [`evaluate`] is the usual constructor; this one exists for synthetic
    /// problems whose columns are not dictionary evaluations of a dataset.
    ///
    /// # Panics
    ///
    /// Panics when the shapes disagree: `target` must have one entry per
    /// matrix row and `terms` one label per matrix column.
    pub fn from_parts(
        columns: Array2<f64>,
        target: Array1<f64>,
        first_valid_t: usize,
        terms: Vec<Term>,
    ) -> RegressionProblem {
        assert_eq!(columns.nrows(), target.len(), "row count mismatch");
        assert_eq!(columns.ncols(), terms.len(), "column label mismatch");
        RegressionProblem {
            columns,
            target,
            first_valid_t,
            terms,
        }
    }

    pub fn columns(&self) -> &Array2<f64> {
        &self.columns
    }

    pub fn column(&self, index: usize) -> ndarray::ArrayView1<'_, f64> {
        self.columns.column(index)
    }

    pub fn target(&self) -> &Array1<f64> {
        &self.target
    }

    pub fn n_rows(&self) -> usize {
        self.columns.nrows()
    }

    pub fn n_terms(&self) -> usize {
        self.columns.ncols()
    }

    /// Column labels, aligned with the matrix columns.
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Offset of row 0 in the source dataset's time index.
    pub fn first_valid_t(&self) -> usize {
        self.first_valid_t
    }

    /// Finds the column whose label equals `term`.
    pub fn column_of(&self, term: &Term) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    /// Copies out the rows in `ranges` (used for contiguous-block folds).
    pub fn subset_rows(&self, ranges: &[std::ops::Range<usize>]) -> RegressionProblem {
        let rows: Vec<usize> = ranges.iter().flat_map(|r| r.clone()).collect();
        let mut columns = Array2::zeros((rows.len(), self.n_terms()));
        let mut target = Array1::zeros(rows.len());
        for (new_r, &old_r) in rows.iter().enumerate() {
            target[new_r] = self.target[old_r];
            for c in 0..self.n_terms() {
                columns[[new_r, c]] = self.columns[[old_r, c]];
            }
        }
        RegressionProblem {
            columns,
            target,
            first_valid_t: self.first_valid_t,
            terms: self.terms.clone(),
        }
    }
}

/// Builds the regression matrix and target for `dictionary` over `dataset`.
///
/// The first `max_lag` samples are trimmed (no padding), so the matrix has
/// `dataset.len() - max_lag` rows. Columns are filled in parallel; each
/// column's arithmetic is independent, so the result is identical to a
/// sequential evaluation.
pub fn evaluate(dictionary: &Dictionary, dataset: &Dataset) -> Result<RegressionProblem> {
    let spec = dictionary.spec();
    if dataset.output_name() != spec.output_name() {
        return Err(Error::OutputMismatch {
            dataset: dataset.output_name().to_string(),
            spec: spec.output_name().to_string(),
        });
    }
    // Resolve every referenced variable up front so errors name the variable.
    let mut name_to_col: BTreeMap<&str, &[f64]> = BTreeMap::new();
    for term in dictionary.terms() {
        for f in term.factors() {
            if !name_to_col.contains_key(f.variable.as_str()) {
                let series = dataset.series(&f.variable).ok_or_else(|| Error::UnknownVariable {
                    name: f.variable.clone(),
                })?;
                name_to_col.insert(f.variable.as_str(), series.values());
            }
        }
    }
    let max_lag = dictionary.max_lag();
    let n = dataset.len();
    if n <= max_lag {
        return Err(Error::SeriesTooShort { len: n, max_lag });
    }
    let n_rows = n - max_lag;
    let target_values = dataset.output().values();

    let cols: Vec<Vec<f64>> = dictionary
        .terms()
        .par_iter()
        .map(|term| {
            let factor_cols: Vec<(&[f64], usize)> = term
                .factors()
                .iter()
                .map(|f| (name_to_col[f.variable.as_str()], f.lag))
                .collect();
            (0..n_rows)
                .map(|row| {
                    let t = max_lag + row;
                    factor_cols
                        .iter()
                        .map(|(vals, lag)| vals[t - lag])
                        .product::<f64>()
                })
                .collect()
        })
        .collect();

    let mut columns = Array2::zeros((n_rows, dictionary.len()));
    for (c, col) in cols.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            columns[[r, c]] = v;
        }
    }
    let target = Array1::from_iter(target_values[max_lag..].iter().copied());
    Ok(RegressionProblem {
        columns,
        target,
        first_valid_t: max_lag,
        terms: dictionary.terms().to_vec(),
    })
}
