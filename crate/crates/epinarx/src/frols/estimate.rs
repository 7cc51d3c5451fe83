//! Parameter estimation and significance levels for a selected term set.

use ndarray::{Array1, Array2};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dictionary::RegressionProblem;
use crate::error::{Error, Result};

use super::{IdentifiedModel, SelectionTrace};

/// Orthogonal decomposition of a selected column set: `P = Q·R` with `Q`
/// column-orthogonal (not normalized) and `R` unit upper triangular.
#[derive(Debug)]
pub(crate) struct OrthoFit {
    pub q: Vec<Array1<f64>>,
    /// Squared norms of the `q` columns.
    pub d: Vec<f64>,
    pub r: Array2<f64>,
    /// Projections of the target onto the `q` columns.
    pub g: Vec<f64>,
    /// Explicit residual `y − Σ gₖ qₖ`.
    pub residual: Array1<f64>,
}

/// Decomposes the columns of `problem` named by `indices`, in that order.
///
/// Uses modified Gram–Schmidt with a second clean-up pass; the projection
/// coefficients of both passes are accumulated into `R`, so `P = Q·R` holds
/// for the vectors actually produced. Fails with [`Error::IllConditioned`]
/// when a column is numerically dependent on its predecessors.
pub(crate) fn orthogonal_fit(problem: &RegressionProblem, indices: &[usize]) -> Result<OrthoFit> {
    let n = indices.len();
    let rows = problem.n_rows();
    if rows < n {
        return Err(Error::InsufficientData {
            rows,
            terms: n,
            context: "orthogonal decomposition".to_string(),
        });
    }
    let y = problem.target();
    let mut q: Vec<Array1<f64>> = Vec::with_capacity(n);
    let mut d: Vec<f64> = Vec::with_capacity(n);
    let mut g: Vec<f64> = Vec::with_capacity(n);
    let mut r = Array2::eye(n);

    for (j, &col_idx) in indices.iter().enumerate() {
        let phi = problem.column(col_idx);
        let phi_energy = phi.dot(&phi);
        let mut v = phi.to_owned();
        for _ in 0..2 {
            for k in 0..j {
                let c = v.dot(&q[k]) / d[k];
                v.scaled_add(-c, &q[k]);
                r[[k, j]] += c;
            }
        }
        let dj = v.dot(&v);
        if dj <= phi_energy * 1e-20 {
            return Err(Error::IllConditioned { step: j });
        }
        g.push(y.dot(&v) / dj);
        q.push(v);
        d.push(dj);
    }

    let mut residual = y.to_owned();
    for k in 0..n {
        residual.scaled_add(-g[k], &q[k]);
    }

    Ok(OrthoFit { q, d, r, g, residual })
}

/// Solves `R·θ = g` for unit-upper-triangular `R` by back-substitution.
pub(crate) fn back_substitute(r: &Array2<f64>, g: &[f64]) -> Vec<f64> {
    let n = g.len();
    let mut theta = vec![0.0; n];
    for k in (0..n).rev() {
        let mut v = g[k];
        for j in k + 1..n {
            v -= r[[k, j]] * theta[j];
        }
        theta[k] = v;
    }
    theta
}

/// Inverse of a unit upper triangular matrix (also unit upper triangular).
pub(crate) fn invert_unit_upper(r: &Array2<f64>) -> Array2<f64> {
    let n = r.nrows();
    let mut u = Array2::eye(n);
    for j in 0..n {
        for k in (0..j).rev() {
            let mut v = 0.0;
            for m in k + 1..=j {
                v -= r[[k, m]] * u[[m, j]];
            }
            u[[k, j]] = v;
        }
    }
    u
}

/// Least-squares coefficients for the columns a selection trace picked, in
/// selection order.
///
/// The estimate reuses the orthogonal decomposition: the target's projection
/// coefficients on the orthogonal basis are mapped back through the
/// triangular factor, which reproduces the ordinary least-squares solution on
/// the same columns.
pub fn estimate_parameters(problem: &RegressionProblem, trace: &SelectionTrace) -> Result<Vec<f64>> {
    let fit = orthogonal_fit(problem, &trace.indices())?;
    Ok(back_substitute(&fit.r, &fit.g))
}

/// Residual threshold below which the fit is treated as exact and every
/// p-value reported as zero (a t-statistic against zero noise is meaningless).
const EXACT_FIT_REL: f64 = 1e-24;

/// Two-sided t-test p-values for each of the model's terms, computed from a
/// least-squares refit of those terms on `problem`.
///
/// The coefficient covariance is `s²·(PᵀP)⁻¹`, evaluated through the
/// orthogonal decomposition as `s²·R⁻¹D⁻¹R⁻ᵀ` with `D` the diagonal of
/// squared basis norms; `s²` is the residual variance with `N − n` degrees of
/// freedom.
pub fn compute_p_values(problem: &RegressionProblem, model: &IdentifiedModel) -> Result<Vec<f64>> {
    let indices: Vec<usize> = model
        .terms()
        .iter()
        .map(|t| {
            problem.column_of(t).ok_or_else(|| Error::TermNotInProblem {
                term: t.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    p_values_for_indices(problem, &indices)
}

pub(crate) fn p_values_for_indices(problem: &RegressionProblem, indices: &[usize]) -> Result<Vec<f64>> {
    let n = indices.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let rows = problem.n_rows();
    if rows <= n {
        return Err(Error::InsufficientData {
            rows,
            terms: n,
            context: "t-test requires more rows than terms".to_string(),
        });
    }
    let fit = orthogonal_fit(problem, indices)?;
    let theta = back_substitute(&fit.r, &fit.g);
    let rss = fit.residual.dot(&fit.residual);
    let y = problem.target();
    let y_energy = y.dot(y);
    if rss <= y_energy * EXACT_FIT_REL {
        return Ok(vec![0.0; n]);
    }
    let dof = (rows - n) as f64;
    let s2 = rss / dof;
    let u = invert_unit_upper(&fit.r);
    let dist = StudentsT::new(0.0, 1.0, dof).expect("dof >= 1");
    let mut p = Vec::with_capacity(n);
    for k in 0..n {
        let mut var_k = 0.0;
        for m in k..n {
            var_k += u[[k, m]] * u[[k, m]] / fit.d[m];
        }
        let se = (s2 * var_k).sqrt();
        if se == 0.0 {
            p.push(0.0);
            continue;
        }
        let t = theta[k] / se;
        p.push(2.0 * dist.cdf(-t.abs()));
    }
    Ok(p)
}
