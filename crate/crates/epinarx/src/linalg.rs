//! Small dense solvers used for reference fits and cross-checks.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Array2<f64>, mut b: Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "matrix must be square");
    assert_eq!(b.len(), n, "rhs length must match");
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[[col, col]].abs();
        for row in col + 1..n {
            let v = a[[row, col]].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best < 1e-300 {
            return Err(Error::IllConditioned { step: col });
        }
        if pivot != col {
            for k in 0..n {
                let tmp = a[[col, k]];
                a[[col, k]] = a[[pivot, k]];
                a[[pivot, k]] = tmp;
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let factor = a[[row, col]] / a[[col, col]];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[[row, k]] -= factor * a[[col, k]];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[[row, k]] * x[k];
        }
        x[row] = acc / a[[row, row]];
    }
    Ok(x)
}

/// Ordinary least squares through the normal equations `(AᵀA)θ = Aᵀy`.
///
/// Deliberately a different route than the orthogonal-decomposition fit, so
/// the two can cross-check each other.
pub fn least_squares(a: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let k = a.ncols();
    let mut ata = Array2::zeros((k, k));
    let mut aty = Array1::zeros(k);
    for i in 0..k {
        let ci = a.column(i);
        aty[i] = ci.dot(&y);
        for j in i..k {
            let v = ci.dot(&a.column(j));
            ata[[i, j]] = v;
            ata[[j, i]] = v;
        }
    }
    solve_linear(ata, aty)
}

/// Residual sum of squares of `y - a·theta`.
pub fn residual_sum_of_squares(
    a: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    theta: ArrayView1<'_, f64>,
) -> f64 {
    let fitted = a.dot(&theta);
    y.iter()
        .zip(fitted.iter())
        .map(|(t, f)| (t - f) * (t - f))
        .sum()
}
