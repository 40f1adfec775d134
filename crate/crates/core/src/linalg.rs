//! Small dense least-squares helpers shared by the linear models, RFE and the
//! regression estimator.

use nalgebra::{DMatrix, DVector};
use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Ridge used to keep the normal equations positive definite.
pub const RIDGE_EPS: f64 = 1e-8;

/// Solution of a ridge-stabilised least-squares problem.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Set when the Gram matrix was numerically singular before the ridge.
    pub ill_conditioned: bool,
}

/// Minimises `sum_k (w . x_k + b - y_k)^2 + ridge * |w|^2` through the normal
/// equations. The intercept is not penalised.
pub fn least_squares(x: ArrayView2<f64>, y: &[f64], ridge: f64) -> Result<LeastSquares> {
    let (n, d) = x.dim();
    if n != y.len() {
        return Err(Error::invalid(format!(
            "least squares: {n} rows but {} targets",
            y.len()
        )));
    }
    // augmented design [x | 1]
    let p = d + 1;
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    let mut row = vec![0.0; p];
    for (k, xr) in x.outer_iter().enumerate() {
        row[..d].iter_mut().zip(xr.iter()).for_each(|(r, v)| *r = *v);
        row[d] = 1.0;
        for i in 0..p {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            rhs[i] += ri * y[k];
            for j in i..p {
                gram[(i, j)] += ri * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    let max_diag = (0..p).map(|i| gram[(i, i)].abs()).fold(0.0, f64::max);
    let ill_conditioned = match gram.clone().cholesky() {
        Some(c) => {
            let min_l = (0..p).map(|i| c.l()[(i, i)]).fold(f64::INFINITY, f64::min);
            min_l * min_l < 1e-12 * max_diag.max(1.0)
        }
        None => true,
    };
    for i in 0..d {
        gram[(i, i)] += ridge;
    }
    let solution = match gram.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => {
            // intercept column may be all zeros when n == 0; fall back to LU
            gram[(d, d)] += ridge;
            gram.lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Linalg("singular normal equations".into()))?
        }
    };
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::Linalg("non-finite least-squares solution".into()));
    }
    Ok(LeastSquares {
        weights: solution.iter().take(d).copied().collect(),
        intercept: solution[d],
        ill_conditioned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exact_line() {
        let x = array![[0.0], [1.0], [2.0]];
        let fit = least_squares(x.view(), &[1.0, 3.0, 5.0], RIDGE_EPS).unwrap();
        assert!((fit.weights[0] - 2.0).abs() < 1e-6);
        assert!((fit.intercept - 1.0).abs() < 1e-6);
        assert!(!fit.ill_conditioned);
    }

    #[test]
    fn duplicated_column_is_flagged_but_solved() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let fit = least_squares(x.view(), &[0.0, 2.0, 4.0, 6.0], RIDGE_EPS).unwrap();
        assert!(fit.ill_conditioned);
        assert!((fit.weights[0] + fit.weights[1] - 2.0).abs() < 1e-4);
    }
}
