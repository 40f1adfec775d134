//! Recursive feature elimination driven by the second-order weight criterion
//! of a linear least-squares model.
//!
//! Removing feature `i` from a model at its optimum changes the cost by roughly
//! `0.5 * H_ii * w_i^2`. RFE refits, scores every remaining feature this way and
//! drops the cheapest ones until the requested number is left. Inputs should be
//! standardised so that the weights are comparable across features.

use std::collections::BTreeMap;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{self, RIDGE_EPS};

/// `0.5 * hessian_diag[i] * weights[i]^2` for every feature.
pub fn criterion(weights: &[f64], hessian_diag: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != hessian_diag.len() {
        return Err(Error::invalid(format!(
            "criterion: {} weights vs {} hessian entries",
            weights.len(),
            hessian_diag.len()
        )));
    }
    if let Some(h) = hessian_diag.iter().find(|h| **h < 0.0) {
        return Err(Error::invalid(format!("criterion: negative hessian entry {h}")));
    }
    Ok(weights
        .iter()
        .zip(hessian_diag)
        .map(|(w, h)| 0.5 * h * w * w)
        .collect())
}

/// Ranking-equivalent criterion when the Hessian diagonal is constant.
pub fn criterion_squared_weights(weights: &[f64]) -> Vec<f64> {
    weights.iter().map(|w| w * w).collect()
}

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub weights: Vec<f64>,
    pub hessian_diag: Vec<f64>,
}

/// Linear model used inside the elimination loop.
pub trait LinearTrainer {
    fn fit(&self, x: ArrayView2<f64>, y: &[f64]) -> Result<LinearFit>;
}

/// Minimises `J = sum (w . x + b - y)^2`; its Hessian diagonal is `2 sum x_i^2`.
#[derive(Debug, Clone, Copy)]
pub struct LeastSquaresTrainer {
    pub ridge: f64,
}

impl Default for LeastSquaresTrainer {
    fn default() -> Self {
        Self { ridge: RIDGE_EPS }
    }
}

impl LinearTrainer for LeastSquaresTrainer {
    fn fit(&self, x: ArrayView2<f64>, y: &[f64]) -> Result<LinearFit> {
        let ls = linalg::least_squares(x, y, self.ridge)?;
        let hessian_diag = x
            .columns()
            .into_iter()
            .map(|c| 2.0 * c.iter().map(|v| v * v).sum::<f64>())
            .collect();
        Ok(LinearFit {
            weights: ls.weights,
            hessian_diag,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// First removed to last removed.
    pub elimination_order: Vec<String>,
    /// Criterion of every feature still present, one map per iteration.
    pub criterion_trace: Vec<BTreeMap<String, f64>>,
    /// Retained features in original column order.
    pub kept: Vec<String>,
}

impl FeatureRanking {
    pub fn apply(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        ds.select_named(&self.kept)
    }
}

/// Eliminates `step` features per iteration (fewer on the last one) until
/// `n_keep` remain. Equal criteria remove the later column first.
pub fn rfe(
    ds: &LabeledDataset,
    n_keep: usize,
    step: usize,
    trainer: &dyn LinearTrainer,
) -> Result<(FeatureRanking, LabeledDataset)> {
    let d = ds.n_features();
    if n_keep < 1 || n_keep > d {
        return Err(Error::invalid(format!("rfe: n_keep {n_keep} not in 1..={d}")));
    }
    if step < 1 {
        return Err(Error::invalid("rfe: step must be >= 1"));
    }
    let y = ds.labels_f64();
    let names = ds.feature_names();
    let mut active: Vec<usize> = (0..d).collect();
    let mut elimination_order = Vec::new();
    let mut criterion_trace = Vec::new();
    let mut iteration = 0;
    while active.len() > n_keep {
        let sub = ds.features().select(ndarray::Axis(1), &active);
        let fit = trainer.fit(sub.view(), &y).map_err(|e| Error::Rfe {
            iteration,
            source: Box::new(e),
        })?;
        let scores = criterion(&fit.weights, &fit.hessian_diag)?;
        criterion_trace.push(
            active
                .iter()
                .zip(&scores)
                .map(|(&j, &s)| (names[j].to_string(), s))
                .collect(),
        );
        let mut order: Vec<usize> = (0..active.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(active[b].cmp(&active[a])));
        let n_remove = step.min(active.len() - n_keep);
        let mut removed: Vec<usize> = order[..n_remove].to_vec();
        for &k in &removed {
            elimination_order.push(names[active[k]].to_string());
        }
        removed.sort_unstable();
        for k in removed.into_iter().rev() {
            active.remove(k);
        }
        iteration += 1;
    }
    let kept: Vec<String> = active.iter().map(|&j| names[j].to_string()).collect();
    let reduced = ds.select_columns(&active);
    Ok((
        FeatureRanking {
            elimination_order,
            criterion_trace,
            kept,
        },
        reduced,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn criterion_values() {
        assert_eq!(criterion(&[2.0, -1.0, 0.0], &[1.0; 3]).unwrap(), vec![2.0, 0.5, 0.0]);
        assert!(criterion(&[1.0], &[1.0, 1.0]).is_err());
        assert!(criterion(&[1.0], &[-1.0]).is_err());
        let s = criterion_squared_weights(&[3.0, -0.5]);
        let scaled = criterion_squared_weights(&[6.0, -1.0]);
        assert_eq!(scaled, s.iter().map(|v| v * 4.0).collect::<Vec<_>>());
    }

    struct Fixed(Vec<f64>);

    impl LinearTrainer for Fixed {
        fn fit(&self, x: ArrayView2<f64>, _y: &[f64]) -> Result<LinearFit> {
            let d = x.ncols();
            Ok(LinearFit {
                weights: self.0[..d].to_vec(),
                hessian_diag: vec![1.0; d],
            })
        }
    }

    fn ds(d: usize) -> LabeledDataset {
        let x = Array2::from_shape_fn((6, d), |(i, j)| ((i * 3 + j) % 5) as f64);
        let names: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        LabeledDataset::from_numeric(x, vec![0, 1, 0, 1, 1, 0], &refs).unwrap()
    }

    #[test]
    fn identity_when_keeping_everything() {
        let (rank, reduced) = rfe(&ds(4), 4, 1, &LeastSquaresTrainer::default()).unwrap();
        assert!(rank.elimination_order.is_empty());
        assert_eq!(reduced, ds(4));
    }

    #[test]
    fn batched_landing_rule() {
        let (rank, reduced) = rfe(&ds(10), 2, 3, &LeastSquaresTrainer::default()).unwrap();
        let sizes: Vec<usize> = rank.criterion_trace.iter().map(|m| m.len()).collect();
        // 10 -> 7 -> 4 -> 2: removals of 3, 3, 2
        assert_eq!(sizes, vec![10, 7, 4]);
        assert_eq!(rank.elimination_order.len(), 8);
        assert_eq!(reduced.n_features(), 2);
    }

    #[test]
    fn ties_remove_later_column_first() {
        let (rank, _) = rfe(&ds(3), 1, 1, &Fixed(vec![1.0, 1.0, 1.0])).unwrap();
        assert_eq!(rank.elimination_order, vec!["f2", "f1"]);
        assert_eq!(rank.kept, vec!["f0"]);
    }

    #[test]
    fn n_keep_bounds() {
        assert!(rfe(&ds(3), 4, 1, &LeastSquaresTrainer::default()).is_err());
        assert!(rfe(&ds(3), 0, 1, &LeastSquaresTrainer::default()).is_err());
    }
}
