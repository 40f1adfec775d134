//! Post-hoc interpretation: partial dependence curves and permutation
//! importance, combined into a shortlist of candidate causal drivers.

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::metrics;
use crate::models::{Classifier, DEFAULT_THRESHOLD};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdpPoint {
    pub value: f64,
    pub mean_proba: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpCurve {
    pub feature: String,
    pub points: Vec<PdpPoint>,
    /// The feature was constant; the curve has a single point.
    pub constant_feature: bool,
}

impl PdpCurve {
    pub fn direction(&self) -> Direction {
        const TOL: f64 = 1e-12;
        let diffs: Vec<f64> = self.points.windows(2).map(|w| w[1].mean_proba - w[0].mean_proba).collect();
        let up = diffs.iter().any(|d| *d > TOL);
        let down = diffs.iter().any(|d| *d < -TOL);
        match (up, down) {
            (false, false) => Direction::Flat,
            (true, false) => Direction::Increasing,
            (false, true) => Direction::Decreasing,
            (true, true) => Direction::NonMonotone,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
    NonMonotone,
    Flat,
}

/// Sweeps `feature` over `grid_size` equally spaced values between its
/// observed min and max, averaging the model's probability at each value.
pub fn partial_dependence(
    model: &dyn Classifier,
    ds: &LabeledDataset,
    feature: &str,
    grid_size: usize,
) -> Result<PdpCurve> {
    if grid_size < 2 {
        return Err(Error::invalid("partial dependence needs grid_size >= 2"));
    }
    let j = ds.column_index(feature)?;
    let col = ds.features().column(j);
    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let constant_feature = lo == hi;
    let grid: Vec<f64> = if constant_feature {
        vec![lo]
    } else {
        (0..grid_size)
            .map(|i| lo + (hi - lo) * i as f64 / (grid_size - 1) as f64)
            .collect()
    };
    let mut x: Array2<f64> = ds.features().clone();
    let points = grid
        .into_iter()
        .map(|v| {
            x.column_mut(j).fill(v);
            let p = model.predict_proba(x.view())?;
            Ok(PdpPoint {
                value: v,
                mean_proba: p.iter().sum::<f64>() / p.len() as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PdpCurve {
        feature: feature.to_string(),
        points,
        constant_feature,
    })
}

pub fn write_pdp_csv<W: std::io::Write>(curves: &[PdpCurve], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "grid_value", "mean_proba"])?;
    for c in curves {
        for p in &c.points {
            w.write_record([c.feature.clone(), format!("{}", p.value), format!("{}", p.mean_proba)])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMetric {
    Auc,
    Accuracy,
}

impl ImportanceMetric {
    fn evaluate(self, labels: &[u8], probas: &[f64]) -> Result<f64> {
        match self {
            ImportanceMetric::Auc => metrics::auc(probas, labels),
            ImportanceMetric::Accuracy => Ok(metrics::confusion(labels, probas, DEFAULT_THRESHOLD)?.accuracy()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_drop: f64,
    pub std: f64,
}

/// Drop in `metric` when one column is shuffled, averaged over `n_repeats`
/// shuffles. Sorted by mean drop, largest first (ties keep column order).
pub fn permutation_importance(
    model: &dyn Classifier,
    ds: &LabeledDataset,
    metric: ImportanceMetric,
    n_repeats: usize,
    seed: u64,
) -> Result<Vec<FeatureImportance>> {
    if n_repeats < 1 {
        return Err(Error::invalid("permutation importance needs n_repeats >= 1"));
    }
    let labels = ds.labels();
    let baseline = metric.evaluate(labels, &model.predict_proba(ds.features().view())?)?;
    let mut x = ds.features().clone();
    let mut out = Vec::with_capacity(ds.n_features());
    for (j, name) in ds.feature_names().into_iter().enumerate() {
        let original = ds.features().column(j).to_owned();
        let mut drops = Vec::with_capacity(n_repeats);
        for r in 0..n_repeats {
            let mut values = original.to_vec();
            values.shuffle(&mut rng::sub_rng(rng::derive_seed(seed, j as u64), r as u64));
            x.column_mut(j).iter_mut().zip(values).for_each(|(a, b)| *a = b);
            let score = metric.evaluate(labels, &model.predict_proba(x.view())?)?;
            drops.push(baseline - score);
        }
        x.column_mut(j).assign(&original);
        let mean = drops.iter().sum::<f64>() / n_repeats as f64;
        let std = if n_repeats > 1 {
            (drops.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n_repeats - 1) as f64).sqrt()
        } else {
            0.0
        };
        out.push(FeatureImportance {
            feature: name.to_string(),
            mean_drop: mean,
            std,
        });
    }
    out.sort_by(|a, b| b.mean_drop.total_cmp(&a.mean_drop));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub feature: String,
    pub importance: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shortlist {
    pub candidates: Vec<Candidate>,
    /// `top_k` exceeded the number of features and was clamped.
    pub clamped: bool,
}

impl Shortlist {
    pub fn features(&self) -> Vec<&str> {
        self.candidates.iter().map(|c| c.feature.as_str()).collect()
    }
}

/// Top `top_k` features by importance, each annotated with the direction of
/// its partial dependence curve (`flat` when no curve was supplied).
pub fn shortlist_candidates(importances: &[FeatureImportance], curves: &[PdpCurve], top_k: usize) -> Shortlist {
    let clamped = top_k > importances.len();
    let candidates = importances
        .iter()
        .take(top_k)
        .map(|imp| Candidate {
            feature: imp.feature.clone(),
            importance: imp.mean_drop,
            direction: curves
                .iter()
                .find(|c| c.feature == imp.feature)
                .map_or(Direction::Flat, PdpCurve::direction),
        })
        .collect();
    Shortlist { candidates, clamped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Link, LinearModel};
    use ndarray::array;

    fn linear(w: Vec<f64>, b: f64, link: Link) -> LinearModel {
        LinearModel { weights: w, bias: b, link }
    }

    fn data() -> LabeledDataset {
        let x = array![[0.0, 0.1], [0.1, 0.3], [0.2, 0.0], [0.05, 0.2]];
        LabeledDataset::from_numeric(x, vec![0, 1, 1, 0], &["a", "b"]).unwrap()
    }

    #[test]
    fn ignored_feature_gives_flat_curve() {
        let m = linear(vec![0.0, 1.0], 0.1, Link::Identity);
        let ds = data();
        let c = partial_dependence(&m, &ds, "a", 5).unwrap();
        let means: Vec<f64> = c.points.iter().map(|p| p.mean_proba).collect();
        let spread = means.iter().copied().fold(f64::MIN, f64::max) - means.iter().copied().fold(f64::MAX, f64::min);
        assert!(spread < 1e-12);
        assert_eq!(c.direction(), Direction::Flat);
        assert_eq!(ds, data());
    }

    #[test]
    fn linear_curve_has_weight_slope() {
        let m = linear(vec![2.0, 0.0], 0.0, Link::Identity);
        let c = partial_dependence(&m, &data(), "a", 3).unwrap();
        let slope = (c.points[2].mean_proba - c.points[0].mean_proba) / (c.points[2].value - c.points[0].value);
        assert!((slope - 2.0).abs() < 1e-12);
        assert_eq!(c.points[0].value, 0.0);
        assert_eq!(c.points[2].value, 0.2);
    }

    #[test]
    fn logistic_curve_direction_follows_weight_sign() {
        let ds = data();
        let up = partial_dependence(&linear(vec![3.0, 1.0], 0.0, Link::Logistic), &ds, "a", 6).unwrap();
        let down = partial_dependence(&linear(vec![-3.0, 1.0], 0.0, Link::Logistic), &ds, "a", 6).unwrap();
        assert_eq!(up.direction(), Direction::Increasing);
        assert_eq!(down.direction(), Direction::Decreasing);
    }

    #[test]
    fn constant_feature_single_point() {
        let x = array![[1.0, 0.0], [1.0, 1.0]];
        let ds = LabeledDataset::from_numeric(x, vec![0, 1], &["k", "v"]).unwrap();
        let c = partial_dependence(&linear(vec![0.0, 1.0], 0.0, Link::Identity), &ds, "k", 4).unwrap();
        assert!(c.constant_feature);
        assert_eq!(c.points.len(), 1);
    }

    #[test]
    fn importance_is_deterministic_and_ranks() {
        let ds = data();
        let m = linear(vec![0.0, 5.0], -0.5, Link::Logistic);
        let a = permutation_importance(&m, &ds, ImportanceMetric::Auc, 1, 4).unwrap();
        let b = permutation_importance(&m, &ds, ImportanceMetric::Auc, 1, 4).unwrap();
        assert_eq!(a, b);
        let zero = a.iter().find(|f| f.feature == "a").unwrap();
        assert_eq!(zero.mean_drop, 0.0);
        assert!(permutation_importance(&m, &ds, ImportanceMetric::Auc, 0, 4).is_err());
    }

    #[test]
    fn shortlist_clamps_and_annotates() {
        let imps = vec![
            FeatureImportance { feature: "b".into(), mean_drop: 0.3, std: 0.0 },
            FeatureImportance { feature: "a".into(), mean_drop: 0.1, std: 0.0 },
        ];
        let ds = data();
        let curve = partial_dependence(&linear(vec![0.0, -1.0], 0.5, Link::Identity), &ds, "b", 3).unwrap();
        let s = shortlist_candidates(&imps, &[curve], 5);
        assert!(s.clamped);
        assert_eq!(s.features(), ["b", "a"]);
        assert_eq!(s.candidates[0].direction, Direction::Decreasing);
        assert_eq!(s.candidates[1].direction, Direction::Flat);
    }
}
