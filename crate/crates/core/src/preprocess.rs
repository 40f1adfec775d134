//! Standardisation, one-hot encoding, SMOTE oversampling and correlation
//! screening.

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureKind, FeatureSpec, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng;

/// Per-column location and (population) scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns with zero standard deviation; they standardise to 0.
    pub constant: Vec<bool>,
}

pub fn standardize_fit(matrix: ArrayView2<f64>) -> Result<ScalerParams> {
    let (n, d) = matrix.dim();
    if n == 0 || d == 0 {
        return Err(Error::invalid("standardize: empty matrix"));
    }
    let mut mean = Vec::with_capacity(d);
    let mut std = Vec::with_capacity(d);
    for col in matrix.axis_iter(Axis(1)) {
        let m = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
        mean.push(m);
        std.push(var.sqrt());
    }
    let constant = std.iter().map(|&s| s == 0.0).collect();
    Ok(ScalerParams { mean, std, constant })
}

impl ScalerParams {
    pub fn apply(&self, matrix: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(matrix.ncols())?;
        let mut out = matrix.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            if self.constant[j] {
                col.fill(0.0);
            } else {
                col.mapv_inplace(|v| (v - self.mean[j]) / self.std[j]);
            }
        }
        Ok(out)
    }

    /// Maps standardised values back; constant columns return their mean.
    pub fn inverse(&self, matrix: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(matrix.ncols())?;
        let mut out = matrix.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| v * self.std[j] + self.mean[j]);
        }
        Ok(out)
    }

    pub fn apply_dataset(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        if let Some(s) = ds.specs().iter().find(|s| s.is_nominal()) {
            return Err(Error::invalid(format!(
                "standardize: nominal column `{}` must be one-hot encoded first",
                s.name
            )));
        }
        ds.with_features(self.apply(ds.features().view())?, ds.specs().to_vec())
    }

    fn check_width(&self, d: usize) -> Result<()> {
        if d != self.mean.len() {
            return Err(Error::invalid(format!(
                "scaler fitted on {} columns, got {d}",
                self.mean.len()
            )));
        }
        Ok(())
    }
}

pub fn standardize_apply(matrix: ArrayView2<f64>, params: &ScalerParams) -> Result<Array2<f64>> {
    params.apply(matrix)
}

/// Category vocabulary per nominal column, learned on a fitting dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    pub columns: Vec<EncodedColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedColumn {
    pub name: String,
    pub categories: Vec<String>,
}

impl OneHotEncoder {
    /// Learns the categories actually observed in each nominal column.
    pub fn fit(ds: &LabeledDataset) -> Self {
        let columns = ds
            .specs()
            .iter()
            .enumerate()
            .filter_map(|(j, spec)| match &spec.kind {
                FeatureKind::Nominal { categories } => {
                    let seen: BTreeSet<&str> = ds
                        .features()
                        .column(j)
                        .iter()
                        .map(|&code| categories[code as usize].as_str())
                        .collect();
                    Some(EncodedColumn {
                        name: spec.name.clone(),
                        categories: seen.into_iter().map(str::to_string).collect(),
                    })
                }
                FeatureKind::Numeric => None,
            })
            .collect();
        Self { columns }
    }

    /// Replaces each nominal column with one 0/1 column per category, named
    /// `<attr>=<category>`, at the position of the original column.
    pub fn apply(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        let n = ds.n_rows();
        let mut specs = Vec::new();
        let mut blocks: Vec<Vec<f64>> = Vec::new();
        for (j, spec) in ds.specs().iter().enumerate() {
            let col = ds.features().column(j);
            match &spec.kind {
                FeatureKind::Numeric => {
                    specs.push(spec.clone());
                    blocks.push(col.to_vec());
                }
                FeatureKind::Nominal { categories } => {
                    let enc = self
                        .columns
                        .iter()
                        .find(|c| c.name == spec.name)
                        .ok_or_else(|| Error::UnknownFeature(spec.name.clone()))?;
                    let mut indicators = vec![vec![0.0; n]; enc.categories.len()];
                    for (i, &code) in col.iter().enumerate() {
                        let cat = &categories[code as usize];
                        let k = enc.categories.binary_search(cat).map_err(|_| {
                            Error::UnknownCategory {
                                column: spec.name.clone(),
                                category: cat.clone(),
                            }
                        })?;
                        indicators[k][i] = 1.0;
                    }
                    for (cat, values) in enc.categories.iter().zip(indicators) {
                        specs.push(FeatureSpec::numeric(format!("{}={cat}", spec.name)));
                        blocks.push(values);
                    }
                }
            }
        }
        let features = Array2::from_shape_fn((n, blocks.len()), |(i, j)| blocks[j][i]);
        ds.with_features(features, specs)
    }
}

pub fn one_hot(ds: &LabeledDataset) -> Result<(LabeledDataset, OneHotEncoder)> {
    let enc = OneHotEncoder::fit(ds);
    Ok((enc.apply(ds)?, enc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoteTarget {
    MatchMajority,
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default = "default_target")]
    pub target_minority_count: SmoteTarget,
    pub seed: u64,
}

fn default_k() -> usize {
    5
}

fn default_target() -> SmoteTarget {
    SmoteTarget::MatchMajority
}

impl SmoteConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            k_neighbors: default_k(),
            target_minority_count: default_target(),
            seed,
        }
    }
}

/// Synthetic point on the segment from `x` towards `neighbor`.
pub fn interpolate(x: &[f64], neighbor: &[f64], u: f64) -> Vec<f64> {
    x.iter().zip(neighbor).map(|(a, b)| a + u * (b - a)).collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Indices (into `points`) of the `k` nearest other points, ties by index.
pub fn nearest_neighbors(points: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    (0..points.len())
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| (squared_distance(&points[i], &points[j]), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Oversamples the minority class by interpolating between minority rows and
/// their nearest minority neighbours. Base rows are cycled in order; synthetic
/// sample `i` draws its neighbour and interpolation weight from a sub-stream of
/// the seed indexed by `i`. Synthetic rows get ids `smote:<base_id>:<i>`.
pub fn smote(ds: &LabeledDataset, config: &SmoteConfig) -> Result<LabeledDataset> {
    if config.k_neighbors < 1 {
        return Err(Error::invalid("smote: k_neighbors must be >= 1"));
    }
    if let Some(s) = ds.specs().iter().find(|s| s.is_nominal()) {
        return Err(Error::invalid(format!("smote: nominal column `{}`", s.name)));
    }
    let (neg, pos) = ds.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::SingleClass("smote needs both classes".into()));
    }
    let (minority_label, minority_n, majority_n) = if pos <= neg { (1u8, pos, neg) } else { (0u8, neg, pos) };
    if minority_n <= config.k_neighbors {
        return Err(Error::TooFewMinority {
            minority: minority_n,
            k: config.k_neighbors,
        });
    }
    let target = match config.target_minority_count {
        SmoteTarget::MatchMajority => majority_n,
        SmoteTarget::Count(t) => t,
    };
    if target < minority_n {
        return Err(Error::invalid(format!(
            "smote: target {target} below current minority count {minority_n}"
        )));
    }
    let minority_rows: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.labels()[i] == minority_label).collect();
    let points: Vec<Vec<f64>> = minority_rows.iter().map(|&i| ds.features().row(i).to_vec()).collect();
    let neighbors = nearest_neighbors(&points, config.k_neighbors);

    let n_new = target - minority_n;
    let d = ds.n_features();
    let mut rows = Array2::<f64>::zeros((n_new, d));
    let mut ids = Vec::with_capacity(n_new);
    for i in 0..n_new {
        let base = i % minority_n;
        let mut r = rng::sub_rng(config.seed, i as u64);
        let nn = neighbors[base][r.random_range(0..neighbors[base].len())];
        let u: f64 = r.random();
        let s = interpolate(&points[base], &points[nn], u);
        rows.row_mut(i).iter_mut().zip(s).for_each(|(a, b)| *a = b);
        ids.push(format!("smote:{}:{i}", ds.member_ids()[minority_rows[base]]));
    }
    ds.append_rows(rows, vec![minority_label; n_new], ids)
}

/// Pearson correlation coefficient (two-pass).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid(format!(
            "pearson: lengths {} and {} (need equal, >= 2)",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPair {
    pub feature_a: String,
    pub feature_b: String,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// Sorted by |r| descending, then by column position.
    pub pairs: Vec<CorrelationPair>,
    /// Constant columns that were skipped.
    pub skipped_constant: Vec<String>,
}

pub fn correlation_pairs(matrix: ArrayView2<f64>, names: &[&str], threshold: f64) -> Result<CorrelationReport> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("threshold {threshold} not in [0, 1]")));
    }
    if names.len() != matrix.ncols() {
        return Err(Error::invalid("correlation_pairs: name count mismatch"));
    }
    let cols: Vec<Vec<f64>> = matrix.axis_iter(Axis(1)).map(|c| c.to_vec()).collect();
    let constant: Vec<bool> = cols.iter().map(|c| c.iter().all(|&v| v == c[0])).collect();
    let mut found = Vec::new();
    for a in 0..cols.len() {
        for b in a + 1..cols.len() {
            if constant[a] || constant[b] {
                continue;
            }
            let r = pearson(&cols[a], &cols[b])?;
            if r.abs() >= threshold {
                found.push((a, b, r));
            }
        }
    }
    found.sort_by(|x, y| y.2.abs().total_cmp(&x.2.abs()).then((x.0, x.1).cmp(&(y.0, y.1))));
    Ok(CorrelationReport {
        pairs: found
            .into_iter()
            .map(|(a, b, r)| CorrelationPair {
                feature_a: names[a].to_string(),
                feature_b: names[b].to_string(),
                r,
            })
            .collect(),
        skipped_constant: names
            .iter()
            .zip(&constant)
            .filter(|(_, &c)| c)
            .map(|(n, _)| n.to_string())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn standardize_hand_values() {
        let m = array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        let p = standardize_fit(m.view()).unwrap();
        assert_eq!(p.mean, vec![2.0, 5.0]);
        assert!((p.std[0] - 0.816496580927726).abs() < 1e-12);
        assert_eq!(p.constant, vec![false, true]);
        let z = p.apply(m.view()).unwrap();
        assert!((z[[0, 0]] + 1.224744871391589).abs() < 1e-12);
        assert_eq!(z[[1, 0]], 0.0);
        assert!((z[[2, 0]] - 1.224744871391589).abs() < 1e-12);
        assert!(z.column(1).iter().all(|&v| v == 0.0));
        let back = p.inverse(z.view()).unwrap();
        assert!((&back - &m).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn standardize_empty_errors() {
        assert!(standardize_fit(Array2::<f64>::zeros((0, 2)).view()).is_err());
    }

    fn nominal_ds(codes: &[f64], cats: &[&str]) -> LabeledDataset {
        let n = codes.len();
        LabeledDataset::new(
            Array2::from_shape_vec((n, 1), codes.to_vec()).unwrap(),
            vec![0; n],
            vec![FeatureSpec::nominal("c", cats.iter().map(|s| s.to_string()).collect())],
            (0..n).map(|i| i.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn one_hot_indicator_construction() {
        let ds = nominal_ds(&[2.0, 0.0, 1.0, 2.0], &["A", "B", "C"]);
        let (enc, _) = one_hot(&ds).unwrap();
        assert_eq!(enc.feature_names(), ["c=A", "c=B", "c=C"]);
        // indicator_k(i) = [code_i == k], enumerated directly
        for i in 0..4 {
            for k in 0..3 {
                let expected = if ds.features()[[i, 0]] as usize == k { 1.0 } else { 0.0 };
                assert_eq!(enc.features()[[i, k]], expected);
            }
            assert_eq!(enc.features().row(i).sum(), 1.0);
        }
    }

    #[test]
    fn one_hot_single_category() {
        let ds = nominal_ds(&[0.0, 0.0], &["only"]);
        let (enc, _) = one_hot(&ds).unwrap();
        assert_eq!(enc.n_features(), 1);
        assert!(enc.features().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn one_hot_unknown_category() {
        let train = nominal_ds(&[0.0, 0.0], &["A", "B"]);
        let test = nominal_ds(&[1.0], &["A", "B"]);
        let enc = OneHotEncoder::fit(&train);
        assert!(matches!(enc.apply(&test), Err(Error::UnknownCategory { .. })));
    }

    #[test]
    fn interpolation_formula() {
        assert_eq!(interpolate(&[0.0, 0.0], &[1.0, 1.0], 0.5), vec![0.5, 0.5]);
        assert_eq!(interpolate(&[0.0, 0.0], &[1.0, 1.0], 0.0), vec![0.0, 0.0]);
    }

    fn blobs(minority: usize, majority: usize) -> LabeledDataset {
        let n = minority + majority;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| {
            let base = if i < minority { 5.0 } else { 0.0 };
            base + ((i * 7 + j * 13) % 11) as f64 / 3.0
        });
        let labels = (0..n).map(|i| u8::from(i < minority)).collect();
        LabeledDataset::from_numeric(x, labels, &["a", "b"]).unwrap()
    }

    #[test]
    fn smote_matches_majority() {
        let ds = blobs(100, 200);
        let out = smote(&ds, &SmoteConfig::new(1)).unwrap();
        assert_eq!(out.class_counts(), (200, 200));
        assert_eq!(out.select_rows(&(0..300).collect::<Vec<_>>()), ds);
        assert_eq!(out, smote(&ds, &SmoteConfig::new(1)).unwrap());
    }

    #[test]
    fn smote_errors() {
        let one_class = LabeledDataset::from_numeric(Array2::zeros((4, 1)), vec![0; 4], &["x"]).unwrap();
        assert!(matches!(smote(&one_class, &SmoteConfig::new(0)), Err(Error::SingleClass(_))));
        let few = blobs(5, 20);
        assert!(matches!(smote(&few, &SmoteConfig::new(0)), Err(Error::TooFewMinority { .. })));
    }

    #[test]
    fn pearson_values() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-15);
        // 3 / sqrt(2 * 42/9)
        let expected = 3.0 / (2.0_f64 * 42.0 / 9.0).sqrt();
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.9820).abs() < 5e-5);
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn correlation_pairs_threshold_zero_and_duplicates() {
        let m = array![[1.0, 1.0, 3.0, 7.0], [2.0, 2.0, 1.0, 7.0], [4.0, 4.0, 2.0, 7.0]];
        let rep = correlation_pairs(m.view(), &["a", "dup", "c", "k"], 0.0).unwrap();
        assert_eq!(rep.pairs.len(), 3);
        assert_eq!((rep.pairs[0].feature_a.as_str(), rep.pairs[0].feature_b.as_str()), ("a", "dup"));
        assert!((rep.pairs[0].r - 1.0).abs() < 1e-12);
        assert_eq!(rep.skipped_constant, vec!["k".to_string()]);
    }
}
