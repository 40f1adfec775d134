//! Classifier contract, linear discriminant and baseline classifiers, voting
//! ensembles and the two-network ANN ensemble.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{self, RIDGE_EPS};
use crate::nnet::{sigmoid, AnnPreset, TrainedNetwork};

/// Default decision threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Anything that maps a feature matrix to per-row probabilities of class 1.
pub trait Classifier {
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>>;

    fn predict(&self, x: ArrayView2<f64>, threshold: f64) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| u8::from(p > threshold))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    /// Raw score `D(x)` clipped to `[0, 1]`.
    Identity,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub link: Link,
}

impl LinearModel {
    /// `D(x) = w . x + b`
    pub fn score_row(&self, row: ArrayView1<f64>) -> f64 {
        row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>() + self.bias
    }

    pub fn scores(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.weights.len() {
            return Err(Error::invalid(format!(
                "linear model has {} weights, input has {} columns",
                self.weights.len(),
                x.ncols()
            )));
        }
        Ok(x.outer_iter().map(|r| self.score_row(r)).collect())
    }
}

impl Classifier for LinearModel {
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let s = self.scores(x)?;
        Ok(match self.link {
            Link::Identity => s.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            Link::Logistic => s.into_iter().map(sigmoid).collect(),
        })
    }
}

/// Least-squares discriminant: minimises `sum (w . x + b - y)^2` (plus a
/// `1e-8` ridge on `w`). Classifies by the sign of `D(x) - 0.5`.
pub fn fit_linear_discriminant(ds: &LabeledDataset) -> Result<LinearModel> {
    if ds.n_rows() < 2 {
        return Err(Error::invalid("linear discriminant needs at least 2 rows"));
    }
    let fit = linalg::least_squares(ds.features().view(), &ds.labels_f64(), RIDGE_EPS)?;
    Ok(LinearModel {
        weights: fit.weights,
        bias: fit.intercept,
        link: Link::Identity,
    })
}

/// Full-batch gradient descent on mean BCE, starting from zero weights.
/// Stops early once every mean gradient component is below [`LOGISTIC_TOL`].
pub fn fit_logistic(ds: &LabeledDataset, lr: f64, epochs: usize) -> Result<LinearModel> {
    fit_logistic_xy(ds.features().view(), &ds.labels_f64(), lr, epochs)
}

pub const LOGISTIC_TOL: f64 = 1e-10;

pub(crate) fn fit_logistic_xy(x: ArrayView2<f64>, y: &[f64], lr: f64, epochs: usize) -> Result<LinearModel> {
    let (n, d) = x.dim();
    if n == 0 {
        return Err(Error::invalid("logistic regression on empty data"));
    }
    if !(lr > 0.0) {
        return Err(Error::invalid("logistic regression: lr must be positive"));
    }
    let x = x.as_standard_layout();
    let flat = x.as_slice().expect("standard layout");
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut gw = vec![0.0; d];
    for epoch in 0..epochs {
        gw.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for (row, &yk) in flat.chunks_exact(d.max(1)).take(n).zip(y) {
            let row = &row[..d];
            let z = row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b;
            let r = sigmoid(z) - yk;
            gb += r;
            for (g, a) in gw.iter_mut().zip(row) {
                *g += r * a;
            }
        }
        if !gb.is_finite() || gw.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { epoch, batch: 0 });
        }
        let inv_n = 1.0 / n as f64;
        if gw.iter().chain([&gb]).all(|g| (g * inv_n).abs() < LOGISTIC_TOL) {
            break;
        }
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= lr * inv_n * g;
        }
        b -= lr * inv_n * gb;
    }
    if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
        return Err(Error::Diverged { epoch: epochs, batch: 0 });
    }
    Ok(LinearModel {
        weights: w,
        bias: b,
        link: Link::Logistic,
    })
}

/// Variance floor for Gaussian naive Bayes.
pub const NB_VAR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Indexed by class (0, 1).
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

pub fn fit_gaussian_nb(ds: &LabeledDataset) -> Result<GaussianNb> {
    let (neg, pos) = ds.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::SingleClass("naive Bayes needs both classes".into()));
    }
    let d = ds.n_features();
    let mut sums = [vec![0.0; d], vec![0.0; d]];
    let counts = [neg as f64, pos as f64];
    for (row, &l) in ds.features().outer_iter().zip(ds.labels()) {
        for (s, v) in sums[l as usize].iter_mut().zip(row.iter()) {
            *s += v;
        }
    }
    let means = [0, 1].map(|c| sums[c].iter().map(|s| s / counts[c]).collect::<Vec<_>>());
    let mut sq = [vec![0.0; d], vec![0.0; d]];
    for (row, &l) in ds.features().outer_iter().zip(ds.labels()) {
        let c = l as usize;
        for ((s, v), m) in sq[c].iter_mut().zip(row.iter()).zip(&means[c]) {
            *s += (v - m).powi(2);
        }
    }
    let variances = [0, 1].map(|c| sq[c].iter().map(|s| (s / counts[c]).max(NB_VAR_FLOOR)).collect::<Vec<_>>());
    let total = counts[0] + counts[1];
    Ok(GaussianNb {
        priors: [counts[0] / total, counts[1] / total],
        means,
        variances,
    })
}

impl GaussianNb {
    fn log_joint(&self, c: usize, row: ArrayView1<f64>) -> f64 {
        let mut lp = self.priors[c].ln();
        for ((x, m), v) in row.iter().zip(&self.means[c]).zip(&self.variances[c]) {
            lp -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v);
        }
        lp
    }
}

impl Classifier for GaussianNb {
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.means[0].len() {
            return Err(Error::invalid("naive Bayes: column count mismatch"));
        }
        Ok(x
            .outer_iter()
            .map(|r| sigmoid(self.log_joint(1, r) - self.log_joint(0, r)))
            .collect())
    }
}

/// Majority of member votes at 0.5; a tie votes churn. The reported
/// probability is the crisp vote (0 or 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardVote {
    pub members: Vec<Model>,
}

impl HardVote {
    /// Fraction of members voting class 1, per row.
    pub fn vote_share(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let mut share = vec![0.0; x.nrows()];
        for m in &self.members {
            for (s, v) in share.iter_mut().zip(m.predict(x, DEFAULT_THRESHOLD)?) {
                *s += f64::from(v);
            }
        }
        let k = self.members.len() as f64;
        Ok(share.into_iter().map(|s| s / k).collect())
    }
}

impl Classifier for HardVote {
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        Ok(self
            .vote_share(x)?
            .into_iter()
            .map(|s| if s >= 0.5 { 1.0 } else { 0.0 })
            .collect())
    }
}

/// Weighted average of member probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftVote {
    pub members: Vec<Model>,
    pub weights: Vec<f64>,
}

impl Classifier for SoftVote {
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let total: f64 = self.weights.iter().sum();
        let mut acc = vec![0.0; x.nrows()];
        for (m, &w) in self.members.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            for (a, p) in acc.iter_mut().zip(m.predict_proba(x)?) {
                *a += w * p;
            }
        }
        Ok(acc.into_iter().map(|a| (a / total).clamp(0.0, 1.0)).collect())
    }
}

pub fn hard_vote(members: Vec<Model>) -> Result<HardVote> {
    if members.is_empty() {
        return Err(Error::invalid("empty ensemble"));
    }
    Ok(HardVote { members })
}

pub fn soft_vote(members: Vec<Model>, weights: Vec<f64>) -> Result<SoftVote> {
    if members.is_empty() {
        return Err(Error::invalid("empty ensemble"));
    }
    if weights.len() != members.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} members",
            weights.len(),
            members.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().all(|w| *w == 0.0) {
        return Err(Error::invalid("soft vote weights must be >= 0 and not all zero"));
    }
    Ok(SoftVote { members, weights })
}

/// Trains both networks and averages their probabilities with equal weight.
pub fn ensemble_ann(
    ds: &LabeledDataset,
    first: (&AnnPreset, u64),
    second: (&AnnPreset, u64),
) -> Result<SoftVote> {
    let members = [first, second]
        .into_iter()
        .map(|(preset, seed)| {
            preset
                .train(ds, seed)
                .map(|n| Model::Ann(Box::new(n)))
                .map_err(|e| e.in_stage(&format!("ensemble member {}", preset.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    soft_vote(members, vec![1.0, 1.0])
}

/// Every fitted model the toolkit can produce, tagged for JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    Linear(LinearModel),
    GaussianNb(GaussianNb),
    Ann(Box<TrainedNetwork>),
    HardVote(HardVote),
    SoftVote(SoftVote),
}

impl Classifier for Model {
    fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        match self {
            Model::Linear(m) => m.predict_proba(x),
            Model::GaussianNb(m) => m.predict_proba(x),
            Model::Ann(m) => m.predict_proba(x),
            Model::HardVote(m) => m.predict_proba(x),
            Model::SoftVote(m) => m.predict_proba(x),
        }
    }
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Linear(m) if m.link == Link::Identity => "linear_discriminant",
            Model::Linear(_) => "logistic",
            Model::GaussianNb(_) => "gaussian_nb",
            Model::Ann(_) => "ann",
            Model::HardVote(_) => "hard_vote",
            Model::SoftVote(_) => "soft_vote",
        }
    }
}
