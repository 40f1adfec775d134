//! Treatment binarisation, propensity scores and the IPW / regression
//! effect estimators, plus the data-subset refuter.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{self, RIDGE_EPS};
use crate::models::fit_logistic_xy;
use crate::preprocess::standardize_fit;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinarizeRule {
    /// Above the sample median.
    Median,
    /// Above a fixed value.
    Threshold(f64),
    /// Above the `(1 - q)` quantile (linear interpolation).
    TopFraction(f64),
    /// Strictly below a fixed value (for "low_*" treatments).
    Below(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binarized {
    pub treatment: Vec<u8>,
    pub cutpoint: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Values above the cutpoint become 1; ties go to 0.
pub fn binarize_treatment(values: &[f64], rule: BinarizeRule) -> Result<Binarized> {
    if values.is_empty() {
        return Err(Error::invalid("binarize: empty vector"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let above = |cut: f64| values.iter().map(|&v| u8::from(v > cut)).collect();
    Ok(match rule {
        BinarizeRule::Median => {
            if sorted[0] == sorted[sorted.len() - 1] {
                return Err(Error::DegenerateTreatment("constant values under median rule".into()));
            }
            let cut = quantile(&sorted, 0.5);
            Binarized {
                treatment: above(cut),
                cutpoint: cut,
            }
        }
        BinarizeRule::Threshold(v) => Binarized {
            treatment: above(v),
            cutpoint: v,
        },
        BinarizeRule::TopFraction(q) => {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::invalid(format!("top fraction {q} not in (0, 1)")));
            }
            let cut = quantile(&sorted, 1.0 - q);
            Binarized {
                treatment: above(cut),
                cutpoint: cut,
            }
        }
        BinarizeRule::Below(v) => Binarized {
            treatment: values.iter().map(|&x| u8::from(x < v)).collect(),
            cutpoint: v,
        },
    })
}

fn check_both_groups(treatment: &[u8]) -> Result<usize> {
    let treated = treatment.iter().filter(|&&t| t == 1).count();
    if treated == 0 || treated == treatment.len() {
        return Err(Error::DegenerateTreatment(format!(
            "{treated} of {} rows treated",
            treatment.len()
        )));
    }
    Ok(treated)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropensityConfig {
    /// Scores are clipped to `[clip, 1 - clip]`.
    pub clip: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for PropensityConfig {
    fn default() -> Self {
        Self {
            clip: 0.01,
            learning_rate: 1.0,
            epochs: 1000,
        }
    }
}

/// Logistic regression of the treatment on the (internally standardised)
/// adjustment columns. With no adjusters every score is the treated fraction.
pub fn fit_propensity(adjusters: ArrayView2<f64>, treatment: &[u8], config: &PropensityConfig) -> Result<Vec<f64>> {
    let treated = check_both_groups(treatment)?;
    let n = treatment.len();
    if adjusters.nrows() != n {
        return Err(Error::invalid("propensity: row count mismatch"));
    }
    let clip = |p: f64| p.clamp(config.clip, 1.0 - config.clip);
    if adjusters.ncols() == 0 {
        return Ok(vec![clip(treated as f64 / n as f64); n]);
    }
    let scaler = standardize_fit(adjusters)?;
    let z = scaler.apply(adjusters)?;
    let y: Vec<f64> = treatment.iter().map(|&t| f64::from(t)).collect();
    let model = fit_logistic_xy(z.view(), &y, config.learning_rate, config.epochs)?;
    Ok(z
        .outer_iter()
        .map(|r| clip(crate::nnet::sigmoid(model.score_row(r))))
        .collect())
}

/// Horvitz-Thompson IPW: `mean(T Y / e) - mean((1-T) Y / (1-e))`. With
/// `stabilized` the two terms are normalised by their weight sums (Hajek).
pub fn ipw_ate(treatment: &[u8], outcome: &[f64], propensity: &[f64], stabilized: bool) -> Result<f64> {
    let n = treatment.len();
    if outcome.len() != n || propensity.len() != n {
        return Err(Error::invalid("ipw: length mismatch"));
    }
    check_both_groups(treatment)?;
    if propensity.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::invalid("ipw: propensities must lie in (0, 1)"));
    }
    let (mut s1, mut s0, mut w1, mut w0) = (0.0, 0.0, 0.0, 0.0);
    for ((&t, &y), &e) in treatment.iter().zip(outcome).zip(propensity) {
        if t == 1 {
            s1 += y / e;
            w1 += 1.0 / e;
        } else {
            s0 += y / (1.0 - e);
            w0 += 1.0 / (1.0 - e);
        }
    }
    Ok(if stabilized {
        s1 / w1 - s0 / w0
    } else {
        (s1 - s0) / n as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionAte {
    pub ate: f64,
    /// The design was collinear; the ridge term decided the split.
    pub ill_conditioned: bool,
}

/// Coefficient of the treatment in the least-squares fit of the outcome on
/// `[treatment, adjusters, 1]`.
pub fn regression_ate(adjusters: ArrayView2<f64>, treatment: &[u8], outcome: &[f64]) -> Result<RegressionAte> {
    check_both_groups(treatment)?;
    let n = treatment.len();
    if adjusters.nrows() != n || outcome.len() != n {
        return Err(Error::invalid("regression: row count mismatch"));
    }
    let t = Array2::from_shape_fn((n, 1), |(i, _)| f64::from(treatment[i]));
    let design = ndarray::concatenate(Axis(1), &[t.view(), adjusters])
        .map_err(|e| Error::invalid(format!("regression design: {e}")))?;
    let fit = linalg::least_squares(design.view(), outcome, RIDGE_EPS)?;
    Ok(RegressionAte {
        ate: fit.weights[0],
        ill_conditioned: fit.ill_conditioned,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefuterConfig {
    /// Fraction of rows per trial, in (0, 1]; 1 reuses every row.
    pub fraction: f64,
    pub n_trials: usize,
    pub seed: u64,
    pub stability_tol: f64,
}

impl RefuterConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            fraction: 0.8,
            n_trials: 10,
            seed,
            stability_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEstimate {
    pub trial: usize,
    pub ate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefuterResult {
    /// Mean over completed trials, in trial order.
    pub mean: f64,
    pub trials: Vec<TrialEstimate>,
    /// Trials whose subset left a single treatment group.
    pub skipped: Vec<usize>,
    /// `|mean - full estimate| <= stability_tol`.
    pub stable: bool,
}

/// Reruns `estimator` on `n_trials` seeded subsets of `floor(fraction * n)`
/// rows drawn without replacement (original row order kept).
pub fn data_subset_refuter(
    estimator: &dyn Fn(&LabeledDataset) -> Result<f64>,
    ds: &LabeledDataset,
    full_estimate: f64,
    config: &RefuterConfig,
) -> Result<RefuterResult> {
    if !(config.fraction > 0.0 && config.fraction <= 1.0) {
        return Err(Error::invalid(format!("refuter fraction {} not in (0, 1]", config.fraction)));
    }
    if config.n_trials < 1 {
        return Err(Error::invalid("refuter needs n_trials >= 1"));
    }
    let n = ds.n_rows();
    let size = (config.fraction * n as f64).floor() as usize;
    let mut trials = Vec::new();
    let mut skipped = Vec::new();
    for trial in 0..config.n_trials {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng::sub_rng(config.seed, trial as u64));
        idx.truncate(size);
        idx.sort_unstable();
        match estimator(&ds.select_rows(&idx)) {
            Ok(ate) => trials.push(TrialEstimate { trial, ate }),
            Err(Error::DegenerateTreatment(msg)) => {
                log::warn!("refuter trial {trial} skipped: {msg}");
                skipped.push(trial);
            }
            Err(e) => return Err(e),
        }
    }
    if trials.is_empty() {
        return Err(Error::DegenerateTreatment("every refuter trial was degenerate".into()));
    }
    let mean = trials.iter().map(|t| t.ate).sum::<f64>() / trials.len() as f64;
    Ok(RefuterResult {
        mean,
        stable: (mean - full_estimate).abs() <= config.stability_tol,
        trials,
        skipped,
    })
}
