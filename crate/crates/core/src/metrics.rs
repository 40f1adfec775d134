//! Confusion-matrix metrics, pairwise AUC and ROC export.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// True-positive rate; 0 when there are no positives.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// True when the MCC denominator vanishes (an empty row or column).
    pub fn mcc_degenerate(&self) -> bool {
        self.tp + self.fp == 0 || self.tp + self.fn_ == 0 || self.tn + self.fp == 0 || self.tn + self.fn_ == 0
    }

    fn chance_agreement(&self) -> f64 {
        let n = self.total() as f64;
        let pred_pos = (self.tp + self.fp) as f64 / n;
        let true_pos = (self.tp + self.fn_) as f64 / n;
        pred_pos * true_pos + (1.0 - pred_pos) * (1.0 - true_pos)
    }

    /// True when chance agreement is 1 and kappa is undefined.
    pub fn kappa_degenerate(&self) -> bool {
        self.chance_agreement() >= 1.0
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Predicted positive iff `proba > threshold`.
pub fn confusion(labels: &[u8], probas: &[f64], threshold: f64) -> Result<ConfusionMatrix> {
    if labels.is_empty() {
        return Err(Error::invalid("confusion: empty input"));
    }
    check_lengths(labels, probas)?;
    let mut cm = ConfusionMatrix::default();
    for (&y, &p) in labels.iter().zip(probas) {
        match (y == 1, p > threshold) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (true, false) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    cm.accuracy()
}

fn check_lengths(labels: &[u8], scores: &[f64]) -> Result<()> {
    if labels.len() != scores.len() {
        return Err(Error::invalid(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    Ok(())
}

/// `(1/mn) * sum_i sum_j [p_i > p_j] + 0.5 [p_i == p_j]` over churners `i` and
/// non-churners `j`. Pairs are counted exactly by binary search over sorted
/// negative scores.
pub fn auc(probas: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(labels, probas)?;
    let mut neg: Vec<f64> = Vec::new();
    let mut pos: Vec<f64> = Vec::new();
    for (&p, &y) in probas.iter().zip(labels) {
        if y == 1 {
            pos.push(p);
        } else {
            neg.push(p);
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::AucUndefined);
    }
    neg.sort_by(f64::total_cmp);
    let (mut greater, mut ties) = (0u64, 0u64);
    for p in &pos {
        let below = neg.partition_point(|n| n < p);
        let at_or_below = neg.partition_point(|n| n <= p);
        greater += below as u64;
        ties += (at_or_below - below) as u64;
    }
    let pairs = pos.len() as f64 * neg.len() as f64;
    Ok((greater as f64 + 0.5 * ties as f64) / pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are predicted positive; the first point uses +inf.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve with one point per distinct score, thresholds descending,
/// starting at (0,0) and ending at (1,1).
pub fn roc_points(probas: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    check_lengths(labels, probas)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::AucUndefined);
    }
    let mut order: Vec<usize> = (0..probas.len()).collect();
    order.sort_by(|&a, &b| probas[b].total_cmp(&probas[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = probas[order[i]];
        while i < order.len() && probas[order[i]] == t {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a curve given in increasing-fpr order.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

pub fn write_roc_csv<W: std::io::Write>(points: &[RocPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["threshold", "fpr", "tpr"])?;
    for p in points {
        w.write_record([format!("{}", p.threshold), format!("{}", p.fpr), format!("{}", p.tpr)])?;
    }
    w.flush()?;
    Ok(())
}

/// Cohen's kappa; 0 when chance agreement is total (see `kappa_degenerate`).
pub fn cohen_kappa(cm: &ConfusionMatrix) -> f64 {
    let n = cm.total() as f64;
    let p_o = (cm.tp + cm.tn) as f64 / n;
    let p_e = cm.chance_agreement();
    if cm.kappa_degenerate() {
        return 0.0;
    }
    (p_o - p_e) / (1.0 - p_e)
}

/// Matthews correlation coefficient; 0 for a vanishing denominator.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    if cm.mcc_degenerate() {
        return 0.0;
    }
    let (tp, fp, tn, fn_) = (cm.tp as f64, cm.fp as f64, cm.tn as f64, cm.fn_ as f64);
    let num = tp * tn - fp * fn_;
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    (num / den).clamp(-1.0, 1.0)
}

/// The four reported metrics, keyed as in the comparison report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub test_acc: f64,
    pub auc: f64,
    pub cohen_kappa: f64,
    pub mcc: f64,
}

impl MetricBundle {
    pub fn compute(labels: &[u8], probas: &[f64], threshold: f64) -> Result<Self> {
        let cm = confusion(labels, probas, threshold)?;
        Ok(Self {
            test_acc: cm.accuracy(),
            auc: auc(probas, labels)?,
            cohen_kappa: cohen_kappa(&cm),
            mcc: mcc(&cm),
        })
    }
}
