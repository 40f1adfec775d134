//! Causal effect analysis: DAG assumptions, backdoor identification,
//! effect estimation and refutation.

mod estimate;
mod graph;

pub use estimate::{
    binarize_treatment, data_subset_refuter, fit_propensity, ipw_ate, regression_ate, BinarizeRule, Binarized,
    PropensityConfig, RefuterConfig, RefuterResult, RegressionAte, TrialEstimate,
};
pub use graph::{backdoor_sets, backdoor_sets_within, parse_graph, validate_dag, CausalGraph, CausalQuery, MAX_CANDIDATES};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ipw,
    Regression,
}

/// One treatment to analyse: `column` is both the graph node and the
/// dataset column that is binarised into the treatment indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSpec {
    pub name: String,
    pub column: String,
    pub rule: BinarizeRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Outcome node; when no column carries this name the labels are used.
    pub outcome: String,
    pub method: Method,
    #[serde(default)]
    pub stabilized: bool,
    #[serde(default)]
    pub propensity: PropensityConfig,
    pub refuter: RefuterConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Identified,
    NotIdentified,
}

/// Full audit record for one treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalEstimate {
    pub treatment: String,
    pub column: String,
    pub method: Method,
    pub status: Status,
    pub rule: BinarizeRule,
    pub cutpoint: f64,
    pub n_treated: usize,
    pub n_rows: usize,
    pub adjustment_set: Vec<String>,
    pub adjustment_columns: Vec<String>,
    pub propensity_clip: f64,
    pub stabilized: bool,
    pub ate: Option<f64>,
    pub ill_conditioned: bool,
    pub refuter_ate: Option<f64>,
    pub refuter: Option<RefuterResult>,
    pub interpretation: Option<String>,
}

/// One row of the effect table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub causal_variable: String,
    pub estimate_effect: Option<f64>,
    pub data_subset_refuter: Option<f64>,
    pub probability_of_churn: String,
}

impl CausalEstimate {
    pub fn report_row(&self) -> ReportRow {
        ReportRow {
            causal_variable: self.treatment.clone(),
            estimate_effect: self.ate,
            data_subset_refuter: self.refuter_ate,
            probability_of_churn: self
                .interpretation
                .clone()
                .unwrap_or_else(|| "not identified".to_string()),
        }
    }
}

/// Positive effects read as "increased", negative as "decreased".
pub fn interpret_effect(ate: f64) -> String {
    let pct = (ate.abs() * 100.0).round();
    if pct == 0.0 {
        "unchanged (~0%)".to_string()
    } else if ate > 0.0 {
        format!("increased by ~{pct}%")
    } else {
        format!("decreased by ~{pct}%")
    }
}

/// Columns standing for a graph node: the column of that name, or the
/// one-hot block `<node>=*` minus its first category.
pub fn node_columns(ds: &LabeledDataset, node: &str) -> Vec<usize> {
    if let Ok(i) = ds.column_index(node) {
        return vec![i];
    }
    let prefix = format!("{node}=");
    ds.feature_names()
        .iter()
        .enumerate()
        .filter(|(_, n)| n.starts_with(&prefix))
        .map(|(i, _)| i)
        .skip(1)
        .collect()
}

fn is_observed(ds: &LabeledDataset, node: &str) -> bool {
    ds.column_index(node).is_ok() || {
        let prefix = format!("{node}=");
        ds.feature_names().iter().any(|n| n.starts_with(&prefix))
    }
}

fn outcome_values(ds: &LabeledDataset, outcome: &str) -> Vec<f64> {
    ds.column(outcome).unwrap_or_else(|_| ds.labels_f64())
}

/// Estimator over a work table laid out as `[T, adjusters.., Y]`.
fn estimate_work(work: &LabeledDataset, config: &AnalysisConfig) -> Result<(f64, bool)> {
    let x = work.features();
    let k = x.ncols();
    let t: Vec<u8> = x.column(0).iter().map(|&v| u8::from(v > 0.5)).collect();
    let y = x.column(k - 1).to_vec();
    let adj = x.slice(ndarray::s![.., 1..k - 1]);
    match config.method {
        Method::Ipw => {
            let e = fit_propensity(adj, &t, &config.propensity)?;
            Ok((ipw_ate(&t, &y, &e, config.stabilized)?, false))
        }
        Method::Regression => {
            let r = regression_ate(adj, &t, &y)?;
            Ok((r.ate, r.ill_conditioned))
        }
    }
}

/// Binarise, identify, estimate and refute each treatment in turn.
pub fn run_causal_analysis(
    ds: &LabeledDataset,
    graph: &CausalGraph,
    treatments: &[TreatmentSpec],
    config: &AnalysisConfig,
) -> Result<Vec<CausalEstimate>> {
    graph.validate_dag()?;
    let y = outcome_values(ds, &config.outcome);
    let mut out = Vec::with_capacity(treatments.len());
    for spec in treatments {
        let query = CausalQuery::new(graph, &spec.column, &config.outcome)?;
        let bin = binarize_treatment(&ds.column(&spec.column)?, spec.rule)?;
        let n_treated = bin.treatment.iter().filter(|&&t| t == 1).count();
        let sets = backdoor_sets_within(&query, |n| is_observed(ds, n))?;
        let mut est = CausalEstimate {
            treatment: spec.name.clone(),
            column: spec.column.clone(),
            method: config.method,
            status: Status::NotIdentified,
            rule: spec.rule,
            cutpoint: bin.cutpoint,
            n_treated,
            n_rows: ds.n_rows(),
            adjustment_set: Vec::new(),
            adjustment_columns: Vec::new(),
            propensity_clip: config.propensity.clip,
            stabilized: config.stabilized,
            ate: None,
            ill_conditioned: false,
            refuter_ate: None,
            refuter: None,
            interpretation: None,
        };
        let Some(set) = sets.into_iter().next() else {
            log::warn!("{}: no observed backdoor adjustment set", spec.name);
            out.push(est);
            continue;
        };
        let cols: Vec<usize> = set.iter().flat_map(|n| node_columns(ds, n)).collect();
        let names = ds.feature_names();
        est.adjustment_columns = cols.iter().map(|&c| names[c].to_string()).collect();
        est.adjustment_set = set;

        let n = ds.n_rows();
        let mut work = Array2::zeros((n, cols.len() + 2));
        for i in 0..n {
            work[[i, 0]] = f64::from(bin.treatment[i]);
            work[[i, cols.len() + 1]] = y[i];
        }
        for (j, &c) in cols.iter().enumerate() {
            work.column_mut(j + 1).assign(&ds.features().column(c));
        }
        let mut work_names = vec!["__treatment".to_string()];
        work_names.extend(est.adjustment_columns.iter().map(|c| format!("__adj_{c}")));
        work_names.push("__outcome".into());
        let refs: Vec<&str> = work_names.iter().map(String::as_str).collect();
        let work = LabeledDataset::new(
            work,
            ds.labels().to_vec(),
            refs.iter().map(|n| crate::dataset::FeatureSpec::numeric(*n)).collect(),
            ds.member_ids().to_vec(),
        )?;

        let (ate, ill) = estimate_work(&work, config)?;
        let estimator = |sub: &LabeledDataset| estimate_work(sub, config).map(|(a, _)| a);
        let refuted = data_subset_refuter(&estimator, &work, ate, &config.refuter)?;
        est.status = Status::Identified;
        est.ate = Some(ate);
        est.ill_conditioned = ill;
        est.refuter_ate = Some(refuted.mean);
        est.refuter = Some(refuted);
        est.interpretation = Some(interpret_effect(ate));
        out.push(est);
    }
    Ok(out)
}
