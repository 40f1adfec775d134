//! Member records over time, inclusion filters, observation-window feature
//! extraction and churn labelling.
//!
//! Time is measured in integer month indices. For a [`WindowSpec`] with anchor
//! `a`, the observation window covers months `a - observation_len + 1 ..= a`
//! and the outcome window covers `a + 1 ..= a + outcome_len`. A member is a
//! churner for that window iff their account closes inside the outcome window.

mod io;

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use io::{read_records, write_records};

/// Monthly attribute holding the account balance used by the inclusion filter.
pub const BALANCE_ATTR: &str = "balance";

/// Denominator floor for `change_ratio`.
pub const RATIO_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub member_id: String,
    pub account_open_month: i64,
    pub account_close_month: Option<i64>,
    /// month -> attribute -> value
    pub monthly_attributes: BTreeMap<i64, BTreeMap<String, f64>>,
    pub static_attributes: BTreeMap<String, String>,
}

impl MemberRecord {
    pub fn new(
        member_id: impl Into<String>,
        account_open_month: i64,
        account_close_month: Option<i64>,
    ) -> Result<Self> {
        let member_id = member_id.into();
        if let Some(close) = account_close_month {
            if close < account_open_month {
                return Err(Error::invalid(format!(
                    "member {member_id}: close month {close} before open month {account_open_month}"
                )));
            }
        }
        Ok(Self {
            member_id,
            account_open_month,
            account_close_month,
            monthly_attributes: BTreeMap::new(),
            static_attributes: BTreeMap::new(),
        })
    }

    /// Records a monthly value, rejecting months outside the account lifetime.
    pub fn set_monthly(&mut self, month: i64, attribute: &str, value: f64) -> Result<()> {
        let open_end = self.account_close_month.unwrap_or(i64::MAX);
        if month < self.account_open_month || month > open_end {
            return Err(Error::invalid(format!(
                "member {}: month {month} outside account lifetime",
                self.member_id
            )));
        }
        self.monthly_attributes
            .entry(month)
            .or_default()
            .insert(attribute.to_string(), value);
        Ok(())
    }

    pub fn set_static(&mut self, attribute: &str, value: impl Into<String>) {
        self.static_attributes.insert(attribute.to_string(), value.into());
    }

    pub fn monthly(&self, month: i64, attribute: &str) -> Option<f64> {
        self.monthly_attributes.get(&month)?.get(attribute).copied()
    }

    /// Months of account tenure at `month`.
    pub fn tenure_at(&self, month: i64) -> i64 {
        month - self.account_open_month
    }

    pub fn is_open_at(&self, month: i64) -> bool {
        month >= self.account_open_month && self.account_close_month.is_none_or(|c| c > month)
    }

    /// Most recent observed value of `attribute` at or before `month`.
    pub fn latest_at(&self, month: i64, attribute: &str) -> Option<f64> {
        self.monthly_attributes
            .range(..=month)
            .rev()
            .find_map(|(_, attrs)| attrs.get(attribute).copied())
    }

    fn window_series(&self, window: &WindowSpec, attribute: &str) -> Vec<(i64, f64)> {
        self.monthly_attributes
            .range(window.observation_start()..=window.anchor_month)
            .filter_map(|(m, attrs)| attrs.get(attribute).map(|v| (*m, *v)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub anchor_month: i64,
    #[serde(default = "default_observation_len")]
    pub observation_len: i64,
    #[serde(default = "default_outcome_len")]
    pub outcome_len: i64,
}

fn default_observation_len() -> i64 {
    12
}

fn default_outcome_len() -> i64 {
    6
}

impl WindowSpec {
    pub fn new(anchor_month: i64, observation_len: i64, outcome_len: i64) -> Result<Self> {
        let w = Self {
            anchor_month,
            observation_len,
            outcome_len,
        };
        w.validate()?;
        Ok(w)
    }

    /// 12-month observation, 6-month outcome.
    pub fn standard(anchor_month: i64) -> Self {
        Self {
            anchor_month,
            observation_len: default_observation_len(),
            outcome_len: default_outcome_len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.observation_len < 1 || self.outcome_len < 1 {
            return Err(Error::invalid(format!(
                "window lengths must be >= 1 (observation {}, outcome {})",
                self.observation_len, self.outcome_len
            )));
        }
        Ok(())
    }

    pub fn observation_start(&self) -> i64 {
        self.anchor_month - self.observation_len + 1
    }

    pub fn outcome_contains(&self, month: i64) -> bool {
        month > self.anchor_month && month <= self.anchor_month + self.outcome_len
    }

    pub fn shifted(&self, months: i64) -> Self {
        Self {
            anchor_month: self.anchor_month + months,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    /// Column values are indices into `categories` (sorted lexicographically).
    Nominal { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }

    pub fn nominal(name: impl Into<String>, categories: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Nominal { categories },
        }
    }

    pub fn is_nominal(&self) -> bool {
        matches!(self.kind, FeatureKind::Nominal { .. })
    }
}

/// Feature matrix with binary churn labels; the currency passed between stages.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<u8>,
    specs: Vec<FeatureSpec>,
    member_ids: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<u8>,
        specs: Vec<FeatureSpec>,
        member_ids: Vec<String>,
    ) -> Result<Self> {
        let (rows, cols) = features.dim();
        if rows != labels.len() || rows != member_ids.len() {
            return Err(Error::invalid(format!(
                "dataset shape: {rows} rows, {} labels, {} ids",
                labels.len(),
                member_ids.len()
            )));
        }
        if cols != specs.len() {
            return Err(Error::invalid(format!(
                "dataset shape: {cols} columns but {} feature specs",
                specs.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::invalid(format!("label {bad} is not binary")));
        }
        let mut seen = BTreeSet::new();
        for s in &specs {
            if !seen.insert(s.name.as_str()) {
                return Err(Error::invalid(format!("duplicate feature name `{}`", s.name)));
            }
        }
        Ok(Self {
            features,
            labels,
            specs,
            member_ids,
        })
    }

    /// All-numeric dataset with generated member ids (`row<i>`).
    pub fn from_numeric(
        features: Array2<f64>,
        labels: Vec<u8>,
        names: &[&str],
    ) -> Result<Self> {
        let ids = (0..features.nrows()).map(|i| format!("row{i}")).collect();
        let specs = names.iter().map(|n| FeatureSpec::numeric(*n)).collect();
        Self::new(features, labels, specs, ids)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| f64::from(l)).collect()
    }

    pub fn specs(&self) -> &[FeatureSpec] {
        &self.specs
    }

    pub fn member_ids(&self) -> &[String] {
        &self.member_ids
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.specs.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.specs
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        Ok(self.features.column(j).to_vec())
    }

    /// `(negatives, positives)`
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - pos, pos)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            specs: self.specs.clone(),
            member_ids: rows.iter().map(|&i| self.member_ids[i].clone()).collect(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(1), cols),
            labels: self.labels.clone(),
            specs: cols.iter().map(|&j| self.specs[j].clone()).collect(),
            member_ids: self.member_ids.clone(),
        }
    }

    pub fn select_named(&self, names: &[String]) -> Result<Self> {
        let cols = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&cols))
    }

    /// Same rows and labels with a replaced feature block.
    pub fn with_features(&self, features: Array2<f64>, specs: Vec<FeatureSpec>) -> Result<Self> {
        Self::new(features, self.labels.clone(), specs, self.member_ids.clone())
    }

    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        Self::new(
            self.features.clone(),
            labels,
            self.specs.clone(),
            self.member_ids.clone(),
        )
    }

    /// Appends rows (used by oversampling).
    pub fn append_rows(
        &self,
        rows: Array2<f64>,
        labels: Vec<u8>,
        member_ids: Vec<String>,
    ) -> Result<Self> {
        let features = ndarray::concatenate(Axis(0), &[self.features.view(), rows.view()])
            .map_err(|e| Error::invalid(format!("append rows: {e}")))?;
        let mut all_labels = self.labels.clone();
        all_labels.extend(labels);
        let mut ids = self.member_ids.clone();
        ids.extend(member_ids);
        Self::new(features, all_labels, self.specs.clone(), ids)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        io::write_dataset(self, writer)
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        io::read_dataset(reader)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Thresholds for the two inclusion criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InclusionFilters {
    /// Tenure at the anchor must be strictly greater than this.
    pub min_tenure_months: i64,
    /// Balance at the anchor must be at least this.
    pub min_balance: f64,
}

impl Default for InclusionFilters {
    fn default() -> Self {
        Self {
            min_tenure_months: 6,
            min_balance: 1500.0,
        }
    }
}

impl InclusionFilters {
    pub fn admits(&self, record: &MemberRecord, window: &WindowSpec) -> bool {
        let anchor = window.anchor_month;
        record.is_open_at(anchor)
            && record.tenure_at(anchor) > self.min_tenure_months
            && record
                .latest_at(anchor, BALANCE_ATTR)
                .is_some_and(|b| b >= self.min_balance)
    }
}

/// Keeps members that are open at the anchor, have tenure strictly above
/// `min_tenure_months` and a balance of at least `min_balance` at the anchor.
/// The balance at the anchor is the latest observed `balance` at or before it.
pub fn apply_inclusion_filters(
    records: &[MemberRecord],
    window: &WindowSpec,
    min_tenure_months: i64,
    min_balance: f64,
) -> Vec<MemberRecord> {
    let filters = InclusionFilters {
        min_tenure_months,
        min_balance,
    };
    records
        .iter()
        .filter(|r| filters.admits(r, window))
        .cloned()
        .collect()
}

pub fn label_outcome(record: &MemberRecord, window: &WindowSpec) -> Result<u8> {
    match record.account_close_month {
        Some(close) if close <= window.anchor_month => Err(Error::ClosedBeforeOutcome {
            member: record.member_id.clone(),
            close,
            anchor: window.anchor_month,
        }),
        Some(close) => Ok(u8::from(window.outcome_contains(close))),
        None => Ok(0),
    }
}

pub fn label_outcomes(records: &[MemberRecord], window: &WindowSpec) -> Result<Vec<u8>> {
    records.iter().map(|r| label_outcome(r, window)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Last,
    Mean,
    Sum,
    ChangeAmount,
    ChangeRatio,
    Recency,
}

impl Aggregation {
    pub fn suffix(self) -> &'static str {
        match self {
            Aggregation::Last => "last",
            Aggregation::Mean => "mean",
            Aggregation::Sum => "sum",
            Aggregation::ChangeAmount => "change_amount",
            Aggregation::ChangeRatio => "change_ratio",
            Aggregation::Recency => "recency",
        }
    }

    /// Aggregates an ordered, non-empty `(month, value)` series.
    pub fn apply(self, series: &[(i64, f64)], window: &WindowSpec) -> f64 {
        let first = series.first().map_or(0.0, |p| p.1);
        let last = series.last().map_or(0.0, |p| p.1);
        match self {
            Aggregation::Last => last,
            Aggregation::Sum => series.iter().map(|p| p.1).sum(),
            Aggregation::Mean => series.iter().map(|p| p.1).sum::<f64>() / series.len() as f64,
            Aggregation::ChangeAmount => last - first,
            Aggregation::ChangeRatio => (last - first) / first.abs().max(RATIO_EPS),
            Aggregation::Recency => series
                .iter()
                .rev()
                .find(|p| p.1 != 0.0)
                .map_or(window.observation_len, |p| window.anchor_month - p.0)
                as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRecipe {
    pub attribute: String,
    pub aggregations: Vec<Aggregation>,
}

/// Which aggregations to derive from each monthly attribute, and which static
/// attributes to carry through as nominal features.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub monthly: Vec<AttributeRecipe>,
    #[serde(default)]
    pub nominal: Vec<String>,
}

impl Recipe {
    pub fn add(mut self, attribute: &str, aggregations: &[Aggregation]) -> Self {
        self.monthly.push(AttributeRecipe {
            attribute: attribute.to_string(),
            aggregations: aggregations.to_vec(),
        });
        self
    }

    pub fn nominal(mut self, attribute: &str) -> Self {
        self.nominal.push(attribute.to_string());
        self
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .monthly
            .iter()
            .flat_map(|a| {
                a.aggregations
                    .iter()
                    .map(move |g| format!("{}_{}", a.attribute, g.suffix()))
            })
            .collect();
        names.extend(self.nominal.iter().cloned());
        names
    }
}

/// Category written for a missing static attribute.
pub const MISSING_CATEGORY: &str = "NA";

/// One row per record: aggregated observation-window features plus nominal
/// static attributes, labelled for `window`.
pub fn build_snapshot(
    records: &[MemberRecord],
    window: &WindowSpec,
    recipe: &Recipe,
) -> Result<LabeledDataset> {
    window.validate()?;
    let labels = label_outcomes(records, window)?;
    let names = recipe.feature_names();
    let n_numeric = names.len() - recipe.nominal.len();

    let categories: Vec<Vec<String>> = recipe
        .nominal
        .iter()
        .map(|attr| {
            records
                .iter()
                .map(|r| static_value(r, attr))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .map(str::to_string)
                .collect()
        })
        .collect();

    let mut features = Array2::<f64>::zeros((records.len(), names.len()));
    for (i, record) in records.iter().enumerate() {
        let mut j = 0;
        for attr in &recipe.monthly {
            let series = record.window_series(window, &attr.attribute);
            if series.is_empty() {
                return Err(Error::EmptyWindow {
                    member: record.member_id.clone(),
                    attribute: attr.attribute.clone(),
                });
            }
            for agg in &attr.aggregations {
                features[[i, j]] = agg.apply(&series, window);
                j += 1;
            }
        }
        for (k, attr) in recipe.nominal.iter().enumerate() {
            let value = static_value(record, attr);
            let code = categories[k]
                .binary_search_by(|c| c.as_str().cmp(value))
                .expect("category collected above");
            features[[i, n_numeric + k]] = code as f64;
        }
    }

    let mut specs: Vec<FeatureSpec> = names[..n_numeric]
        .iter()
        .map(|n| FeatureSpec::numeric(n.clone()))
        .collect();
    specs.extend(
        recipe
            .nominal
            .iter()
            .zip(categories)
            .map(|(n, c)| FeatureSpec::nominal(n.clone(), c)),
    );
    let ids = records.iter().map(|r| r.member_id.clone()).collect();
    LabeledDataset::new(features, labels, specs, ids)
}

fn static_value<'a>(record: &'a MemberRecord, attr: &str) -> &'a str {
    record
        .static_attributes
        .get(attr)
        .map_or(MISSING_CATEGORY, String::as_str)
}

/// Filters, labels and snapshots `count` windows spaced `step_months` apart.
pub fn slide_windows(
    records: &[MemberRecord],
    base_window: &WindowSpec,
    step_months: i64,
    count: usize,
    filters: &InclusionFilters,
    recipe: &Recipe,
) -> Result<Vec<LabeledDataset>> {
    if step_months < 1 || count < 1 {
        return Err(Error::invalid(format!(
            "slide_windows: step {step_months} and count {count} must be >= 1"
        )));
    }
    (0..count)
        .map(|i| {
            let window = base_window.shifted(i as i64 * step_months);
            let kept: Vec<MemberRecord> = records
                .iter()
                .filter(|r| filters.admits(r, &window))
                .cloned()
                .collect();
            build_snapshot(&kept, &window, recipe).map_err(|e| Error::Window {
                index: i,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Seeded shuffle then split with `floor(train_fraction * n)` training rows.
pub fn train_test_split(
    dataset: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let n = dataset.n_rows();
    if n < 2 {
        return Err(Error::invalid(format!("cannot split {n} rows")));
    }
    let n_train = (train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::invalid(format!(
            "split of {n} rows at {train_fraction} leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng(seed));
    let (train, test) = order.split_at(n_train);
    Ok((dataset.select_rows(train), dataset.select_rows(test)))
}
