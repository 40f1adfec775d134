//! Synthetic data with known ground truth: small structural causal models
//! with exact treatment effects, and a member corpus with planted churn
//! drivers.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureSpec, InclusionFilters, LabeledDataset, MemberRecord, WindowSpec, BALANCE_ATTR};
use crate::error::{Error, Result};
use crate::nnet::sigmoid;
use crate::rng;

pub const TREATMENT: &str = "T";
pub const OUTCOME: &str = "Y";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Bernoulli { p: f64 },
    Gaussian { mean: f64, std: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confounder {
    pub name: String,
    pub distribution: Distribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeLink {
    /// Continuous `Y = eta + N(0, noise_std^2)`.
    Linear { noise_std: f64 },
    /// Binary `Y ~ Bernoulli(eta)`; eta must stay in [0, 1].
    Probability,
    /// Binary `Y ~ Bernoulli(sigmoid(eta))`.
    Logistic,
}

/// `Z ~ distribution`, `T ~ Bernoulli(sigmoid(a + sum a_z z))`,
/// `Y` from `eta = b + b_T T + sum b_z z` through `link`.
/// Outcome coefficients may name [`TREATMENT`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmConfig {
    pub confounders: Vec<Confounder>,
    pub treatment_intercept: f64,
    pub treatment_coefficients: BTreeMap<String, f64>,
    pub outcome_intercept: f64,
    pub outcome_coefficients: BTreeMap<String, f64>,
    pub link: OutcomeLink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AteMethod {
    Enumeration,
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueAte {
    pub value: f64,
    pub method: AteMethod,
    /// Standard error; zero for exact methods.
    pub std_error: f64,
}

const MC_SAMPLES: usize = 10_000_000;
const MAX_ENUMERATED: usize = 20;

impl ScmConfig {
    /// `Z ~ Bern(0.5)`, `P(T=1|Z) = 0.8 / 0.2`, `P(Y=1|T,Z) = 0.2 + 0.4 T + 0.3 Z`.
    /// True effect 0.40; the naive contrast is 0.58.
    pub fn canonical_discrete() -> Self {
        let ln4 = 4f64.ln();
        Self {
            confounders: vec![Confounder {
                name: "Z".into(),
                distribution: Distribution::Bernoulli { p: 0.5 },
            }],
            treatment_intercept: -ln4,
            treatment_coefficients: BTreeMap::from([("Z".into(), 2.0 * ln4)]),
            outcome_intercept: 0.2,
            outcome_coefficients: BTreeMap::from([(TREATMENT.into(), 0.4), ("Z".into(), 0.3)]),
            link: OutcomeLink::Probability,
        }
    }

    /// The canonical fixture with the treatment term removed.
    pub fn null_discrete() -> Self {
        let mut cfg = Self::canonical_discrete();
        cfg.outcome_coefficients.remove(TREATMENT);
        cfg
    }

    /// Two Gaussian confounders driving both `T` and a continuous `Y` with
    /// direct effect `beta`.
    pub fn linear_gaussian(beta: f64) -> Self {
        let z = |name: &str| Confounder {
            name: name.into(),
            distribution: Distribution::Gaussian { mean: 0.0, std: 1.0 },
        };
        Self {
            confounders: vec![z("Z1"), z("Z2")],
            treatment_intercept: 0.0,
            treatment_coefficients: BTreeMap::from([("Z1".into(), 1.0), ("Z2".into(), -0.5)]),
            outcome_intercept: 1.0,
            outcome_coefficients: BTreeMap::from([(TREATMENT.into(), beta), ("Z1".into(), 1.5), ("Z2".into(), 0.75)]),
            link: OutcomeLink::Linear { noise_std: 0.5 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let names: BTreeSet<&str> = self.confounders.iter().map(|c| c.name.as_str()).collect();
        if names.len() != self.confounders.len() {
            return Err(Error::invalid("duplicate confounder name"));
        }
        if names.contains(TREATMENT) || names.contains(OUTCOME) {
            return Err(Error::invalid("confounder name clashes with T or Y"));
        }
        for c in &self.confounders {
            match c.distribution {
                Distribution::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                    return Err(Error::invalid(format!("{}: p = {p}", c.name)))
                }
                Distribution::Gaussian { std, .. } if !(std >= 0.0) => {
                    return Err(Error::invalid(format!("{}: std = {std}", c.name)))
                }
                _ => {}
            }
        }
        for k in self.treatment_coefficients.keys() {
            if !names.contains(k.as_str()) {
                return Err(Error::invalid(format!("treatment coefficient `{k}` names no confounder")));
            }
        }
        for k in self.outcome_coefficients.keys() {
            if k != TREATMENT && !names.contains(k.as_str()) {
                return Err(Error::invalid(format!("outcome coefficient `{k}` names no confounder")));
            }
        }
        Ok(())
    }

    pub fn binary_outcome(&self) -> bool {
        !matches!(self.link, OutcomeLink::Linear { .. })
    }

    fn all_discrete(&self) -> bool {
        self.confounders
            .iter()
            .all(|c| matches!(c.distribution, Distribution::Bernoulli { .. }))
    }

    pub fn propensity(&self, z: &[f64]) -> f64 {
        let eta = self.treatment_intercept
            + self
                .confounders
                .iter()
                .zip(z)
                .map(|(c, v)| self.treatment_coefficients.get(&c.name).copied().unwrap_or(0.0) * v)
                .sum::<f64>();
        sigmoid(eta)
    }

    fn outcome_eta(&self, t: f64, z: &[f64]) -> f64 {
        self.outcome_intercept
            + self.outcome_coefficients.get(TREATMENT).copied().unwrap_or(0.0) * t
            + self
                .confounders
                .iter()
                .zip(z)
                .map(|(c, v)| self.outcome_coefficients.get(&c.name).copied().unwrap_or(0.0) * v)
                .sum::<f64>()
    }

    /// `E[Y | do(T = t), Z = z]`.
    pub fn expected_outcome(&self, t: f64, z: &[f64]) -> Result<f64> {
        let eta = self.outcome_eta(t, z);
        match self.link {
            OutcomeLink::Linear { .. } => Ok(eta),
            OutcomeLink::Logistic => Ok(sigmoid(eta)),
            OutcomeLink::Probability if (0.0..=1.0).contains(&eta) => Ok(eta),
            OutcomeLink::Probability => Err(Error::invalid(format!("outcome probability {eta} outside [0, 1]"))),
        }
    }
}

/// Ancestral sample of `n` rows with columns `confounders.., T, Y`. Labels
/// carry `Y` for binary outcomes and `T` otherwise.
pub fn generate_scm(config: &ScmConfig, n: usize, seed: u64) -> Result<LabeledDataset> {
    config.validate()?;
    let k = config.confounders.len();
    let mut rng = rng::rng(seed);
    let mut x = Array2::zeros((n, k + 2));
    let mut labels = Vec::with_capacity(n);
    let mut z = vec![0.0; k];
    for i in 0..n {
        for (j, c) in config.confounders.iter().enumerate() {
            z[j] = match c.distribution {
                Distribution::Bernoulli { p } => f64::from(u8::from(rng.random::<f64>() < p)),
                Distribution::Gaussian { mean, std } => {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    mean + std * e
                }
            };
            x[[i, j]] = z[j];
        }
        let t = f64::from(u8::from(rng.random::<f64>() < config.propensity(&z)));
        let mean = config.expected_outcome(t, &z)?;
        let y = match config.link {
            OutcomeLink::Linear { noise_std } => {
                let e: f64 = StandardNormal.sample(&mut rng);
                mean + noise_std * e
            }
            _ => f64::from(u8::from(rng.random::<f64>() < mean)),
        };
        x[[i, k]] = t;
        x[[i, k + 1]] = y;
        labels.push(if config.binary_outcome() { y as u8 } else { t as u8 });
    }
    let mut specs: Vec<FeatureSpec> = config.confounders.iter().map(|c| FeatureSpec::numeric(&c.name)).collect();
    specs.push(FeatureSpec::numeric(TREATMENT));
    specs.push(FeatureSpec::numeric(OUTCOME));
    let ids = (0..n).map(|i| format!("unit{i}")).collect();
    LabeledDataset::new(x, labels, specs, ids)
}

/// `E[Y | do(T=1)] - E[Y | do(T=0)]`: exact by enumeration over binary
/// confounders, closed form for the linear link, Monte Carlo otherwise.
pub fn true_ate(config: &ScmConfig) -> Result<TrueAte> {
    config.validate()?;
    let beta = config.outcome_coefficients.get(TREATMENT).copied().unwrap_or(0.0);
    if let OutcomeLink::Linear { .. } = config.link {
        return Ok(TrueAte {
            value: beta,
            method: AteMethod::ClosedForm,
            std_error: 0.0,
        });
    }
    let k = config.confounders.len();
    if config.all_discrete() && k <= MAX_ENUMERATED {
        let mut total = 0.0;
        let mut z = vec![0.0; k];
        for mask in 0u64..(1 << k) {
            let mut p = 1.0;
            for (j, c) in config.confounders.iter().enumerate() {
                let on = mask >> j & 1 == 1;
                let Distribution::Bernoulli { p: pj } = c.distribution else { unreachable!() };
                z[j] = f64::from(u8::from(on));
                p *= if on { pj } else { 1.0 - pj };
            }
            if p > 0.0 {
                total += p * (config.expected_outcome(1.0, &z)? - config.expected_outcome(0.0, &z)?);
            }
        }
        return Ok(TrueAte {
            value: total,
            method: AteMethod::Enumeration,
            std_error: 0.0,
        });
    }
    let mut rng = rng::rng(0x05ee_da7e);
    let (mut sum, mut sumsq) = (0.0, 0.0);
    let mut z = vec![0.0; k];
    for _ in 0..MC_SAMPLES {
        for (j, c) in config.confounders.iter().enumerate() {
            z[j] = match c.distribution {
                Distribution::Bernoulli { p } => f64::from(u8::from(rng.random::<f64>() < p)),
                Distribution::Gaussian { mean, std } => {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    mean + std * e
                }
            };
        }
        let d = config.expected_outcome(1.0, &z)? - config.expected_outcome(0.0, &z)?;
        sum += d;
        sumsq += d * d;
    }
    let n = MC_SAMPLES as f64;
    let mean = sum / n;
    Ok(TrueAte {
        value: mean,
        method: AteMethod::MonteCarlo,
        std_error: ((sumsq / n - mean * mean).max(0.0) / n).sqrt(),
    })
}

/// Closure-hazard logit coefficients for the outcome window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverCoefficients {
    pub intercept: f64,
    /// Stale contributions (no contribution in the last 3 months).
    pub sg_recency: f64,
    /// Negative balance growth over the observation window.
    pub account_growth: f64,
    /// Balance above [`HIGH_BALANCE`] at the anchor.
    pub balance: f64,
    /// Per year of tenure beyond one year.
    pub tenure: f64,
}

impl Default for DriverCoefficients {
    fn default() -> Self {
        Self {
            intercept: -3.4,
            sg_recency: 0.9,
            account_growth: 0.7,
            balance: -0.9,
            tenure: -0.5,
        }
    }
}

impl DriverCoefficients {
    pub fn zero() -> Self {
        Self {
            intercept: -3.4,
            sg_recency: 0.0,
            account_growth: 0.0,
            balance: 0.0,
            tenure: 0.0,
        }
    }
}

pub const HIGH_BALANCE: f64 = 50_000.0;
pub const LOGIN_ATTR: &str = "login_count";
pub const SG_ATTR: &str = "sg_contribution_amount";
pub const TENURE_ATTR: &str = "acc_tenure";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChurnCorpusConfig {
    pub n_members: usize,
    pub months: i64,
    pub observation_len: i64,
    pub outcome_len: i64,
    pub drivers: DriverCoefficients,
    /// Monthly closure probability before the anchor.
    pub pre_anchor_hazard: f64,
    pub seed: u64,
}

impl ChurnCorpusConfig {
    pub fn new(n_members: usize, seed: u64) -> Self {
        Self {
            n_members,
            months: 24,
            observation_len: 12,
            outcome_len: 6,
            drivers: DriverCoefficients::default(),
            pre_anchor_hazard: 0.003,
            seed,
        }
    }

    /// Last observation month: the outcome window ends at the final month.
    pub fn anchor_month(&self) -> i64 {
        self.months - self.outcome_len - 1
    }

    pub fn window(&self) -> WindowSpec {
        WindowSpec {
            anchor_month: self.anchor_month(),
            observation_len: self.observation_len,
            outcome_len: self.outcome_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_members == 0 {
            return Err(Error::invalid("n_members must be positive"));
        }
        if self.n_members < 100 {
            log::warn!("corpus of {} members is too small for statistical checks", self.n_members);
        }
        self.window().validate()?;
        if self.anchor_month() < self.observation_len - 1 {
            return Err(Error::invalid(format!(
                "{} months cannot hold a {}-month observation and {}-month outcome window",
                self.months, self.observation_len, self.outcome_len
            )));
        }
        if !(0.0..1.0).contains(&self.pre_anchor_hazard) {
            return Err(Error::invalid("pre_anchor_hazard must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Planted state of one member at the anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberTruth {
    pub member_id: String,
    pub stale_contributions: bool,
    pub low_growth: bool,
    pub high_balance: bool,
    pub tenure: i64,
    /// Outcome-window monthly hazard logit.
    pub eta: f64,
    /// Probability of closing within the outcome window.
    pub churn_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: ChurnCorpusConfig,
    pub members: Vec<MemberTruth>,
}

/// Treatment indicators whose effects the corpus plants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    SgRecency,
    AccountGrowth,
    Balance,
}

impl GroundTruth {
    fn window_probability(&self, eta: f64) -> f64 {
        1.0 - (1.0 - sigmoid(eta)).powi(self.config.outcome_len as i32)
    }

    pub fn member(&self, id: &str) -> Option<&MemberTruth> {
        self.members.iter().find(|m| m.member_id == id)
    }

    pub fn churn_probabilities(&self, ids: &[String]) -> Result<Vec<f64>> {
        let index: BTreeMap<&str, f64> = self
            .members
            .iter()
            .map(|m| (m.member_id.as_str(), m.churn_probability))
            .collect();
        ids.iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("no ground truth for member {id}")))
            })
            .collect()
    }

    /// Mean over `ids` of the change in window churn probability when the
    /// driver indicator is switched from 0 to 1.
    pub fn effect(&self, driver: Driver, ids: &[String]) -> Result<f64> {
        let d = &self.config.drivers;
        let (coef, current): (f64, fn(&MemberTruth) -> bool) = match driver {
            Driver::SgRecency => (d.sg_recency, |m| m.stale_contributions),
            Driver::AccountGrowth => (d.account_growth, |m| m.low_growth),
            Driver::Balance => (d.balance, |m| m.high_balance),
        };
        let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        let rows: Vec<&MemberTruth> = self
            .members
            .iter()
            .filter(|m| wanted.contains(m.member_id.as_str()))
            .collect();
        if rows.len() != wanted.len() {
            return Err(Error::invalid("effect requested for unknown members"));
        }
        let total: f64 = rows
            .iter()
            .map(|m| {
                let base = m.eta - if current(m) { coef } else { 0.0 };
                self.window_probability(base + coef) - self.window_probability(base)
            })
            .sum();
        Ok(total / rows.len() as f64)
    }
}

/// Simulates members with monthly `balance`, `sg_contribution_amount`,
/// `login_count` and `acc_tenure`, static `gender` and `promotion_pref`, and
/// closures drawn from a logistic monthly hazard frozen at the anchor.
pub fn generate_churn_corpus(config: &ChurnCorpusConfig) -> Result<(Vec<MemberRecord>, GroundTruth)> {
    config.validate()?;
    let anchor = config.anchor_month();
    let obs_start = anchor - config.observation_len + 1;
    let d = config.drivers;
    let mut records = Vec::with_capacity(config.n_members);
    let mut truth = Vec::with_capacity(config.n_members);
    for i in 0..config.n_members {
        let mut rng = rng::sub_rng(config.seed, i as u64);
        let id = format!("M{i:06}");
        let open = rng.random_range(anchor - 36..=anchor - 1);
        let female = rng.random::<f64>() < 0.5;
        let z: f64 = StandardNormal.sample(&mut rng);
        let balance_anchor = (30_000f64.ln() + if female { 0.0 } else { 0.25 } + 0.8 * z).exp();
        let low_growth = rng.random::<f64>() < sigmoid(-0.8 + if female { 0.8 } else { 0.0 });
        let growth = rng.random_range(0.002..0.02) * if low_growth { -1.0 } else { 1.0 };
        let stale = rng.random::<f64>() < sigmoid(0.2 - 0.6 * (balance_anchor - 30_000.0) / 30_000.0);
        let stop = stale.then(|| rng.random_range((open + 1).max(obs_start).min(anchor - 3)..=anchor - 3));
        let high_balance = balance_anchor > HIGH_BALANCE;
        let tenure = anchor - open;
        let eta = d.intercept
            + d.sg_recency * f64::from(u8::from(stale))
            + d.account_growth * f64::from(u8::from(low_growth))
            + d.balance * f64::from(u8::from(high_balance))
            + d.tenure * (tenure - 12) as f64 / 12.0;

        let mut close = None;
        for m in open + 1..=anchor {
            if rng.random::<f64>() < config.pre_anchor_hazard {
                close = Some(m);
                break;
            }
        }
        if close.is_none() {
            let h = sigmoid(eta);
            for m in anchor + 1..=anchor + config.outcome_len {
                if rng.random::<f64>() < h {
                    close = Some(m);
                    break;
                }
            }
        }

        let mut rec = MemberRecord::new(&id, open, close)?;
        rec.set_static("gender", if female { "F" } else { "M" });
        let prefs = ["email", "none", "sms"];
        rec.set_static("promotion_pref", prefs[rng.random_range(0..prefs.len())]);
        let contribution = 0.004 * balance_anchor * rng.random_range(0.8..1.2);
        let login_rate: f64 = rng.random_range(0.5..2.5);
        let last = close.map_or(config.months - 1, |c| c - 1).min(config.months - 1);
        for m in open.max(0)..=last {
            let jitter: f64 = StandardNormal.sample(&mut rng);
            let balance = if m == anchor {
                balance_anchor
            } else {
                balance_anchor * (growth * (m - anchor) as f64).exp() * (1.0 + 0.002 * jitter)
            };
            rec.set_monthly(m, BALANCE_ATTR, balance)?;
            let paid = stop.is_none_or(|s| m < s);
            rec.set_monthly(m, SG_ATTR, if paid { contribution } else { 0.0 })?;
            let logins: f64 = StandardNormal.sample(&mut rng);
            rec.set_monthly(m, LOGIN_ATTR, (login_rate + 0.5 * logins).max(0.0).round())?;
            rec.set_monthly(m, TENURE_ATTR, (m - open) as f64)?;
        }
        records.push(rec);
        truth.push(MemberTruth {
            member_id: id,
            stale_contributions: stale,
            low_growth,
            high_balance,
            tenure,
            eta,
            churn_probability: 0.0,
        });
    }
    let mut gt = GroundTruth {
        config: config.clone(),
        members: truth,
    };
    for k in 0..gt.members.len() {
        gt.members[k].churn_probability = gt.window_probability(gt.members[k].eta);
    }
    let window = config.window();
    let filters = InclusionFilters::default();
    let open_at_anchor: Vec<&MemberRecord> = records.iter().filter(|r| filters.admits(r, &window)).collect();
    let churned = open_at_anchor
        .iter()
        .filter(|r| r.account_close_month.is_some_and(|c| window.outcome_contains(c)))
        .count();
    let rate = churned as f64 / open_at_anchor.len().max(1) as f64;
    if churned == 0 || churned == open_at_anchor.len() {
        log::warn!("degenerate corpus: churn rate {rate}");
    }
    Ok((records, gt))
}

/// Causal assumptions over the feature columns built by [`churn_recipe`].
pub const CHURN_GRAPH: &str = "\
# demographic and balance drivers
gender -> balance_last
gender -> balance_change_ratio
balance_last -> sg_contribution_amount_recency
balance_last -> churn
sg_contribution_amount_recency -> churn
balance_change_ratio -> churn
acc_tenure_last -> churn
login_count_mean -> churn
promotion_pref
";

/// Snapshot recipe matching the corpus attributes.
pub fn churn_recipe() -> crate::dataset::Recipe {
    use crate::dataset::Aggregation::*;
    crate::dataset::Recipe::default()
        .add(BALANCE_ATTR, &[Last, ChangeRatio])
        .add(SG_ATTR, &[Recency])
        .add(LOGIN_ATTR, &[Mean])
        .add(TENURE_ATTR, &[Last])
        .nominal("gender")
        .nominal("promotion_pref")
}
