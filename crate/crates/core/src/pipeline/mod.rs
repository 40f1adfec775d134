//! Configuration-driven workflow. Each stage reads its inputs from and
//! writes its outputs to the run's output directory, so stages can be run
//! one at a time from the command line.

mod config;

pub use config::{
    CausalSection, DataSection, EvaluateSection, ExplainSection, ModelSpec, PipelineConfig, PrepareSection,
    PresetRef, RefuterSection, RfeSection, RosterEntry, SmoteSection, SynthSection, TrainSection,
};

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Axis;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::causal::{self, AnalysisConfig, RefuterConfig, TreatmentSpec};
use crate::dataset::{build_snapshot, read_records, train_test_split, write_records, LabeledDataset};
use crate::error::{Error, Result};
use crate::featsel::{rfe, FeatureRanking, LeastSquaresTrainer};
use crate::interpret::{self, Shortlist};
use crate::metrics::{self, MetricBundle};
use crate::models::{self, Classifier, Model};
use crate::preprocess::{self, OneHotEncoder, ScalerParams, SmoteConfig};
use crate::rng::derive_seed;
use crate::synth::{self, GroundTruth};

pub const MONTHLY_CSV: &str = "members_monthly.csv";
pub const STATIC_CSV: &str = "members_static.csv";
pub const GROUND_TRUTH_JSON: &str = "ground_truth.json";
pub const SNAPSHOT_CSV: &str = "snapshot.csv";
pub const TRAIN_CSV: &str = "train.csv";
pub const TEST_CSV: &str = "test.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const ORACLE_JSON: &str = "oracle.json";
pub const IMPORTANCE_JSON: &str = "importance.json";
pub const PDP_CSV: &str = "pdp.csv";
pub const SHORTLIST_JSON: &str = "shortlist.json";
pub const CAUSAL_REPORT_JSON: &str = "causal_report.json";
pub const CAUSAL_AUDIT_JSON: &str = "causal_audit.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Synth,
    Prepare,
    Train,
    Evaluate,
    Explain,
    Causal,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Synth,
        Stage::Prepare,
        Stage::Train,
        Stage::Evaluate,
        Stage::Explain,
        Stage::Causal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Prepare => "prepare",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Explain => "explain",
            Stage::Causal => "causal",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown stage `{s}`")))
    }
}

/// A validated config bound to its output directory and master seed.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: PipelineConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl Run {
    /// `out` and `seed` override the config's values.
    pub fn new(mut config: PipelineConfig, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self> {
        if let Some(s) = seed {
            config.seed = Some(s);
        }
        if let Some(o) = out {
            config.output_dir = o;
        }
        config.validate()?;
        Ok(Self {
            seed: config.master_seed()?,
            out: config.output_dir.clone(),
            config,
        })
    }

    pub fn from_file(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self> {
        Self::new(PipelineConfig::load(path)?, out, seed)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn model_path(&self, name: &str) -> PathBuf {
        self.out.join("models").join(format!("{name}.json"))
    }

    /// Runs one stage; errors carry the stage name. Returns a one-line summary.
    pub fn run(&self, stage: Stage) -> Result<String> {
        let result = fs::create_dir_all(&self.out)
            .map_err(Error::from)
            .and_then(|_| write_json(&self.path("config_resolved.json"), &self.config))
            .and_then(|_| match stage {
                Stage::Synth => self.synth(),
                Stage::Prepare => self.prepare(),
                Stage::Train => self.train(),
                Stage::Evaluate => self.evaluate(),
                Stage::Explain => self.explain(),
                Stage::Causal => self.causal(),
            });
        result.map_err(|e| e.in_stage(stage.name()))
    }

    fn synth(&self) -> Result<String> {
        let cfg = self.config.synth.corpus_config(derive_seed(self.seed, 1));
        let (records, truth) = synth::generate_churn_corpus(&cfg)?;
        let monthly = BufWriter::new(File::create(self.path(MONTHLY_CSV))?);
        let statics = BufWriter::new(File::create(self.path(STATIC_CSV))?);
        write_records(&records, monthly, statics)?;
        write_json(&self.path(GROUND_TRUTH_JSON), &truth)?;
        let window = cfg.window();
        let admitted: Vec<_> = records
            .iter()
            .filter(|r| self.config.prepare.filters.admits(r, &window))
            .collect();
        let churned = admitted
            .iter()
            .filter(|r| r.account_close_month.is_some_and(|c| window.outcome_contains(c)))
            .count();
        let summary = SynthSummary {
            members: records.len(),
            admitted: admitted.len(),
            churned,
            churn_rate: churned as f64 / admitted.len().max(1) as f64,
        };
        write_json(&self.path("synth_summary.json"), &summary)?;
        Ok(format!(
            "synth: {} members ({} admitted), churn rate {:.3}",
            summary.members, summary.admitted, summary.churn_rate
        ))
    }

    fn input_paths(&self) -> (PathBuf, PathBuf) {
        let d = &self.config.data;
        (
            d.monthly.clone().unwrap_or_else(|| self.path(MONTHLY_CSV)),
            d.statics.clone().unwrap_or_else(|| self.path(STATIC_CSV)),
        )
    }

    fn prepare(&self) -> Result<String> {
        let p = &self.config.prepare;
        let (monthly, statics) = self.input_paths();
        let records = read_records(open(&monthly)?, open(&statics)?)?;
        let window = self.config.window();
        let mut log = Vec::new();
        let admitted: Vec<_> = records.into_iter().filter(|r| p.filters.admits(r, &window)).collect();
        let snapshot = build_snapshot(&admitted, &window, &p.recipe)?;
        log.push(StageCount::of("snapshot", &snapshot));
        snapshot.save(&self.path(SNAPSHOT_CSV))?;

        let (train, test) = train_test_split(&snapshot, 1.0 - p.test_fraction, derive_seed(self.seed, 2))?;
        log.push(StageCount::of("split_train", &train));
        log.push(StageCount::of("split_test", &test));

        let numeric: Vec<usize> = (0..train.n_features()).filter(|&j| !train.specs()[j].is_nominal()).collect();
        let scaler = standardize_fit_columns(&train, &numeric)?;
        let train = scaler.apply(&train)?;
        let test = scaler.apply(&test)?;
        write_json(&self.path("scaler.json"), &scaler)?;

        let encoder = OneHotEncoder::fit(&train);
        let mut train = encoder.apply(&train)?;
        let mut test = encoder.apply(&test)?;
        write_json(&self.path("encoder.json"), &encoder)?;
        log.push(StageCount::of("one_hot_train", &train));

        let names = train.feature_names();
        let corr = preprocess::correlation_pairs(train.features().view(), &names, p.correlation_threshold)?;
        write_json(&self.path("correlation.json"), &corr)?;

        if let Some(s) = &p.smote {
            let cfg = SmoteConfig {
                k_neighbors: s.k_neighbors,
                target_minority_count: s.target_minority_count,
                seed: derive_seed(self.seed, 3),
            };
            train = preprocess::smote(&train, &cfg)?;
            log.push(StageCount::of("smote_train", &train));
        }

        let ranking: Option<FeatureRanking> = match &p.rfe {
            Some(r) => {
                let (ranking, reduced) = rfe(&train, r.n_keep, r.step, &LeastSquaresTrainer::default())?;
                train = reduced;
                test = ranking.apply(&test)?;
                log.push(StageCount::of("rfe_train", &train));
                Some(ranking)
            }
            None => None,
        };
        write_json(&self.path("ranking.json"), &ranking)?;
        log.push(StageCount::of("final_test", &test));
        check_no_leakage(&train, &test)?;

        train.save(&self.path(TRAIN_CSV))?;
        test.save(&self.path(TEST_CSV))?;
        write_json(&self.path("prepare_log.json"), &log)?;
        let (neg, pos) = train.class_counts();
        Ok(format!(
            "prepare: train {} rows ({neg}:{pos}), test {} rows, {} features",
            train.n_rows(),
            test.n_rows(),
            train.n_features()
        ))
    }

    fn train(&self) -> Result<String> {
        let train = LabeledDataset::load(&self.path(TRAIN_CSV))?;
        fs::create_dir_all(self.out.join("models"))?;
        let mut fitted: BTreeMap<String, Model> = BTreeMap::new();
        let mut statuses = Vec::new();
        for (i, entry) in self.config.train.roster.iter().enumerate() {
            let seed = derive_seed(self.seed, 1000 + i as u64);
            let path = self.model_path(&entry.name);
            match fit_entry(entry, &train, seed, &fitted) {
                Ok(model) => {
                    let doc = ModelDoc {
                        name: entry.name.clone(),
                        kind: model.kind().to_string(),
                        seed,
                        features: train.feature_names().iter().map(|s| s.to_string()).collect(),
                        model,
                    };
                    write_json(&path, &doc)?;
                    fitted.insert(entry.name.clone(), doc.model);
                    statuses.push(TrainStatus {
                        model: entry.name.clone(),
                        status: "ok".into(),
                        error: None,
                    });
                }
                Err(e) => {
                    log::warn!("model {} failed: {e}", entry.name);
                    if path.exists() {
                        fs::remove_file(&path)?;
                    }
                    statuses.push(TrainStatus {
                        model: entry.name.clone(),
                        status: "failed".into(),
                        error: Some(e.to_string()),
                    });
                }
            }
        }
        write_json(&self.path("train_log.json"), &statuses)?;
        let ok = statuses.iter().filter(|s| s.status == "ok").count();
        Ok(format!("train: {ok} of {} models trained", statuses.len()))
    }

    fn load_model(&self, name: &str) -> Result<ModelDoc> {
        read_json(&self.model_path(name))
    }

    fn evaluate(&self) -> Result<String> {
        let test = LabeledDataset::load(&self.path(TEST_CSV))?;
        let threshold = self.config.evaluate.threshold;
        let roc_dir = self.out.join("roc");
        fs::create_dir_all(&roc_dir)?;
        let mut report = MetricsReport::default();
        for entry in &self.config.train.roster {
            let path = self.model_path(&entry.name);
            if !path.exists() {
                report.failed.push(entry.name.clone());
                continue;
            }
            let doc = self.load_model(&entry.name)?;
            check_features(&doc, &test)?;
            let probas = doc.model.predict_proba(test.features().view())?;
            report
                .models
                .insert(entry.name.clone(), MetricBundle::compute(test.labels(), &probas, threshold)?);
            let roc = metrics::roc_points(&probas, test.labels())?;
            metrics::write_roc_csv(&roc, BufWriter::new(File::create(roc_dir.join(format!("{}.csv", entry.name)))?))?;
        }
        write_json(&self.path(METRICS_JSON), &report)?;
        write_comparison(&report, &self.path(COMPARISON_CSV))?;

        let truth_path = self.path(GROUND_TRUTH_JSON);
        if truth_path.exists() {
            let truth: GroundTruth = read_json(&truth_path)?;
            if let Ok(p) = truth.churn_probabilities(test.member_ids()) {
                let oracle = OracleReport {
                    bayes_auc: metrics::auc(&p, test.labels())?,
                    n_test: test.n_rows(),
                };
                write_json(&self.path(ORACLE_JSON), &oracle)?;
            }
        }
        let best = report
            .models
            .iter()
            .max_by(|a, b| a.1.test_acc.total_cmp(&b.1.test_acc).then(b.0.cmp(a.0)))
            .map(|(n, m)| format!("best {n} (acc {:.3}, auc {:.3})", m.test_acc, m.auc))
            .unwrap_or_else(|| "no models".into());
        Ok(format!("evaluate: {} models, {best}", report.models.len()))
    }

    fn explain(&self) -> Result<String> {
        let e = &self.config.explain;
        let test = LabeledDataset::load(&self.path(TEST_CSV))?;
        let doc = self.load_model(&e.model)?;
        check_features(&doc, &test)?;
        let importances =
            interpret::permutation_importance(&doc.model, &test, e.metric, e.n_repeats, derive_seed(self.seed, 4))?;
        let curves = test
            .feature_names()
            .iter()
            .map(|f| interpret::partial_dependence(&doc.model, &test, f, e.grid_size))
            .collect::<Result<Vec<_>>>()?;
        interpret::write_pdp_csv(&curves, BufWriter::new(File::create(self.path(PDP_CSV))?))?;
        write_json(&self.path(IMPORTANCE_JSON), &importances)?;
        let shortlist = interpret::shortlist_candidates(&importances, &curves, e.top_k);
        let doc = ShortlistDoc {
            model: e.model.clone(),
            treatments: treatments_from(&shortlist),
            shortlist,
        };
        write_json(&self.path(SHORTLIST_JSON), &doc)?;
        Ok(format!("explain: top features {}", doc.shortlist.features().join(", ")))
    }

    fn causal(&self) -> Result<String> {
        let c = self
            .config
            .causal
            .as_ref()
            .ok_or_else(|| Error::invalid("config has no `causal` section"))?;
        let graph = causal::parse_graph(&fs::read_to_string(&c.graph).map_err(|e| {
            Error::invalid(format!("reading graph {}: {e}", c.graph.display()))
        })?)?;
        let data_path = c.dataset.clone().unwrap_or_else(|| self.path(SNAPSHOT_CSV));
        let (ds, _) = preprocess::one_hot(&LabeledDataset::load(&data_path)?)?;
        let analysis = AnalysisConfig {
            outcome: c.outcome.clone(),
            method: c.method,
            stabilized: c.stabilized,
            propensity: c.propensity,
            refuter: RefuterConfig {
                fraction: c.refuter.fraction,
                n_trials: c.refuter.n_trials,
                seed: derive_seed(self.seed, 5),
                stability_tol: c.refuter.stability_tol,
            },
        };
        let estimates = causal::run_causal_analysis(&ds, &graph, &c.treatments, &analysis)?;
        let rows: Vec<_> = estimates.iter().map(|e| e.report_row()).collect();
        write_json(&self.path(CAUSAL_REPORT_JSON), &rows)?;
        write_json(
            &self.path(CAUSAL_AUDIT_JSON),
            &CausalAudit {
                dataset: match &c.dataset {
                    Some(p) => p.display().to_string(),
                    None => SNAPSHOT_CSV.to_string(),
                },
                graph_edges: graph.edges().iter().map(|(a, b)| format!("{a} -> {b}")).collect(),
                config: analysis,
                estimates,
            },
        )?;
        let lines: Vec<String> = rows
            .iter()
            .map(|r| format!("{} {}", r.causal_variable, r.probability_of_churn))
            .collect();
        Ok(format!("causal: {}", lines.join("; ")))
    }
}

/// Column-subset standardisation learned on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub columns: Vec<String>,
    pub params: ScalerParams,
}

fn standardize_fit_columns(ds: &LabeledDataset, cols: &[usize]) -> Result<ColumnScaler> {
    let names = ds.feature_names();
    Ok(ColumnScaler {
        columns: cols.iter().map(|&c| names[c].to_string()).collect(),
        params: preprocess::standardize_fit(ds.features().select(Axis(1), cols).view())?,
    })
}

impl ColumnScaler {
    pub fn apply(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        let idx = self
            .columns
            .iter()
            .map(|c| ds.column_index(c))
            .collect::<Result<Vec<_>>>()?;
        let scaled = self.params.apply(ds.features().select(Axis(1), &idx).view())?;
        let mut x = ds.features().clone();
        for (k, &j) in idx.iter().enumerate() {
            x.column_mut(j).assign(&scaled.column(k));
        }
        ds.with_features(x, ds.specs().to_vec())
    }
}

/// Synthetic rows stay in training and no member appears on both sides.
fn check_no_leakage(train: &LabeledDataset, test: &LabeledDataset) -> Result<()> {
    let train_ids: std::collections::BTreeSet<&str> = train
        .member_ids()
        .iter()
        .map(|id| id.strip_prefix("smote:").and_then(|r| r.rsplit_once(':')).map_or(id.as_str(), |(b, _)| b))
        .collect();
    if let Some(id) = test
        .member_ids()
        .iter()
        .find(|id| id.starts_with("smote:") || train_ids.contains(id.as_str()))
    {
        return Err(Error::invalid(format!("member {id} leaked into the test split")));
    }
    Ok(())
}

fn fit_entry(entry: &RosterEntry, ds: &LabeledDataset, seed: u64, fitted: &BTreeMap<String, Model>) -> Result<Model> {
    let members = |names: &[String]| -> Result<Vec<Model>> {
        names
            .iter()
            .map(|n| {
                fitted
                    .get(n)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("vote member `{n}` was not trained")))
            })
            .collect()
    };
    Ok(match &entry.spec {
        ModelSpec::LinearDiscriminant => Model::Linear(models::fit_linear_discriminant(ds)?),
        ModelSpec::Logistic { learning_rate, epochs } => Model::Linear(models::fit_logistic(ds, *learning_rate, *epochs)?),
        ModelSpec::GaussianNb => Model::GaussianNb(models::fit_gaussian_nb(ds)?),
        ModelSpec::Ann { preset } => Model::Ann(Box::new(preset.resolve()?.train(ds, seed)?)),
        ModelSpec::EnsembleAnn { presets } => {
            let a = presets[0].resolve()?;
            let b = presets[1].resolve()?;
            Model::SoftVote(models::ensemble_ann(
                ds,
                (&a, derive_seed(seed, 1)),
                (&b, derive_seed(seed, 2)),
            )?)
        }
        ModelSpec::HardVote { members: names } => Model::HardVote(models::hard_vote(members(names)?)?),
        ModelSpec::SoftVote { members: names, weights } => {
            let m = members(names)?;
            let w = weights.clone().unwrap_or_else(|| vec![1.0; m.len()]);
            Model::SoftVote(models::soft_vote(m, w)?)
        }
    })
}

fn check_features(doc: &ModelDoc, ds: &LabeledDataset) -> Result<()> {
    if doc.features.iter().map(String::as_str).ne(ds.feature_names()) {
        return Err(Error::invalid(format!(
            "model {} was trained on different feature columns",
            doc.name
        )));
    }
    Ok(())
}

/// Shortlisted features as causal treatments split at their median.
fn treatments_from(shortlist: &Shortlist) -> Vec<TreatmentSpec> {
    shortlist
        .candidates
        .iter()
        .map(|c| TreatmentSpec {
            name: format!("high_{}", c.feature),
            column: c.feature.clone(),
            rule: causal::BinarizeRule::Median,
        })
        .collect()
}

fn write_comparison(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut rows: Vec<(&String, &MetricBundle)> = report.models.iter().collect();
    rows.sort_by(|a, b| b.1.test_acc.total_cmp(&a.1.test_acc).then(a.0.cmp(b.0)));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["model", "test_acc", "auc", "cohen_kappa", "mcc"])?;
    for (name, m) in rows {
        w.write_record([
            name.clone(),
            m.test_acc.to_string(),
            m.auc.to_string(),
            m.cohen_kappa.to_string(),
            m.mcc.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub members: usize,
    pub admitted: usize,
    pub churned: usize,
    pub churn_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: String,
    pub rows: usize,
    pub columns: usize,
    pub negatives: usize,
    pub positives: usize,
}

impl StageCount {
    fn of(stage: &str, ds: &LabeledDataset) -> Self {
        let (negatives, positives) = ds.class_counts();
        Self {
            stage: stage.into(),
            rows: ds.n_rows(),
            columns: ds.n_features(),
            negatives,
            positives,
        }
    }
}

/// A trained model with the provenance needed to reuse it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub features: Vec<String>,
    pub model: Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStatus {
    pub model: String,
    pub status: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub models: BTreeMap<String, MetricBundle>,
    /// Roster entries without a trained model.
    pub failed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// AUC of the true churn probabilities on the test split.
    pub bayes_auc: f64,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortlistDoc {
    pub model: String,
    pub shortlist: Shortlist,
    /// Ready to paste into the `causal.treatments` config section.
    pub treatments: Vec<TreatmentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalAudit {
    pub dataset: String,
    pub graph_edges: Vec<String>,
    pub config: AnalysisConfig,
    pub estimates: Vec<causal::CausalEstimate>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::invalid(format!("opening {}: {e}", path.display())))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(open(path)?))?)
}
