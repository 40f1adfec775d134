use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::causal::{Method, PropensityConfig, TreatmentSpec};
use crate::dataset::{InclusionFilters, Recipe, WindowSpec};
use crate::error::{Error, Result};
use crate::interpret::ImportanceMetric;
use crate::models::DEFAULT_THRESHOLD;
use crate::nnet::AnnPreset;
use crate::preprocess::SmoteTarget;
use crate::synth::{self, ChurnCorpusConfig, DriverCoefficients};

/// One JSON document with a section per stage. Relative paths resolve
/// against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub prepare: PrepareSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub explain: ExplainSection,
    #[serde(default)]
    pub causal: Option<CausalSection>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_members: usize,
    pub months: i64,
    pub observation_len: i64,
    pub outcome_len: i64,
    pub drivers: DriverCoefficients,
    pub pre_anchor_hazard: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let c = ChurnCorpusConfig::new(5000, 0);
        Self {
            n_members: c.n_members,
            months: c.months,
            observation_len: c.observation_len,
            outcome_len: c.outcome_len,
            drivers: c.drivers,
            pre_anchor_hazard: c.pre_anchor_hazard,
        }
    }
}

impl SynthSection {
    pub fn corpus_config(&self, seed: u64) -> ChurnCorpusConfig {
        ChurnCorpusConfig {
            n_members: self.n_members,
            months: self.months,
            observation_len: self.observation_len,
            outcome_len: self.outcome_len,
            drivers: self.drivers,
            pre_anchor_hazard: self.pre_anchor_hazard,
            seed,
        }
    }
}

/// Member CSVs; default to the files written by `synth`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub monthly: Option<PathBuf>,
    pub statics: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoteSection {
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default = "default_target")]
    pub target_minority_count: SmoteTarget,
}

fn default_k() -> usize {
    5
}

fn default_target() -> SmoteTarget {
    SmoteTarget::MatchMajority
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfeSection {
    pub n_keep: usize,
    #[serde(default = "one")]
    pub step: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareSection {
    /// Defaults to the window implied by the synth section.
    pub window: Option<WindowSpec>,
    pub filters: InclusionFilters,
    pub recipe: Recipe,
    pub test_fraction: f64,
    pub smote: Option<SmoteSection>,
    pub rfe: Option<RfeSection>,
    pub correlation_threshold: f64,
}

impl Default for PrepareSection {
    fn default() -> Self {
        Self {
            window: None,
            filters: InclusionFilters::default(),
            recipe: synth::churn_recipe(),
            test_fraction: 0.3,
            smote: Some(SmoteSection {
                k_neighbors: default_k(),
                target_minority_count: default_target(),
            }),
            rfe: Some(RfeSection { n_keep: 8, step: 1 }),
            correlation_threshold: 0.8,
        }
    }
}

/// A built-in preset name or a full inline preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PresetRef {
    Named(String),
    Inline(AnnPreset),
}

impl PresetRef {
    pub fn resolve(&self) -> Result<AnnPreset> {
        match self {
            PresetRef::Inline(p) => Ok(p.clone()),
            PresetRef::Named(n) if n == "deep_ann_1" => Ok(AnnPreset::deep_ann_1()),
            PresetRef::Named(n) if n == "deep_ann_2" => Ok(AnnPreset::deep_ann_2()),
            PresetRef::Named(n) => Err(Error::invalid(format!("unknown ANN preset `{n}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    LinearDiscriminant,
    Logistic {
        #[serde(default = "default_logistic_lr")]
        learning_rate: f64,
        #[serde(default = "default_logistic_epochs")]
        epochs: usize,
    },
    GaussianNb,
    Ann {
        preset: PresetRef,
    },
    EnsembleAnn {
        presets: [PresetRef; 2],
    },
    /// Members name earlier roster entries.
    HardVote {
        members: Vec<String>,
    },
    SoftVote {
        members: Vec<String>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
}

fn default_logistic_lr() -> f64 {
    0.5
}

fn default_logistic_epochs() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub name: String,
    #[serde(flatten)]
    pub spec: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub roster: Vec<RosterEntry>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let entry = |name: &str, spec| RosterEntry {
            name: name.into(),
            spec,
        };
        let base = vec!["linear_discriminant".to_string(), "logistic".into(), "gaussian_nb".into()];
        Self {
            roster: vec![
                entry("linear_discriminant", ModelSpec::LinearDiscriminant),
                entry(
                    "logistic",
                    ModelSpec::Logistic {
                        learning_rate: default_logistic_lr(),
                        epochs: default_logistic_epochs(),
                    },
                ),
                entry("gaussian_nb", ModelSpec::GaussianNb),
                entry("hard_vote", ModelSpec::HardVote { members: base.clone() }),
                entry(
                    "soft_vote",
                    ModelSpec::SoftVote {
                        members: base,
                        weights: None,
                    },
                ),
                entry(
                    "ensemble_ann",
                    ModelSpec::EnsembleAnn {
                        presets: [PresetRef::Named("deep_ann_1".into()), PresetRef::Named("deep_ann_2".into())],
                    },
                ),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub threshold: f64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    pub model: String,
    pub grid_size: usize,
    pub n_repeats: usize,
    pub top_k: usize,
    pub metric: ImportanceMetric,
}

impl Default for ExplainSection {
    fn default() -> Self {
        Self {
            model: "ensemble_ann".into(),
            grid_size: 20,
            n_repeats: 5,
            top_k: 5,
            metric: ImportanceMetric::Auc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefuterSection {
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default = "default_tol")]
    pub stability_tol: f64,
}

impl Default for RefuterSection {
    fn default() -> Self {
        Self {
            fraction: default_fraction(),
            n_trials: default_trials(),
            stability_tol: default_tol(),
        }
    }
}

fn default_fraction() -> f64 {
    0.8
}

fn default_trials() -> usize {
    10
}

fn default_tol() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalSection {
    pub graph: PathBuf,
    /// Analysis table; defaults to the `prepare` snapshot.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default = "default_outcome")]
    pub outcome: String,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub stabilized: bool,
    #[serde(default)]
    pub propensity: PropensityConfig,
    #[serde(default)]
    pub refuter: RefuterSection,
    pub treatments: Vec<TreatmentSpec>,
}

fn default_outcome() -> String {
    "churn".into()
}

fn default_method() -> Method {
    Method::Ipw
}

impl PipelineConfig {
    /// Reads a config and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("reading config {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(p) = self.data.monthly.as_mut() {
            fix(p);
        }
        if let Some(p) = self.data.statics.as_mut() {
            fix(p);
        }
        if let Some(c) = self.causal.as_mut() {
            fix(&mut c.graph);
            if let Some(p) = c.dataset.as_mut() {
                fix(p);
            }
        }
    }

    pub fn master_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::invalid("config: `seed` is mandatory (or pass --seed)"))
    }

    pub fn window(&self) -> WindowSpec {
        self.prepare.window.unwrap_or_else(|| self.synth.corpus_config(0).window())
    }

    pub fn validate(&self) -> Result<()> {
        self.master_seed()?;
        self.synth.corpus_config(0).validate()?;
        self.window().validate()?;
        let p = &self.prepare;
        if !(p.test_fraction > 0.0 && p.test_fraction < 1.0) {
            return Err(Error::invalid("prepare.test_fraction must lie in (0, 1)"));
        }
        if let Some(r) = &p.rfe {
            if r.n_keep == 0 || r.step == 0 {
                return Err(Error::invalid("prepare.rfe: n_keep and step must be positive"));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for e in &self.train.roster {
            if !names.insert(e.name.as_str()) {
                return Err(Error::invalid(format!("duplicate roster name `{}`", e.name)));
            }
            if let ModelSpec::HardVote { members } | ModelSpec::SoftVote { members, .. } = &e.spec {
                if let Some(m) = members.iter().find(|m| !names.contains(m.as_str()) || *m == &e.name) {
                    return Err(Error::invalid(format!("{}: member `{m}` is not an earlier roster entry", e.name)));
                }
            }
        }
        Ok(())
    }
}
