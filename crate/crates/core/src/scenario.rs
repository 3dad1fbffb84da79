//! Scenario files: the single configuration surface of a pipeline run.
//! Relative paths resolve against the scenario file's directory.
//!
//! ```toml
//! seed = 0
//! output_dir = "../out/german_credit"
//! population = 75_500_000
//! strategies = ["s1", "s2", "s3", "s4", "s5"]
//!
//! [data]
//! dataset = "../data/german.data"
//! schema = "../data/german_credit.schema.toml"
//! test_fraction = 0.33
//! proposals = "quantiles"          # quantiles | domain
//!
//! [model]
//! tuning = "grid"                  # grid | fixed
//! # builtin = "hiring-screen"      # hand-built model instead of training
//!
//! [search]                         # counterfactual search budget
//! [strategy]                       # thresholds and spam feature
//! [rates]                          # CTR/CPC table
//! [monte_carlo]                    # trials
//! [exchange]                       # campaigns file, auction rules
//! [explain]                        # rows to explain
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer};
use serde::Deserialize;

use crate::counterfactual::SearchConfig;
use crate::error::ScenarioError;
use crate::exchange::{Granularity, Pricing, DEFAULT_REVENUE_SHARE};
use crate::forest::ForestParams;
use crate::market::{RateTable, StrategyKind};

/// Credit-card applications per year used for extrapolation.
pub const DEFAULT_POPULATION: u64 = 75_500_000;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_population")]
    pub population: u64,
    #[serde(default = "all_strategies", deserialize_with = "strategies")]
    pub strategies: Vec<StrategyKind>,
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub rates: RateTable,
    #[serde(default)]
    pub monte_carlo: MonteCarloSection,
    #[serde(default)]
    pub exchange: Option<ExchangeSection>,
    #[serde(default)]
    pub explain: ExplainSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub dataset: PathBuf,
    pub schema: PathBuf,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub proposals: ProposalSource,
}

/// Where numeric proposal values for the counterfactual search come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalSource {
    /// Quantiles of the training data.
    #[default]
    Quantiles,
    /// Evenly spaced points over each feature's declared range.
    Domain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tuning {
    /// 5-fold cross-validated grid search, selecting by mean AUC.
    Grid,
    #[default]
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Name of a hand-built model; skips training.
    pub builtin: Option<String>,
    pub tuning: Tuning,
    pub folds: usize,
    pub n_trees: usize,
    /// A depth, or `"none"` for unlimited.
    #[serde(deserialize_with = "depth")]
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = ForestParams::default();
        Self {
            builtin: None,
            tuning: Tuning::Fixed,
            folds: 5,
            n_trees: p.n_trees,
            max_depth: p.max_depth,
            min_leaf: p.min_leaf,
            features_per_split: p.features_per_split,
            bootstrap: p.bootstrap,
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            features_per_split: self.features_per_split,
            bootstrap: self.bootstrap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategySection {
    pub threshold: f64,
    pub inflated_threshold: f64,
    pub spam_feature: String,
}

impl Default for StrategySection {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            inflated_threshold: 0.8,
            spam_feature: "Telephone".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSection {
    pub trials: usize,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self { trials: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeSection {
    pub campaigns: PathBuf,
    #[serde(default)]
    pub pricing: Pricing,
    #[serde(default)]
    pub reserve: f64,
    #[serde(default)]
    pub keyword_reserves: BTreeMap<String, f64>,
    #[serde(default = "default_context")]
    pub context: String,
    #[serde(default)]
    pub granularity: Granularity,
    #[serde(default = "default_share")]
    pub revenue_share: f64,
    /// Strategy whose explanations become impressions.
    #[serde(default = "default_exchange_strategy", deserialize_with = "strategy")]
    pub strategy: StrategyKind,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainSection {
    /// Row ids to explain; all evaluation rows when omitted.
    pub rows: Option<Vec<String>>,
}

fn default_population() -> u64 {
    DEFAULT_POPULATION
}

fn default_test_fraction() -> f64 {
    0.33
}

fn default_context() -> String {
    "finance".into()
}

fn default_share() -> f64 {
    DEFAULT_REVENUE_SHARE
}

fn default_exchange_strategy() -> StrategyKind {
    StrategyKind::Baseline
}

fn all_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}

fn strategy<'de, D: Deserializer<'de>>(d: D) -> Result<StrategyKind, D::Error> {
    String::deserialize(d)?.parse().map_err(de::Error::custom)
}

fn strategies<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<StrategyKind>, D::Error> {
    Vec::<String>::deserialize(d)?
        .iter()
        .map(|s| s.parse().map_err(de::Error::custom))
        .collect()
}

fn depth<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
    struct DepthVisitor;

    impl de::Visitor<'_> for DepthVisitor {
        type Value = Option<usize>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a positive integer or \"none\"")
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
            usize::try_from(v)
                .ok()
                .filter(|d| *d > 0)
                .map(Some)
                .ok_or_else(|| E::custom(format!("max_depth must be positive, got {v}")))
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
            match v {
                "none" => Ok(None),
                _ => Err(E::custom(format!("max_depth must be an integer or \"none\", got \"{v}\""))),
            }
        }
    }

    d.deserialize_any(DepthVisitor)
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|message| ScenarioError::Invalid {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Parses scenario text, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, String> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| e.to_string())?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut s.output_dir);
        resolve(&mut s.data.dataset);
        resolve(&mut s.data.schema);
        if let Some(x) = &mut s.exchange {
            resolve(&mut x.campaigns);
        }
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), String> {
        if self.strategies.is_empty() {
            return Err("strategy list must not be empty".into());
        }
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return Err(format!("test_fraction must lie in (0, 1), got {}", self.data.test_fraction));
        }
        if self.population == 0 {
            return Err("population must be positive".into());
        }
        if self.monte_carlo.trials == 0 {
            return Err("monte_carlo.trials must be positive".into());
        }
        if self.model.folds < 2 {
            return Err("model.folds must be at least 2".into());
        }
        self.rates.validate().map_err(|e| e.to_string())?;
        for p in [&self.data.dataset, &self.data.schema] {
            if !p.is_file() {
                return Err(format!("referenced file {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or("scenario")
    }
}
