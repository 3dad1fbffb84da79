//! Random-forest classifier built from scratch: bootstrap-aggregated CART
//! trees over the schema's numeric encoding, thresholded decisions, rank
//! AUC and a small cross-validated grid search.

mod metrics;
mod tree;
mod tune;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use metrics::{auc, auc_scores};
pub use tree::{Node, Tree};
pub use tune::{default_grid, stratified_folds, tune_forest, TuneResult};

use crate::error::{DataError, ModelError};
use crate::tabular::{Dataset, Instance, Schema, Value};
use crate::util::{substream, write_atomic};

pub const MODEL_FORMAT: &str = "explat-forest";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or hit `min_leaf`.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Columns tried per split; `None` means round(sqrt(encoded width)).
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: Some(8),
            min_leaf: 1,
            features_per_split: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    fn validate(&self, width: usize) -> Result<usize, ModelError> {
        if self.n_trees == 0 {
            return Err(ModelError::Hyperparams("n_trees must be positive".into()));
        }
        if self.max_depth == Some(0) {
            return Err(ModelError::Hyperparams("max_depth must be positive".into()));
        }
        if self.min_leaf == 0 {
            return Err(ModelError::Hyperparams("min_leaf must be positive".into()));
        }
        let mtry = self
            .features_per_split
            .unwrap_or_else(|| ((width as f64).sqrt().round() as usize).max(1));
        if mtry == 0 || mtry > width {
            return Err(ModelError::Hyperparams(format!(
                "features_per_split must lie in 1..={width}"
            )));
        }
        Ok(mtry)
    }
}

impl fmt::Display for ForestParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let depth = self.max_depth.map_or("none".to_string(), |d| d.to_string());
        write!(
            f,
            "n_trees={} max_depth={} min_leaf={}",
            self.n_trees, depth, self.min_leaf
        )
    }
}

/// Acceptance threshold, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub const DEFAULT: Threshold = Threshold(0.5);

    pub fn new(value: f64) -> Result<Self, ModelError> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(ModelError::Threshold(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn opposite(self) -> Self {
        match self {
            Verdict::Accept => Verdict::Reject,
            Verdict::Reject => Verdict::Accept,
        }
    }

    fn of(probability: f64, threshold: Threshold) -> Self {
        // Inclusive boundary: p == θ accepts.
        if probability >= threshold.0 {
            Verdict::Accept
        } else {
            Verdict::Reject
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accept => f.write_str("accept"),
            Verdict::Reject => f.write_str("reject"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub verdict: Verdict,
    pub probability: f64,
    pub threshold: Threshold,
}

#[derive(Debug, Clone)]
pub struct Forest {
    schema: Arc<Schema>,
    params: ForestParams,
    seed: u64,
    trees: Vec<Tree>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    schema: String,
    schema_fingerprint: String,
    encoded_width: usize,
    seed: u64,
    params: ForestParams,
    trees: Vec<Tree>,
}

impl Forest {
    /// Trains a forest. Tree `i` draws from its own RNG substream derived
    /// from `(seed, i)`, so the result does not depend on training order.
    pub fn train(train: &Dataset, params: &ForestParams, seed: u64) -> Result<Self, ModelError> {
        let x = train.encoded();
        Self::train_encoded(Arc::clone(&train.schema), &x, &train.labels, params, seed)
    }

    pub(crate) fn train_encoded(
        schema: Arc<Schema>,
        x: &[Vec<f64>],
        y: &[bool],
        params: &ForestParams,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let pos = y.iter().filter(|&&l| l).count();
        if pos == 0 || pos == y.len() {
            return Err(ModelError::SingleClass);
        }
        let mtry = params.validate(schema.encoded_width())?;
        let grow = tree::GrowParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            features_per_split: mtry,
        };
        let n = x.len();
        let trees = (0..params.n_trees)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, t as u64));
                let sample: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                tree::grow(x, y, &sample, &grow, &mut rng)
            })
            .collect();
        Ok(Self {
            schema,
            params: params.clone(),
            seed,
            trees,
        })
    }

    /// Wraps hand-built trees, e.g. for fixtures and demos.
    pub fn from_trees(schema: Arc<Schema>, trees: Vec<Tree>) -> Result<Self, ModelError> {
        if trees.is_empty() {
            return Err(ModelError::Hyperparams("forest needs at least one tree".into()));
        }
        let width = schema.encoded_width();
        if trees.iter().filter_map(Tree::max_column).any(|c| c >= width) {
            return Err(ModelError::SchemaMismatch("split column beyond encoded width".into()));
        }
        let params = ForestParams {
            n_trees: trees.len(),
            max_depth: trees.iter().map(Tree::depth).max().filter(|&d| d > 0),
            min_leaf: 1,
            features_per_split: Some(width),
            bootstrap: false,
        };
        Ok(Self {
            schema,
            params,
            seed: 0,
            trees,
        })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Unweighted mean of per-tree leaf fractions.
    pub fn predict_proba(&self, instance: &Instance) -> Result<f64, ModelError> {
        let x = self.schema.encode(instance).map_err(schema_mismatch)?;
        Ok(self.proba_encoded(&x))
    }

    pub fn decide(&self, instance: &Instance, threshold: Threshold) -> Result<Decision, ModelError> {
        let probability = self.predict_proba(instance)?;
        Ok(Decision {
            verdict: Verdict::of(probability, threshold),
            probability,
            threshold,
        })
    }

    pub(crate) fn proba_encoded(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.leaf_fraction(x)).sum();
        sum / self.trees.len() as f64
    }

    /// Same verdict as `decide` on already-validated values, stopping as soon
    /// as the remaining trees cannot move the mean across the threshold.
    pub(crate) fn verdict_values(&self, values: &[Value], threshold: Threshold, buf: &mut Vec<f64>) -> Verdict {
        self.schema.encode_values_into(values, buf);
        let n = self.trees.len() as f64;
        let target = threshold.0;
        let mut sum = 0.0;
        for (i, t) in self.trees.iter().enumerate() {
            sum += t.leaf_fraction(buf);
            if sum / n >= target {
                return Verdict::Accept;
            }
            let remaining = (self.trees.len() - i - 1) as f64;
            if (sum + remaining) / n < target - 1e-9 {
                return Verdict::Reject;
            }
        }
        Verdict::of(sum / n, threshold)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            schema: self.schema.name.clone(),
            schema_fingerprint: format!("{:016x}", self.schema.fingerprint()),
            encoded_width: self.schema.encoded_width(),
            seed: self.seed,
            params: self.params.clone(),
            trees: self.trees.clone(),
        };
        let mut text = serde_json::to_string(&file).expect("model serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str, schema: Arc<Schema>) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(ModelError::Format(format!(
                "expected {MODEL_FORMAT} v{MODEL_VERSION}, found {} v{}",
                file.format, file.version
            )));
        }
        let fp = format!("{:016x}", schema.fingerprint());
        if file.schema_fingerprint != fp || file.encoded_width != schema.encoded_width() {
            return Err(ModelError::SchemaMismatch(format!(
                "model was trained on schema {} ({}), not {} ({fp})",
                file.schema, file.schema_fingerprint, schema.name
            )));
        }
        let trees = file
            .trees
            .into_iter()
            .map(|t| Tree::from_nodes(t.nodes).map_err(ModelError::Format))
            .collect::<Result<Vec<_>, _>>()?;
        if trees.is_empty() {
            return Err(ModelError::Format("no trees".into()));
        }
        if trees.iter().filter_map(Tree::max_column).any(|c| c >= file.encoded_width) {
            return Err(ModelError::Format("split column beyond encoded width".into()));
        }
        Ok(Self {
            schema,
            params: file.params,
            seed: file.seed,
            trees,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        write_atomic(path, self.to_json().as_bytes()).map_err(|source| {
            ModelError::Data(DataError::Io {
                path: path.to_path_buf(),
                source,
            })
        })
    }

    pub fn load(path: &Path, schema: Arc<Schema>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| {
            ModelError::Data(DataError::Io {
                path: path.to_path_buf(),
                source,
            })
        })?;
        Self::from_json(&text, schema)
    }
}

fn schema_mismatch(e: DataError) -> ModelError {
    ModelError::SchemaMismatch(e.to_string())
}
