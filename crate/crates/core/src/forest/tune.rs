use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;
use crate::tabular::Dataset;
use crate::util::substream;

use super::{auc_scores, Forest, ForestParams};

/// The documented search grid: n_trees x max_depth x min_leaf.
pub fn default_grid() -> Vec<ForestParams> {
    let mut grid = Vec::new();
    for n_trees in [100, 300] {
        for max_depth in [Some(4), Some(8), None] {
            for min_leaf in [1, 5] {
                grid.push(ForestParams {
                    n_trees,
                    max_depth,
                    min_leaf,
                    features_per_split: None,
                    bootstrap: true,
                });
            }
        }
    }
    grid
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub best: ForestParams,
    /// Mean validation AUC per grid entry, in grid order.
    pub scores: Vec<(ForestParams, f64)>,
}

/// Assigns each row to one of `k` folds, stratified by label.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    for class in [true, false] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for (pos, &i) in members.iter().enumerate() {
            fold[i] = pos % k;
        }
    }
    fold
}

/// k-fold cross-validated grid search selecting by mean AUC (first entry wins ties).
pub fn tune_forest(train: &Dataset, grid: &[ForestParams], k: usize, seed: u64) -> Result<TuneResult, ModelError> {
    if grid.is_empty() {
        return Err(ModelError::Hyperparams("empty grid".into()));
    }
    if k < 2 {
        return Err(ModelError::Hyperparams("need at least 2 folds".into()));
    }
    if !train.has_both_classes() {
        return Err(ModelError::SingleClass);
    }
    let x = train.encoded();
    let folds = stratified_folds(&train.labels, k, seed);
    let mut scores = Vec::with_capacity(grid.len());
    for params in grid {
        let mut total = 0.0;
        for f in 0..k {
            let (tr, va): (Vec<usize>, Vec<usize>) = (0..x.len()).partition(|&i| folds[i] != f);
            let tx: Vec<Vec<f64>> = tr.iter().map(|&i| x[i].clone()).collect();
            let ty: Vec<bool> = tr.iter().map(|&i| train.labels[i]).collect();
            let model = Forest::train_encoded(
                std::sync::Arc::clone(&train.schema),
                &tx,
                &ty,
                params,
                substream(seed, f as u64),
            )?;
            let vs: Vec<f64> = va.iter().map(|&i| model.proba_encoded(&x[i])).collect();
            let vl: Vec<bool> = va.iter().map(|&i| train.labels[i]).collect();
            total += auc_scores(&vs, &vl).ok_or(ModelError::SingleClass)?;
        }
        scores.push((params.clone(), total / k as f64));
    }
    let best = scores
        .iter()
        .fold(None::<&(ForestParams, f64)>, |acc, s| match acc {
            Some(a) if a.1 >= s.1 => Some(a),
            _ => Some(s),
        })
        .map(|s| s.0.clone())
        .expect("non-empty grid");
    Ok(TuneResult { best, scores })
}
