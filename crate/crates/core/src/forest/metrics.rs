use crate::error::{DataError, ModelError};
use crate::tabular::Dataset;

use super::Forest;

/// Rank-based (Mann-Whitney) AUC of the forest's scores on `test`.
pub fn auc(model: &Forest, test: &Dataset) -> Result<f64, ModelError> {
    let scores = test
        .rows
        .iter()
        .map(|r| model.predict_proba(r))
        .collect::<Result<Vec<_>, _>>()?;
    auc_scores(&scores, &test.labels).ok_or(ModelError::Data(DataError::SingleClass))
}

/// Mann-Whitney AUC with tied scores contributing one half. `None` when
/// either class is absent.
pub fn auc_scores(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "one label per score");
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of (1-based, tie-averaged) ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg_rank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Pairwise definition: P(score+ > score-) + 0.5 P(tie).
    fn pairwise(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn perfect_ranking_is_one() {
        assert_eq!(auc_scores(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]), Some(1.0));
    }

    #[test]
    fn all_ties_is_half() {
        assert_eq!(auc_scores(&[0.3; 6], &[true, false, true, false, true, false]), Some(0.5));
    }

    #[test]
    fn single_class_is_none() {
        assert_eq!(auc_scores(&[0.1, 0.2], &[true, true]), None);
    }

    #[test]
    fn matches_pairwise_oracle_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(2..40);
            let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..6) as f64) / 5.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            labels[0] = true;
            labels[1] = false;
            let got = auc_scores(&scores, &labels).unwrap();
            assert!((got - pairwise(&scores, &labels)).abs() < 1e-12);
        }
    }

    #[test]
    fn random_scores_are_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scores: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<bool> = (0..10_000).map(|i| i % 2 == 0).collect();
        let a = auc_scores(&scores, &labels).unwrap();
        assert!((a - 0.5).abs() <= 0.02, "auc {a}");
    }
}
