use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::MarketError;
use crate::util::substream;

use super::strategy::ApplicantRecord;
use super::RateTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub trials: usize,
    pub mean: f64,
    /// Standard error of the mean across trials.
    pub stderr: f64,
}

/// Simulates clicks on each priced explanation: one Bernoulli(ctr) draw per
/// record per trial, paying the record's CPC on a click. The mean converges
/// to the sum of expected revenues.
pub fn monte_carlo_revenue(
    records: &[ApplicantRecord],
    rates: &RateTable,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate, MarketError> {
    if trials == 0 {
        return Err(MarketError::Rates("monte carlo needs at least one trial".into()));
    }
    let priced: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.tier.map(|t| (rates.ctr(r.valence), rates.cpc(r.valence, t))))
        .collect();
    if priced.iter().any(|(ctr, _)| !(0.0..=1.0).contains(ctr)) {
        return Err(MarketError::Rates("click-through rates must lie in [0, 1]".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, 0x6d63));
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let revenue: f64 = priced
            .iter()
            .filter(|(ctr, _)| rng.gen_bool(*ctr))
            .map(|(_, cpc)| cpc)
            .sum();
        sum += revenue;
        sum_sq += revenue * revenue;
    }
    let n = trials as f64;
    let mean = sum / n;
    let stderr = if trials > 1 {
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloEstimate { trials, mean, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::Verdict;
    use crate::market::{SpamOutcome, Valence};
    use crate::tabular::Tier;

    fn rec(valence: Valence, tier: Option<Tier>) -> ApplicantRecord {
        ApplicantRecord {
            id: "a".into(),
            probability: 0.2,
            verdict: Verdict::Reject,
            valence,
            features: tier.map(|_| vec!["F".to_string()]).unwrap_or_default(),
            changes: String::new(),
            distance: None,
            irreducible: None,
            tier,
            expected_revenue: 0.0,
            spam: SpamOutcome::NotApplied,
        }
    }

    #[test]
    fn certain_clicks_are_exact() {
        let rates = RateTable { ctr_negative: 1.0, ctr_positive: 0.0, ..RateTable::default() };
        let records = [
            rec(Valence::Negative, Some(Tier::Standard)),
            rec(Valence::Negative, Some(Tier::Valuable)),
            rec(Valence::Positive, Some(Tier::Valuable)),
            rec(Valence::Negative, None),
        ];
        let e = monte_carlo_revenue(&records, &rates, 50, 1).unwrap();
        assert!((e.mean - (3.44 + 34.40)).abs() < 1e-9);
        assert!(e.stderr < 1e-6);
    }

    #[test]
    fn mean_tracks_expectation() {
        let rates = RateTable::default();
        let records: Vec<_> = (0..200).map(|_| rec(Valence::Negative, Some(Tier::Standard))).collect();
        let expected = 200.0 * rates.impression_value(Valence::Negative, Tier::Standard);
        let e = monte_carlo_revenue(&records, &rates, 4000, 9).unwrap();
        assert!((e.mean - expected).abs() < 4.0 * e.stderr.max(1e-9), "{e:?} vs {expected}");
    }

    #[test]
    fn deterministic_and_rejects_zero_trials() {
        let rates = RateTable::default();
        let records = [rec(Valence::Negative, Some(Tier::Valuable))];
        assert_eq!(
            monte_carlo_revenue(&records, &rates, 100, 3).unwrap(),
            monte_carlo_revenue(&records, &rates, 100, 3).unwrap()
        );
        assert!(monte_carlo_revenue(&records, &rates, 0, 3).is_err());
    }
}
