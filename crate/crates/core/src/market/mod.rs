//! Explanation economics: click-through and cost-per-click rates,
//! per-impression expected revenue, explanation-selection strategies,
//! extrapolation to a population and closed-form market sizing.

mod estimate;
mod monte_carlo;
mod strategy;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use estimate::{estimate_market, MarketDomain, MarketEstimate, MarketParams};
pub use monte_carlo::{monte_carlo_revenue, MonteCarloEstimate};
pub use strategy::{
    feature_frequency, render_changes, run_strategy, ApplicantRecord, FeatureHistogram, RevenueReport, SpamOutcome, StrategyKind,
    StrategySpec,
};

use crate::error::MarketError;
use crate::forest::Verdict;
use crate::tabular::{Schema, Tier};

/// Whether the explained decision was favourable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Valence {
    Negative,
    Positive,
}

impl Valence {
    pub fn of(verdict: Verdict) -> Self {
        match verdict {
            Verdict::Accept => Valence::Positive,
            Verdict::Reject => Valence::Negative,
        }
    }
}

impl fmt::Display for Valence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valence::Negative => f.write_str("negative"),
            Valence::Positive => f.write_str("positive"),
        }
    }
}

/// CTR per valence and CPC per (valence, tier). Negative-decision
/// explanations are priced like search ads, positive ones like display ads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateTable {
    pub ctr_negative: f64,
    pub ctr_positive: f64,
    pub cpc_negative_standard: f64,
    pub cpc_negative_valuable: f64,
    pub cpc_positive_standard: f64,
    pub cpc_positive_valuable: f64,
    #[serde(default = "default_currency")]
    pub currency: String,
}

fn default_currency() -> String {
    "USD".to_string()
}

impl Default for RateTable {
    /// Credit-lending assumptions: search-like 2.56% / $3.44 for rejections,
    /// display-like 0.52% / $0.86 for acceptances, valuable features at ten
    /// times the standard CPC.
    fn default() -> Self {
        Self {
            ctr_negative: 0.0256,
            ctr_positive: 0.0052,
            cpc_negative_standard: 3.44,
            cpc_negative_valuable: 34.40,
            cpc_positive_standard: 0.86,
            cpc_positive_valuable: 8.60,
            currency: default_currency(),
        }
    }
}

impl RateTable {
    pub fn validate(&self) -> Result<(), MarketError> {
        for (name, ctr) in [("ctr_negative", self.ctr_negative), ("ctr_positive", self.ctr_positive)] {
            if !(ctr > 0.0 && ctr < 1.0) {
                return Err(MarketError::Rates(format!("{name} must lie in (0, 1), got {ctr}")));
            }
        }
        for valence in [Valence::Negative, Valence::Positive] {
            let std = self.cpc(valence, Tier::Standard);
            let val = self.cpc(valence, Tier::Valuable);
            if !(std > 0.0 && val > 0.0 && std.is_finite() && val.is_finite()) {
                return Err(MarketError::Rates(format!("{valence} CPCs must be positive")));
            }
            if val < std {
                return Err(MarketError::Rates(format!(
                    "{valence} valuable CPC {val} below standard CPC {std}"
                )));
            }
        }
        Ok(())
    }

    pub fn ctr(&self, valence: Valence) -> f64 {
        match valence {
            Valence::Negative => self.ctr_negative,
            Valence::Positive => self.ctr_positive,
        }
    }

    pub fn cpc(&self, valence: Valence, tier: Tier) -> f64 {
        match (valence, tier) {
            (Valence::Negative, Tier::Standard) => self.cpc_negative_standard,
            (Valence::Negative, Tier::Valuable) => self.cpc_negative_valuable,
            (Valence::Positive, Tier::Standard) => self.cpc_positive_standard,
            (Valence::Positive, Tier::Valuable) => self.cpc_positive_valuable,
        }
    }

    /// Expected revenue of one impression.
    pub fn impression_value(&self, valence: Valence, tier: Tier) -> f64 {
        self.ctr(valence) * self.cpc(valence, tier)
    }
}

/// Tier of the most expensive feature: valuable iff any feature is.
pub fn explanation_tier<'a, I>(features: I, schema: &Schema) -> Result<Tier, MarketError>
where
    I: IntoIterator<Item = &'a String>,
{
    let mut tier = None;
    for name in features {
        let f = schema
            .feature(name)
            .ok_or_else(|| MarketError::UnknownFeature(name.clone()))?;
        tier = Some(tier.map_or(f.tier, |t: Tier| t.max(f.tier)));
    }
    tier.ok_or(MarketError::EmptyExplanation)
}

/// Expected revenue of an explanation: only its most expensive feature is
/// auctioned, so revenue = ctr[valence] * cpc[valence, max tier].
pub fn expected_revenue(
    features: &BTreeSet<String>,
    valence: Valence,
    schema: &Schema,
    rates: &RateTable,
) -> Result<f64, MarketError> {
    let tier = explanation_tier(features, schema)?;
    Ok(rates.impression_value(valence, tier))
}

/// Scales a test-set total to a population: total * population / test_size.
pub fn extrapolate(test_total: f64, test_size: usize, population: u64) -> Result<f64, MarketError> {
    if test_size == 0 {
        return Err(MarketError::ZeroTestSize);
    }
    Ok(test_total * population as f64 / test_size as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Feature, LabelSpec};

    fn schema() -> Schema {
        Schema::new(
            "credit",
            vec![
                Feature::numeric("Duration", 4.0, 72.0),
                Feature::binary("Telephone", ["A191", "A192"]).valuable(),
                Feature::categorical("Housing", &["A151", "A152", "A153"]).valuable(),
            ],
            LabelSpec { column: "y".into(), positive: "1".into(), negative: "2".into() },
        )
        .unwrap()
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn unit_economics() {
        let s = schema();
        let r = RateTable::default();
        let neg_std = expected_revenue(&set(&["Duration"]), Valence::Negative, &s, &r).unwrap();
        assert!((neg_std - 0.0256 * 3.44).abs() < 1e-15);
        let neg_val = expected_revenue(&set(&["Duration", "Telephone"]), Valence::Negative, &s, &r).unwrap();
        assert!((neg_val - 0.880640).abs() < 1e-12);
        let pos_val = expected_revenue(&set(&["Housing"]), Valence::Positive, &s, &r).unwrap();
        assert!((pos_val - 0.044720).abs() < 1e-12);
        let pos_std = expected_revenue(&set(&["Duration"]), Valence::Positive, &s, &r).unwrap();
        assert!((pos_std - 0.0044720).abs() < 1e-12);
    }

    #[test]
    fn empty_and_unknown_features() {
        let s = schema();
        let r = RateTable::default();
        assert_eq!(
            expected_revenue(&BTreeSet::new(), Valence::Negative, &s, &r),
            Err(MarketError::EmptyExplanation)
        );
        assert!(matches!(
            expected_revenue(&set(&["Nope"]), Valence::Negative, &s, &r),
            Err(MarketError::UnknownFeature(_))
        ));
    }

    #[test]
    fn valence_gap_holds_per_tier() {
        let r = RateTable::default();
        for tier in [Tier::Standard, Tier::Valuable] {
            assert!(r.impression_value(Valence::Negative, tier) > r.impression_value(Valence::Positive, tier));
        }
    }

    #[test]
    fn extrapolation_examples() {
        assert_eq!(extrapolate(10.0, 330, 330).unwrap(), 10.0);
        assert_eq!(extrapolate(10.0, 330, 660).unwrap(), 20.0);
        let x = 3.0;
        assert!((extrapolate(x, 330, 75_500_000).unwrap() - x * 228_787.878_787_878_8).abs() < 1e-6);
        assert_eq!(extrapolate(1.0, 0, 10), Err(MarketError::ZeroTestSize));
    }

    #[test]
    fn rate_table_validation() {
        assert!(RateTable::default().validate().is_ok());
        let bad = RateTable { ctr_negative: 1.5, ..RateTable::default() };
        assert!(bad.validate().is_err());
        let inverted = RateTable { cpc_positive_valuable: 0.1, ..RateTable::default() };
        assert!(inverted.validate().is_err());
    }
}
