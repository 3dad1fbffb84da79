use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::counterfactual::{find_counterfactuals, inject_spam, Counterfactual, ProposalGrid, SearchConfig};
use crate::error::{CounterfactualError, MarketError};
use crate::forest::{Forest, Threshold, Verdict};
use crate::tabular::{Dataset, Instance, Schema, Tier, Value};

use super::{explanation_tier, extrapolate, RateTable, Valence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Baseline,
    FeaturePicking,
    SpamExplanations,
    InflatedRejection,
    SpamPlusInflated,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Baseline,
        StrategyKind::FeaturePicking,
        StrategyKind::SpamExplanations,
        StrategyKind::InflatedRejection,
        StrategyKind::SpamPlusInflated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Baseline => "baseline",
            StrategyKind::FeaturePicking => "feature-picking",
            StrategyKind::SpamExplanations => "spam-explanations",
            StrategyKind::InflatedRejection => "inflated-rejection",
            StrategyKind::SpamPlusInflated => "spam-plus-inflated",
        }
    }

    pub fn number(self) -> usize {
        Self::ALL.iter().position(|k| *k == self).unwrap() + 1
    }

    pub fn title(self) -> &'static str {
        match self {
            StrategyKind::Baseline => "Baseline",
            StrategyKind::FeaturePicking => "Feature picking",
            StrategyKind::SpamExplanations => "Spam explanations",
            StrategyKind::InflatedRejection => "Inflated rejection",
            StrategyKind::SpamPlusInflated => "Spam explanations + inflated rejection",
        }
    }

    pub fn spams(self) -> bool {
        matches!(self, StrategyKind::SpamExplanations | StrategyKind::SpamPlusInflated)
    }

    /// Kinds that search valuable features first. Spam kinds pad the
    /// feature-picked explanation, so padding never lowers its value.
    pub fn picks_features(self) -> bool {
        matches!(
            self,
            StrategyKind::FeaturePicking | StrategyKind::SpamExplanations | StrategyKind::SpamPlusInflated
        )
    }

    pub fn inflates(self) -> bool {
        matches!(self, StrategyKind::InflatedRejection | StrategyKind::SpamPlusInflated)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s || format!("s{}", k.number()) == s)
            .ok_or(MarketError::UnknownStrategy(s))
    }
}

/// One explanation-selection strategy, fully parameterized.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub threshold: Threshold,
    /// Features searched first.
    pub preferred: Option<BTreeSet<String>>,
    /// Feature padded into every explanation (spam kinds).
    pub spam_feature: Option<String>,
}

impl StrategySpec {
    /// Defaults: threshold 0.5, or 0.8 for inflated kinds; feature-picking
    /// kinds prefer the schema's valuable features; spam kinds add `Telephone`.
    pub fn standard(kind: StrategyKind, schema: &Schema) -> Result<Self, MarketError> {
        Self::configured(kind, schema, 0.5, 0.8, "Telephone")
    }

    pub fn configured(
        kind: StrategyKind,
        schema: &Schema,
        threshold: f64,
        inflated_threshold: f64,
        spam_feature: &str,
    ) -> Result<Self, MarketError> {
        let t = if kind.inflates() { inflated_threshold } else { threshold };
        let threshold = Threshold::new(t).map_err(|e| MarketError::Strategy(e.to_string()))?;
        let preferred = kind.picks_features().then(|| schema.valuable_features());
        let spam_feature = kind.spams().then(|| spam_feature.to_string());
        let spec = Self {
            kind,
            threshold,
            preferred,
            spam_feature,
        };
        spec.validate(schema)?;
        Ok(spec)
    }

    pub fn validate(&self, schema: &Schema) -> Result<(), MarketError> {
        match (&self.preferred, self.kind.picks_features()) {
            (Some(p), true) if !p.is_empty() => {}
            (None, false) => {}
            _ => {
                return Err(MarketError::Strategy(format!(
                    "{}: a non-empty preferred set is required exactly for feature-picking kinds",
                    self.kind
                )))
            }
        }
        match (&self.spam_feature, self.kind.spams()) {
            (Some(f), true) => {
                let feature = schema.feature(f).ok_or_else(|| MarketError::UnknownFeature(f.clone()))?;
                if !feature.mutable {
                    return Err(MarketError::Strategy(format!("spam feature `{f}` is immutable")));
                }
            }
            (None, false) => {}
            _ => {
                return Err(MarketError::Strategy(format!(
                    "{}: a spam feature is required exactly for spam strategies",
                    self.kind
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpamOutcome {
    NotApplied,
    Added,
    AlreadyPresent,
    /// Every padding value un-flipped the decision; the original explanation was kept.
    Failed,
}

/// Outcome for one test applicant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicantRecord {
    pub id: String,
    pub probability: f64,
    pub verdict: Verdict,
    pub valence: Valence,
    /// Changed features of the chosen explanation, sorted; empty when none was found.
    pub features: Vec<String>,
    /// `Feature=value` pairs joined by `;`.
    pub changes: String,
    pub distance: Option<f64>,
    pub irreducible: Option<bool>,
    pub tier: Option<Tier>,
    pub expected_revenue: f64,
    pub spam: SpamOutcome,
}

impl ApplicantRecord {
    pub fn found(&self) -> bool {
        !self.features.is_empty()
    }
}

/// Feature occurrence counts across chosen explanations, per valence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureHistogram {
    pub negative: BTreeMap<String, usize>,
    pub positive: BTreeMap<String, usize>,
}

impl FeatureHistogram {
    pub fn for_valence(&self, valence: Valence) -> &BTreeMap<String, usize> {
        match valence {
            Valence::Negative => &self.negative,
            Valence::Positive => &self.positive,
        }
    }

    /// Occurrences of `feature` across both valences.
    pub fn count(&self, feature: &str) -> usize {
        self.negative.get(feature).copied().unwrap_or(0) + self.positive.get(feature).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.negative.values().sum::<usize>() + self.positive.values().sum::<usize>()
    }
}

pub fn feature_frequency(records: &[ApplicantRecord]) -> FeatureHistogram {
    let mut h = FeatureHistogram::default();
    for r in records {
        let bucket = match r.valence {
            Valence::Negative => &mut h.negative,
            Valence::Positive => &mut h.positive,
        };
        for f in &r.features {
            *bucket.entry(f.clone()).or_default() += 1;
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueReport {
    pub strategy: StrategyKind,
    pub threshold: f64,
    pub test_size: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub not_found: usize,
    pub spam_failures: usize,
    pub test_accepted_revenue: f64,
    pub test_rejected_revenue: f64,
    pub test_total_revenue: f64,
    pub population: u64,
    pub extrapolated_accepted: f64,
    pub extrapolated_rejected: f64,
    pub extrapolated_total: f64,
    pub histogram: FeatureHistogram,
    pub records: Vec<ApplicantRecord>,
}

impl RevenueReport {
    /// Percent change of the extrapolated total relative to `baseline`.
    pub fn percent_increase_over(&self, baseline: &RevenueReport) -> f64 {
        (self.extrapolated_total / baseline.extrapolated_total - 1.0) * 100.0
    }

    /// Report-level identities; violated only by a bug or a hand-edited file.
    pub fn check(&self) -> Result<(), String> {
        if self.accepted + self.rejected != self.test_size || self.records.len() != self.test_size {
            return Err("accepted + rejected must equal test size".into());
        }
        let expect = extrapolate(self.test_total_revenue, self.test_size, self.population).map_err(|e| e.to_string())?;
        if expect != self.extrapolated_total {
            return Err(format!("extrapolated total {} != {expect}", self.extrapolated_total));
        }
        let sum: f64 = self.records.iter().map(|r| r.expected_revenue).sum();
        if (sum - self.test_total_revenue).abs() > 1e-9 * sum.abs().max(1.0) {
            return Err("record revenues do not sum to the test total".into());
        }
        if self.not_found != self.records.iter().filter(|r| !r.found()).count() {
            return Err("not-found count disagrees with records".into());
        }
        Ok(())
    }
}

/// Runs one strategy over every test applicant: decide at the strategy
/// threshold, search counterfactuals (valuable features first for
/// feature-picking kinds), pick the rank-1 explanation, optionally pad it with the
/// spam feature, and price it by its most expensive feature. Applicants
/// without a counterfactual contribute 0.
pub fn run_strategy(
    model: &Forest,
    grid: &ProposalGrid,
    test: &Dataset,
    spec: &StrategySpec,
    search: &SearchConfig,
    rates: &RateTable,
    population: u64,
) -> Result<RevenueReport, MarketError> {
    let schema = model.schema();
    spec.validate(schema)?;
    if test.is_empty() {
        return Err(MarketError::ZeroTestSize);
    }
    let config = SearchConfig {
        preferred: spec.preferred.clone(),
        ..search.clone()
    };

    let mut records = Vec::with_capacity(test.len());
    for row in &test.rows {
        records.push(evaluate_applicant(model, grid, row, spec, &config, rates)?);
    }

    let mut accepted_revenue = 0.0;
    let mut rejected_revenue = 0.0;
    for r in &records {
        match r.valence {
            Valence::Positive => accepted_revenue += r.expected_revenue,
            Valence::Negative => rejected_revenue += r.expected_revenue,
        }
    }
    let total = records.iter().map(|r| r.expected_revenue).sum::<f64>();
    let accepted = records.iter().filter(|r| r.valence == Valence::Positive).count();
    let report = RevenueReport {
        strategy: spec.kind,
        threshold: spec.threshold.value(),
        test_size: records.len(),
        accepted,
        rejected: records.len() - accepted,
        not_found: records.iter().filter(|r| !r.found()).count(),
        spam_failures: records.iter().filter(|r| r.spam == SpamOutcome::Failed).count(),
        test_accepted_revenue: accepted_revenue,
        test_rejected_revenue: rejected_revenue,
        test_total_revenue: total,
        population,
        extrapolated_accepted: extrapolate(accepted_revenue, records.len(), population)?,
        extrapolated_rejected: extrapolate(rejected_revenue, records.len(), population)?,
        extrapolated_total: extrapolate(total, records.len(), population)?,
        histogram: feature_frequency(&records),
        records,
    };
    debug_assert_eq!(report.check(), Ok(()));
    Ok(report)
}

fn evaluate_applicant(
    model: &Forest,
    grid: &ProposalGrid,
    row: &Instance,
    spec: &StrategySpec,
    config: &SearchConfig,
    rates: &RateTable,
) -> Result<ApplicantRecord, MarketError> {
    let schema = model.schema();
    let search_err = |e: CounterfactualError| MarketError::Search {
        id: row.id.clone(),
        message: e.to_string(),
    };
    let decision = model.decide(row, spec.threshold).map_err(|e| MarketError::Search {
        id: row.id.clone(),
        message: e.to_string(),
    })?;
    let valence = Valence::of(decision.verdict);
    let found = find_counterfactuals(model, grid, row, spec.threshold, config).map_err(search_err)?;

    let mut spam = SpamOutcome::NotApplied;
    let chosen = match (found.into_iter().next(), &spec.spam_feature) {
        (Some(cf), Some(feature)) => {
            let (cf, outcome) = pad_explanation(cf, feature, model, row, spec.threshold).map_err(search_err)?;
            spam = outcome;
            Some(cf)
        }
        (cf, _) => cf,
    };

    let (tier, revenue) = match &chosen {
        Some(cf) => {
            let tier = explanation_tier(cf.changes.keys(), schema)?;
            (Some(tier), rates.impression_value(valence, tier))
        }
        None => (None, 0.0),
    };
    Ok(ApplicantRecord {
        id: row.id.clone(),
        probability: decision.probability,
        verdict: decision.verdict,
        valence,
        features: chosen.as_ref().map(|c| c.changes.keys().cloned().collect()).unwrap_or_default(),
        changes: chosen.as_ref().map(|c| render_changes(schema, c)).unwrap_or_default(),
        distance: chosen.as_ref().map(|c| c.distance),
        irreducible: chosen.as_ref().map(|c| c.irreducible),
        tier,
        expected_revenue: revenue,
        spam,
    })
}

/// Tries each alternative value of `feature` in domain order; keeps the
/// original explanation when every padding un-flips the decision.
fn pad_explanation(
    cf: Counterfactual,
    feature: &str,
    model: &Forest,
    row: &Instance,
    threshold: Threshold,
) -> Result<(Counterfactual, SpamOutcome), CounterfactualError> {
    if cf.changes.contains_key(feature) {
        return Ok((cf, SpamOutcome::AlreadyPresent));
    }
    let schema = model.schema();
    let j = schema
        .index_of(feature)
        .ok_or_else(|| CounterfactualError::UnknownFeature(feature.to_string()))?;
    let candidates: Vec<Value> = match schema.features[j].categories() {
        Some(c) => (0..c.len()).map(Value::Category).collect(),
        None => return Err(CounterfactualError::InvalidConfig(format!("spam feature `{feature}` must be categorical"))),
    };
    for value in candidates.into_iter().filter(|v| *v != row.values[j]) {
        match inject_spam(&cf, feature, value, model, row, threshold) {
            Ok(padded) => return Ok((padded, SpamOutcome::Added)),
            Err(CounterfactualError::SpamUnflips(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok((cf, SpamOutcome::Failed))
}

/// `Feature=value` pairs joined by `;`.
pub fn render_changes(schema: &Schema, cf: &Counterfactual) -> String {
    cf.changes
        .iter()
        .map(|(name, v)| {
            let f = schema.feature(name).expect("counterfactual features come from the schema");
            format!("{name}={}", f.format_value(v))
        })
        .collect::<Vec<_>>()
        .join(";")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(valence: Valence, features: &[&str]) -> ApplicantRecord {
        ApplicantRecord {
            id: "r".into(),
            probability: 0.5,
            verdict: Verdict::Accept,
            valence,
            features: features.iter().map(|s| s.to_string()).collect(),
            changes: String::new(),
            distance: None,
            irreducible: None,
            tier: None,
            expected_revenue: 0.0,
            spam: SpamOutcome::NotApplied,
        }
    }

    #[test]
    fn histogram_counts_occurrences() {
        let h = feature_frequency(&[rec(Valence::Negative, &["A"]), rec(Valence::Negative, &["A", "B"])]);
        assert_eq!(h.negative.get("A"), Some(&2));
        assert_eq!(h.negative.get("B"), Some(&1));
        assert!(h.positive.is_empty());
        assert_eq!(h.total(), 3);
    }

    #[test]
    fn empty_histogram() {
        assert_eq!(feature_frequency(&[]), FeatureHistogram::default());
    }

    #[test]
    fn strategy_names_parse() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
            assert_eq!(format!("s{}", k.number()).parse::<StrategyKind>().unwrap(), k);
        }
        assert!("s6".parse::<StrategyKind>().is_err());
    }
}
