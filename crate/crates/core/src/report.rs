//! Report artifacts: fixed file names under the scenario output directory,
//! written atomically, and loaders that read them back.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{DataError, PipelineError};
use crate::exchange::RevenueEvent;
use crate::forest::ForestParams;
use crate::market::{StrategyKind, Valence};
use crate::pipeline::{Explained, ExchangeOutcome, Simulation, TrainOutcome, MODEL_FILE};
use crate::tabular::Schema;
use crate::util::write_atomic;

pub const METRICS_FILE: &str = "metrics.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const COUNTERFACTUALS_FILE: &str = "counterfactuals.csv";
pub const LEDGER_FILE: &str = "ledger.csv";
pub const IMPRESSIONS_FILE: &str = "impressions.csv";
pub const EXCHANGE_SUMMARY_FILE: &str = "exchange_summary.json";

pub fn records_file(kind: StrategyKind) -> String {
    format!("records_{}.csv", kind.name())
}

pub fn histogram_file(kind: StrategyKind, valence: Valence) -> String {
    format!("histogram_{}_{valence}.tsv", kind.name())
}

fn write(path: &Path, bytes: &[u8]) -> Result<PathBuf, PipelineError> {
    write_atomic(path, bytes).map_err(|source| PipelineError::Output {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, PipelineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| PipelineError::Precondition(e.to_string()))?;
    }
    w.into_inner().map_err(|e| PipelineError::Precondition(e.to_string()))
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s.into_bytes()
}

fn read_text(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a CSV file written by this module.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DataError> {
    let text = read_text(path)?;
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| DataError::Conformance(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub params: Option<ForestParams>,
    /// Mean cross-validated AUC per grid entry, when tuned.
    pub cv_scores: Option<Vec<(ForestParams, f64)>>,
}

pub fn write_train(dir: &Path, outcome: &TrainOutcome) -> Result<Vec<PathBuf>, PipelineError> {
    let trained = outcome.tuning.is_some() || outcome.train_size > 0;
    let metrics = Metrics {
        auc: outcome.auc,
        train_size: outcome.train_size,
        test_size: outcome.eval_size,
        params: trained.then(|| outcome.model.params().clone()),
        cv_scores: outcome.tuning.as_ref().map(|t| t.scores.clone()),
    };
    Ok(vec![
        write(&dir.join(MODEL_FILE), outcome.model.to_json().as_bytes())?,
        write(&dir.join(METRICS_FILE), &json_bytes(&metrics))?,
    ])
}

/// One row of `summary.csv`; revenues in currency units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub number: usize,
    pub strategy: String,
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
    pub percent_increase: Option<f64>,
    pub mc_trials: usize,
    pub mc_mean: f64,
    pub mc_stderr: f64,
}

pub fn summary_rows(sim: &Simulation) -> Vec<SummaryRow> {
    sim.runs
        .iter()
        .map(|run| {
            let r = &run.report;
            SummaryRow {
                number: r.strategy.number(),
                strategy: r.strategy.name().to_string(),
                threshold: r.threshold,
                test_size: r.test_size,
                accepted: r.accepted,
                rejected: r.rejected,
                not_found: r.not_found,
                spam_failures: r.spam_failures,
                test_accepted_revenue: r.test_accepted_revenue,
                test_rejected_revenue: r.test_rejected_revenue,
                test_total_revenue: r.test_total_revenue,
                population: r.population,
                extrapolated_accepted: r.extrapolated_accepted,
                extrapolated_rejected: r.extrapolated_rejected,
                extrapolated_total: r.extrapolated_total,
                percent_increase: run.percent_increase,
                mc_trials: run.monte_carlo.trials,
                mc_mean: run.monte_carlo.mean,
                mc_stderr: run.monte_carlo.stderr,
            }
        })
        .collect()
}

/// One row of `records_<strategy>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub id: String,
    pub probability: f64,
    pub verdict: String,
    pub valence: String,
    /// Changed features joined by `;`.
    pub features: String,
    pub changes: String,
    pub distance: Option<f64>,
    pub irreducible: Option<bool>,
    pub tier: Option<String>,
    pub expected_revenue: f64,
    pub spam: String,
}

fn token<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value).expect("enums serialize") {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    }
}

pub fn write_simulation(dir: &Path, schema: &Schema, sim: &Simulation) -> Result<Vec<PathBuf>, PipelineError> {
    let rows = summary_rows(sim);
    let mut out = vec![
        write(&dir.join(SUMMARY_CSV), &csv_bytes(&rows)?)?,
        write(&dir.join(SUMMARY_JSON), &json_bytes(&rows))?,
    ];
    for run in &sim.runs {
        let r = &run.report;
        let records: Vec<RecordRow> = r
            .records
            .iter()
            .map(|a| RecordRow {
                id: a.id.clone(),
                probability: a.probability,
                verdict: a.verdict.to_string(),
                valence: a.valence.to_string(),
                features: a.features.join(";"),
                changes: a.changes.clone(),
                distance: a.distance,
                irreducible: a.irreducible,
                tier: a.tier.map(|t| t.to_string()),
                expected_revenue: a.expected_revenue,
                spam: token(&a.spam),
            })
            .collect();
        out.push(write(&dir.join(records_file(r.strategy)), &csv_bytes(&records)?)?);
        for valence in [Valence::Negative, Valence::Positive] {
            let text = histogram_tsv(schema, r.histogram.for_valence(valence), r.strategy, valence);
            out.push(write(&dir.join(histogram_file(r.strategy, valence)), text.as_bytes())?);
        }
    }
    Ok(out)
}

/// Plot-ready histogram: `#` comment lines map each index to a feature name,
/// then one `index<TAB>count` row per schema feature.
pub fn histogram_tsv(schema: &Schema, counts: &BTreeMap<String, usize>, kind: StrategyKind, valence: Valence) -> String {
    let mut s = format!("# feature frequency, strategy {} ({}), {valence} decisions\n", kind.number(), kind.name());
    for (i, f) in schema.features.iter().enumerate() {
        s.push_str(&format!("# {i}\t{}\n", f.name));
    }
    for (i, f) in schema.features.iter().enumerate() {
        s.push_str(&format!("{i}\t{}\n", counts.get(&f.name).copied().unwrap_or(0)));
    }
    s
}

/// Reads a histogram file back as (feature name, count) in index order.
pub fn read_histogram(path: &Path) -> Result<Vec<(String, usize)>, DataError> {
    let text = read_text(path)?;
    let bad = |line: &str| DataError::Conformance(format!("{}: malformed histogram line `{line}`", path.display()));
    let mut names = BTreeMap::new();
    let mut out = Vec::new();
    for line in text.lines() {
        if let Some(comment) = line.strip_prefix("# ") {
            if let Some((i, name)) = comment.split_once('\t') {
                if let Ok(i) = i.parse::<usize>() {
                    names.insert(i, name.to_string());
                }
            }
            continue;
        }
        let (i, n) = line.split_once('\t').ok_or_else(|| bad(line))?;
        let i: usize = i.parse().map_err(|_| bad(line))?;
        let n: usize = n.parse().map_err(|_| bad(line))?;
        out.push((names.get(&i).cloned().ok_or_else(|| bad(line))?, n));
    }
    Ok(out)
}

/// One row of `counterfactuals.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualRow {
    pub id: String,
    pub probability: f64,
    pub verdict: String,
    /// 1-based; 0 marks an applicant with no counterfactual.
    pub rank: usize,
    pub target: Option<String>,
    pub features: String,
    pub changes: String,
    pub distance: Option<f64>,
    pub irreducible: Option<bool>,
}

pub fn counterfactual_rows(schema: &Schema, explained: &[Explained]) -> Vec<CounterfactualRow> {
    let mut rows = Vec::new();
    for e in explained {
        let base = |rank, cf: Option<&crate::counterfactual::Counterfactual>| CounterfactualRow {
            id: e.id.clone(),
            probability: e.decision.probability,
            verdict: e.decision.verdict.to_string(),
            rank,
            target: cf.map(|c| c.achieved_verdict.to_string()),
            features: cf.map(|c| c.changes.keys().cloned().collect::<Vec<_>>().join(";")).unwrap_or_default(),
            changes: cf.map(|c| crate::market::render_changes(schema, c)).unwrap_or_default(),
            distance: cf.map(|c| c.distance),
            irreducible: cf.map(|c| c.irreducible),
        };
        if e.counterfactuals.is_empty() {
            rows.push(base(0, None));
        }
        for (i, cf) in e.counterfactuals.iter().enumerate() {
            rows.push(base(i + 1, Some(cf)));
        }
    }
    rows
}

pub fn write_explanations(dir: &Path, schema: &Schema, explained: &[Explained]) -> Result<Vec<PathBuf>, PipelineError> {
    let rows = counterfactual_rows(schema, explained);
    Ok(vec![write(&dir.join(COUNTERFACTUALS_FILE), &csv_bytes(&rows)?)?])
}

/// One row of `ledger.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub impression_id: u64,
    pub winner: String,
    pub price: f64,
    pub matched_keyword: String,
    pub clicked: bool,
}

impl From<&RevenueEvent> for LedgerRow {
    fn from(e: &RevenueEvent) -> Self {
        Self {
            impression_id: e.impression_id,
            winner: e.advertiser.clone(),
            price: e.price,
            matched_keyword: e.matched_keyword.clone(),
            clicked: e.clicked,
        }
    }
}

/// One row of `impressions.csv`, sold or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpressionRow {
    pub impression_id: u64,
    pub bids: usize,
    pub winner: Option<String>,
    pub winning_bid: Option<f64>,
    pub clearing_price: f64,
    pub matched_keyword: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvertiserTotals {
    pub impressions: usize,
    pub clicks: usize,
    pub spend: f64,
    pub remaining_budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeSummary {
    pub strategy: String,
    pub impressions: usize,
    pub sold: usize,
    pub clicks: usize,
    pub total_revenue: f64,
    pub revenue_share: f64,
    pub provider_revenue: f64,
    pub platform_revenue: f64,
    /// Advertisers in registration order are keyed by id.
    pub advertisers: BTreeMap<String, AdvertiserTotals>,
}

pub fn exchange_summary(outcome: &ExchangeOutcome) -> ExchangeSummary {
    let run = &outcome.run;
    let mut advertisers: BTreeMap<String, AdvertiserTotals> = run
        .registry
        .iter()
        .map(|a| {
            (
                a.id.clone(),
                AdvertiserTotals {
                    impressions: 0,
                    clicks: 0,
                    spend: 0.0,
                    remaining_budget: a.budget,
                },
            )
        })
        .collect();
    for e in run.ledger.events() {
        if let Some(t) = advertisers.get_mut(&e.advertiser) {
            t.impressions += 1;
            t.clicks += usize::from(e.clicked);
            t.spend += e.revenue;
        }
    }
    ExchangeSummary {
        strategy: outcome.strategy.name().to_string(),
        impressions: run.records.len(),
        sold: run.sold(),
        clicks: run.ledger.clicks(),
        total_revenue: run.ledger.total_revenue(),
        revenue_share: run.ledger.revenue_share(),
        provider_revenue: run.ledger.provider_revenue(),
        platform_revenue: run.ledger.platform_revenue(),
        advertisers,
    }
}

pub fn write_exchange(dir: &Path, outcome: &ExchangeOutcome) -> Result<Vec<PathBuf>, PipelineError> {
    let run = &outcome.run;
    let ledger: Vec<LedgerRow> = run.ledger.events().iter().map(LedgerRow::from).collect();
    let impressions: Vec<ImpressionRow> = run
        .records
        .iter()
        .map(|r| ImpressionRow {
            impression_id: r.impression_id,
            bids: r.bids.len(),
            winner: r.winner.clone(),
            winning_bid: r.winning_bid,
            clearing_price: r.clearing_price,
            matched_keyword: r.matched_keyword.clone(),
        })
        .collect();
    Ok(vec![
        write(&dir.join(LEDGER_FILE), &csv_bytes(&ledger)?)?,
        write(&dir.join(IMPRESSIONS_FILE), &csv_bytes(&impressions)?)?,
        write(&dir.join(EXCHANGE_SUMMARY_FILE), &json_bytes(&exchange_summary(outcome)))?,
    ])
}

/// `$1.599M`, `$147k`, `$12.34` style amounts for console tables.
pub fn format_money(amount: f64) -> String {
    let a = amount.abs();
    let sign = if amount < 0.0 { "-" } else { "" };
    if a >= 1e6 {
        format!("{sign}${:.3}M", a / 1e6)
    } else if a >= 1e3 {
        format!("{sign}${:.0}k", a / 1e3)
    } else {
        format!("{sign}${a:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::hiring_schema;

    #[test]
    fn money_formatting() {
        assert_eq!(format_money(1_599_875.2), "$1.600M");
        assert_eq!(format_money(147_116.64), "$147k");
        assert_eq!(format_money(0.088064), "$0.09");
    }

    #[test]
    fn histogram_round_trip() {
        let schema = hiring_schema(false);
        let counts: BTreeMap<String, usize> = [("Python".to_string(), 3), ("MBA".to_string(), 1)].into();
        let text = histogram_tsv(&schema, &counts, StrategyKind::FeaturePicking, Valence::Negative);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.tsv");
        std::fs::write(&path, &text).unwrap();
        let back = read_histogram(&path).unwrap();
        assert_eq!(back.len(), 6);
        assert_eq!(back[0], ("MBA".to_string(), 1));
        assert_eq!(back[1], ("Python".to_string(), 3));
        assert_eq!(back[5], ("Gender".to_string(), 0));
    }
}
