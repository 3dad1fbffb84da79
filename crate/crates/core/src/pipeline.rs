//! Scenario-driven pipeline stages shared by the CLI, the C API and tests.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use crate::counterfactual::{find_counterfactuals, Counterfactual, ProposalGrid};
use crate::error::PipelineError;
use crate::exchange::{load_campaigns, requests_from_records, run_exchange, AuctionRules, ExchangeRun};
use crate::fixtures::{hiring_model, hiring_schema, HIRING_MODEL};
use crate::forest::{auc, default_grid, tune_forest, Decision, Forest, ForestParams, Threshold, TuneResult};
use crate::market::{monte_carlo_revenue, run_strategy, MonteCarloEstimate, RevenueReport, StrategyKind, StrategySpec};
use crate::scenario::{ProposalSource, Scenario, Tuning};
use crate::tabular::{load_dataset, split, Dataset, Schema};
use crate::util::substream;

pub const MODEL_FILE: &str = "model.json";

/// Loaded schema, split data and proposal grid for one scenario.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub schema: Arc<Schema>,
    /// `None` for hand-built models, which need no training data.
    pub train: Option<Dataset>,
    /// Test split, or every row for hand-built models.
    pub eval: Dataset,
    pub grid: ProposalGrid,
}

pub fn prepare(sc: &Scenario) -> Result<Prepared, PipelineError> {
    let schema = Arc::new(Schema::load(&sc.data.schema)?);
    let data = load_dataset(&sc.data.dataset, Arc::clone(&schema))?;
    let (train, eval) = if sc.model.builtin.is_some() {
        (None, data)
    } else {
        let (train, test) = split(&data, sc.data.test_fraction, sc.seed)?;
        (Some(train), test)
    };
    let grid = match sc.data.proposals {
        ProposalSource::Quantiles => ProposalGrid::from_dataset(train.as_ref().unwrap_or(&eval), sc.search.grid),
        ProposalSource::Domain => ProposalGrid::from_domain(&schema, sc.search.grid),
    };
    Ok(Prepared {
        schema,
        train,
        eval,
        grid,
    })
}

/// Hand-built model by name. The schema must have the model's layout.
pub fn builtin_model(name: &str, schema: Arc<Schema>) -> Result<Forest, PipelineError> {
    match name {
        HIRING_MODEL => {
            if schema.fingerprint() != hiring_schema(false).fingerprint() {
                return Err(PipelineError::Precondition(format!(
                    "builtin model `{name}` needs the six-feature hiring schema"
                )));
            }
            Ok(hiring_model(schema))
        }
        other => Err(PipelineError::Precondition(format!("unknown builtin model `{other}`"))),
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Forest,
    pub auc: f64,
    pub train_size: usize,
    pub eval_size: usize,
    pub tuning: Option<TuneResult>,
}

pub fn train(sc: &Scenario, p: &Prepared) -> Result<TrainOutcome, PipelineError> {
    let (model, tuning) = match (&sc.model.builtin, &p.train) {
        (Some(name), _) => (builtin_model(name, Arc::clone(&p.schema))?, None),
        (None, Some(train)) => {
            let (params, tuning) = match sc.model.tuning {
                Tuning::Fixed => (sc.model.params(), None),
                Tuning::Grid => {
                    let t = tune_forest(train, &grid_for(sc), sc.model.folds, sc.seed)?;
                    (t.best.clone(), Some(t))
                }
            };
            (Forest::train(train, &params, sc.seed)?, tuning)
        }
        (None, None) => return Err(PipelineError::Precondition("no training data".into())),
    };
    Ok(TrainOutcome {
        auc: auc(&model, &p.eval)?,
        train_size: p.train.as_ref().map_or(0, Dataset::len),
        eval_size: p.eval.len(),
        model,
        tuning,
    })
}

/// The documented grid, keeping the scenario's split-level settings.
fn grid_for(sc: &Scenario) -> Vec<ForestParams> {
    default_grid()
        .into_iter()
        .map(|g| ForestParams {
            features_per_split: sc.model.features_per_split,
            bootstrap: sc.model.bootstrap,
            ..g
        })
        .collect()
}

pub fn model_path(sc: &Scenario) -> PathBuf {
    sc.output_dir.join(MODEL_FILE)
}

/// The builtin model, or the model file written by `train`.
pub fn load_model(sc: &Scenario, p: &Prepared) -> Result<Forest, PipelineError> {
    if let Some(name) = &sc.model.builtin {
        return builtin_model(name, Arc::clone(&p.schema));
    }
    let path = model_path(sc);
    if !path.is_file() {
        return Err(PipelineError::Precondition(format!(
            "model file {} not found; run `explat train` first",
            path.display()
        )));
    }
    Ok(Forest::load(&path, Arc::clone(&p.schema))?)
}

pub fn strategy_spec(sc: &Scenario, kind: StrategyKind, schema: &Schema) -> Result<StrategySpec, PipelineError> {
    let s = &sc.strategy;
    Ok(StrategySpec::configured(
        kind,
        schema,
        s.threshold,
        s.inflated_threshold,
        &s.spam_feature,
    )?)
}

#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub report: RevenueReport,
    pub monte_carlo: MonteCarloEstimate,
    /// Relative to the baseline; `None` for the baseline itself.
    pub percent_increase: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    /// In strategy-number order.
    pub runs: Vec<StrategyRun>,
    pub baseline_total: f64,
}

/// Runs the requested strategies. The baseline is always evaluated, since
/// every percent increase is measured against it.
pub fn simulate(
    sc: &Scenario,
    p: &Prepared,
    model: &Forest,
    kinds: &[StrategyKind],
) -> Result<Simulation, PipelineError> {
    let kinds: BTreeSet<StrategyKind> = kinds.iter().copied().collect();
    let run = |kind| -> Result<RevenueReport, PipelineError> {
        let spec = strategy_spec(sc, kind, &p.schema)?;
        Ok(run_strategy(model, &p.grid, &p.eval, &spec, &sc.search, &sc.rates, sc.population)?)
    };
    let baseline = run(StrategyKind::Baseline)?;
    let baseline_total = baseline.extrapolated_total;

    let mut runs = Vec::new();
    for kind in kinds {
        let report = if kind == StrategyKind::Baseline {
            baseline.clone()
        } else {
            run(kind)?
        };
        let monte_carlo = monte_carlo_revenue(
            &report.records,
            &sc.rates,
            sc.monte_carlo.trials,
            substream(sc.seed, kind.number() as u64),
        )?;
        let percent_increase = (kind != StrategyKind::Baseline).then(|| report.percent_increase_over(&baseline));
        runs.push(StrategyRun {
            report,
            monte_carlo,
            percent_increase,
        });
    }
    Ok(Simulation { runs, baseline_total })
}

#[derive(Debug, Clone)]
pub struct Explained {
    pub id: String,
    pub decision: Decision,
    pub counterfactuals: Vec<Counterfactual>,
}

/// Counterfactuals at the scenario threshold for the configured rows (all
/// evaluation rows by default), in row order.
pub fn explain(sc: &Scenario, p: &Prepared, model: &Forest) -> Result<Vec<Explained>, PipelineError> {
    let threshold = Threshold::new(sc.strategy.threshold)?;
    let rows: Vec<_> = match &sc.explain.rows {
        None => p.eval.rows.iter().collect(),
        Some(ids) => {
            let by_id: BTreeMap<&str, _> = p.eval.rows.iter().map(|r| (r.id.as_str(), r)).collect();
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .copied()
                        .ok_or_else(|| PipelineError::Precondition(format!("row `{id}` is not an evaluation row")))
                })
                .collect::<Result<_, _>>()?
        }
    };
    rows.into_iter()
        .map(|row| {
            Ok(Explained {
                id: row.id.clone(),
                decision: model.decide(row, threshold)?,
                counterfactuals: find_counterfactuals(model, &p.grid, row, threshold, &sc.search)?,
            })
        })
        .collect()
}

/// Feature → themes, for bid requests.
pub fn feature_themes(schema: &Schema) -> BTreeMap<String, BTreeSet<String>> {
    schema
        .features
        .iter()
        .map(|f| (f.name.clone(), f.themes.clone()))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExchangeOutcome {
    pub strategy: StrategyKind,
    pub run: ExchangeRun,
}

/// Sells every explanation of the configured strategy on the exchange.
pub fn exchange(sc: &Scenario, p: &Prepared, model: &Forest) -> Result<ExchangeOutcome, PipelineError> {
    let x = sc
        .exchange
        .as_ref()
        .ok_or_else(|| PipelineError::Precondition("scenario has no [exchange] section".into()))?;
    let registry = load_campaigns(&x.campaigns)?;
    let rules = AuctionRules {
        pricing: x.pricing,
        reserve: x.reserve,
        keyword_reserves: x.keyword_reserves.clone(),
    };
    let spec = strategy_spec(sc, x.strategy, &p.schema)?;
    let report = run_strategy(model, &p.grid, &p.eval, &spec, &sc.search, &sc.rates, sc.population)?;
    let requests = requests_from_records(&report.records, &feature_themes(&p.schema), &x.context, x.granularity)?;
    let run = run_exchange(registry, &rules, requests, &sc.rates, x.revenue_share, sc.seed)?;
    Ok(ExchangeOutcome {
        strategy: x.strategy,
        run,
    })
}
