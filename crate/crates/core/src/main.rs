use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use explat::market::{estimate_market, MarketDomain, MarketParams, StrategyKind};
use explat::pipeline;
use explat::report::{self, format_money};
use explat::scenario::Scenario;

/// Explanation-platform simulator: trains a decision model, generates
/// counterfactual explanations, prices them as ad inventory and runs an
/// explanation ad exchange.
///
/// Exit codes: 0 success, 1 usage error, 2 data or pipeline error.
#[derive(Parser)]
#[command(name = "explat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train (or load the builtin) model, write model.json and metrics.json, print test AUC.
    Train(ScenarioArgs),
    /// Run explanation strategies and write summary, per-applicant records and histograms.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// `all`, a strategy name (baseline, feature-picking, spam-explanations,
        /// inflated-rejection, spam-plus-inflated) or s1..s5. Defaults to the
        /// scenario's strategy list.
        #[arg(long, value_parser = parse_strategies)]
        strategy: Option<StrategySelection>,
        /// Override the scenario's extrapolation population.
        #[arg(long)]
        population: Option<u64>,
    },
    /// Print closed-form yearly market size for a decision domain.
    Market(MarketArgs),
    /// Sell explanations on the demo ad exchange and write the impression ledger.
    Exchange(ScenarioArgs),
    /// Write counterfactual explanations for the scenario's rows to counterfactuals.csv.
    Explain {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Row id to explain (repeatable); overrides the scenario's [explain] rows.
        #[arg(long = "row")]
        rows: Vec<String>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct MarketArgs {
    /// finance, employment (alias hiring), education or all.
    #[arg(value_parser = parse_domains)]
    domain: DomainSelection,
    /// Rejected applications per year.
    #[arg(long)]
    rejected: Option<f64>,
    /// Accepted applications per year.
    #[arg(long)]
    accepted: Option<f64>,
    /// Click-through rate for rejection explanations (search-like).
    #[arg(long)]
    ctr_search: Option<f64>,
    /// Click-through rate for acceptance explanations (display-like).
    #[arg(long)]
    ctr_display: Option<f64>,
    /// Cost per click for rejection explanations.
    #[arg(long)]
    cpc_search: Option<f64>,
    /// Cost per click for acceptance explanations.
    #[arg(long)]
    cpc_display: Option<f64>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Clone)]
struct StrategySelection(Vec<StrategyKind>);

fn parse_strategies(s: &str) -> Result<StrategySelection, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(StrategySelection(StrategyKind::ALL.to_vec()));
    }
    s.split(',')
        .map(|t| t.trim().parse::<StrategyKind>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()
        .map(StrategySelection)
}

#[derive(Clone)]
struct DomainSelection(Vec<MarketDomain>);

fn parse_domains(s: &str) -> Result<DomainSelection, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(DomainSelection(MarketDomain::ALL.to_vec()));
    }
    s.parse::<MarketDomain>().map(|d| DomainSelection(vec![d])).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => train(&load(&args)?),
        Command::Simulate {
            scenario,
            strategy,
            population,
        } => {
            let mut sc = load(&scenario)?;
            if let Some(p) = population {
                anyhow::ensure!(p > 0, "population must be positive");
                sc.population = p;
            }
            let kinds = strategy.map_or_else(|| sc.strategies.clone(), |s| s.0);
            simulate(&sc, &kinds)
        }
        Command::Market(args) => market(&args),
        Command::Exchange(args) => exchange(&load(&args)?),
        Command::Explain { scenario, rows } => {
            let mut sc = load(&scenario)?;
            if !rows.is_empty() {
                sc.explain.rows = Some(rows);
            }
            explain(&sc)
        }
    }
}

fn load(args: &ScenarioArgs) -> Result<Scenario> {
    let mut sc = Scenario::load(&args.scenario)?;
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    if let Some(dir) = &args.output_dir {
        sc.output_dir = dir.clone();
    }
    Ok(sc)
}

fn wrote(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn train(sc: &Scenario) -> Result<()> {
    let start = Instant::now();
    let prepared = pipeline::prepare(sc)?;
    let outcome = pipeline::train(sc, &prepared)?;
    if let Some(t) = &outcome.tuning {
        let p = &t.best;
        let depth = p.max_depth.map_or("none".to_string(), |d| d.to_string());
        println!(
            "cross-validated grid ({} configs): n_trees={} max_depth={depth} min_leaf={}",
            t.scores.len(),
            p.n_trees,
            p.min_leaf
        );
    }
    println!(
        "AUC {:.4} on {} test rows ({} training rows, {:.1}s)",
        outcome.auc,
        outcome.eval_size,
        outcome.train_size,
        start.elapsed().as_secs_f64()
    );
    wrote(&report::write_train(&sc.output_dir, &outcome)?);
    Ok(())
}

fn simulate(sc: &Scenario, kinds: &[StrategyKind]) -> Result<()> {
    let prepared = pipeline::prepare(sc)?;
    let model = pipeline::load_model(sc, &prepared)?;
    let sim = pipeline::simulate(sc, &prepared, &model, kinds)?;
    println!(
        "{:<40} {:>12} {:>12} {:>12} {:>10}",
        "Strategy", "Accepted", "Rejected", "Total", "Increase"
    );
    for run in &sim.runs {
        let r = &run.report;
        let increase = run.percent_increase.map_or("-".to_string(), |p| format!("{p:+.0}%"));
        println!(
            "{:<40} {:>12} {:>12} {:>12} {:>10}",
            format!("{}: {}", r.strategy.number(), r.strategy.title()),
            format_money(r.extrapolated_accepted),
            format_money(r.extrapolated_rejected),
            format_money(r.extrapolated_total),
            increase
        );
    }
    let missing: usize = sim.runs.iter().map(|r| r.report.not_found).max().unwrap_or(0);
    if missing > 0 {
        println!("(applicants without a counterfactual contribute $0; up to {missing} per strategy)");
    }
    wrote(&report::write_simulation(&sc.output_dir, &prepared.schema, &sim)?);
    Ok(())
}

fn market(args: &MarketArgs) -> Result<()> {
    let mut estimates = Vec::new();
    for domain in args.domain.0.iter().copied() {
        let b = MarketParams::builtin(domain);
        let params = MarketParams {
            rejected: args.rejected.unwrap_or(b.rejected),
            accepted: args.accepted.unwrap_or(b.accepted),
            ctr_search: args.ctr_search.unwrap_or(b.ctr_search),
            ctr_display: args.ctr_display.unwrap_or(b.ctr_display),
            cpc_search: args.cpc_search.unwrap_or(b.cpc_search),
            cpc_display: args.cpc_display.unwrap_or(b.cpc_display),
            ..b
        };
        estimates.push(estimate_market(&params)?);
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&estimates)?);
        return Ok(());
    }
    for e in &estimates {
        println!(
            "{:<11} rejected {:>14.2} ({})  accepted {:>12.2} ({})  total {:>14.2} ({})",
            e.params.domain.to_string(),
            e.rejected_revenue,
            format_money(e.rejected_revenue),
            e.accepted_revenue,
            format_money(e.accepted_revenue),
            e.total_revenue,
            format_money(e.total_revenue)
        );
    }
    Ok(())
}

fn exchange(sc: &Scenario) -> Result<()> {
    let prepared = pipeline::prepare(sc)?;
    let model = pipeline::load_model(sc, &prepared)?;
    let outcome = pipeline::exchange(sc, &prepared, &model)?;
    let summary = report::exchange_summary(&outcome);
    println!(
        "{} impressions from {} explanations, {} sold, {} clicks",
        summary.impressions, summary.strategy, summary.sold, summary.clicks
    );
    for (id, t) in &summary.advertisers {
        println!(
            "  {id:<20} won {:>4}  clicks {:>3}  spend {:>9.2}",
            t.impressions, t.clicks, t.spend
        );
    }
    println!(
        "revenue {:.2}: provider {:.2} ({:.0}%), platform {:.2}",
        summary.total_revenue,
        summary.provider_revenue,
        summary.revenue_share * 100.0,
        summary.platform_revenue
    );
    let slow = outcome.run.records.iter().filter(|r| !r.within_latency_budget).count();
    if slow > 0 {
        eprintln!("note: {slow} auctions exceeded the 100 ms latency budget");
    }
    wrote(&report::write_exchange(&sc.output_dir, &outcome)?);
    Ok(())
}

fn explain(sc: &Scenario) -> Result<()> {
    let prepared = pipeline::prepare(sc)?;
    let model = pipeline::load_model(sc, &prepared)?;
    let explained = pipeline::explain(sc, &prepared, &model)?;
    let rows = report::counterfactual_rows(&prepared.schema, &explained);
    if explained.len() <= 10 {
        for e in &explained {
            println!("row {}: {} (p = {:.3})", e.id, e.decision.verdict, e.decision.probability);
            for r in rows.iter().filter(|r| r.id == e.id && r.rank > 0) {
                println!("  {}. {}  (distance {:.3})", r.rank, r.changes, r.distance.unwrap_or(0.0));
            }
        }
    } else {
        let found = explained.iter().filter(|e| !e.counterfactuals.is_empty()).count();
        println!("explained {} rows, {found} with at least one counterfactual", explained.len());
    }
    wrote(&report::write_explanations(&sc.output_dir, &prepared.schema, &explained)?);
    Ok(())
}
