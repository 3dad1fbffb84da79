//! Acceptance report: one PASS/FAIL line per criterion. Runs the CLI on the
//! shipped German Credit scenario twice, into separate output directories,
//! and checks the written outputs plus a few library-level oracles.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force_auction, desk_setup, exhaustive_min_distance, random_auction, repo_root};
use explat::counterfactual::{find_counterfactuals, flips, passes_single_revert, SearchConfig};
use explat::exchange::{run_auction, settle, Ledger, Pricing, Registry};
use explat::forest::Threshold;
use explat::market::{expected_revenue, RateTable, StrategyKind, Valence};
use explat::pipeline;
use explat::report::{self, Metrics, RecordRow, SummaryRow};
use explat::scenario::Scenario;
use explat::tabular::Schema;

type Check = Result<(bool, String), String>;

struct Run {
    stdout: Vec<u8>,
    elapsed: Duration,
}

fn explat(args: &[&str]) -> Result<Run, String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_explat"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if !out.status.success() {
        return Err(format!("explat {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(Run {
        stdout: out.stdout,
        elapsed,
    })
}

fn scenario_path() -> PathBuf {
    repo_root().join("scenarios/german_credit.toml")
}

fn command_in(command: &str, dir: &Path) -> Result<Run, String> {
    explat(&[command, &scenario_path().display().to_string(), "--output-dir", &dir.display().to_string()])
}

fn criterion_1() -> Check {
    let run = explat(&["market", "all", "--json"])?;
    let v: serde_json::Value = serde_json::from_slice(&run.stdout).map_err(|e| e.to_string())?;
    let totals: Vec<f64> = v
        .as_array()
        .ok_or("market output is not a list")?
        .iter()
        .map(|e| e["total_revenue"].as_f64().unwrap_or(f64::NAN))
        .collect();
    let expected = [1_599_000.0, 147_000.0, 2_259_000.0];
    let ok = totals.len() == 3
        && totals.iter().zip(expected).all(|(t, e)| (t - e).abs() <= 2_000.0)
        && run.elapsed < Duration::from_secs(1);
    Ok((ok, format!("totals {totals:.2?}, {:.0} ms", run.elapsed.as_secs_f64() * 1e3)))
}

/// Returns (pass, detail, only_known_mismatch).
fn criterion_2() -> Result<(bool, String, bool), String> {
    let schema = Schema::load(&repo_root().join("data/german_credit.schema.toml")).map_err(|e| e.to_string())?;
    let rates = RateTable::default();
    let standard: BTreeSet<String> = ["Duration".to_string()].into();
    let valuable: BTreeSet<String> = ["Telephone".to_string()].into();
    let cells = [
        ("negative/standard", Valence::Negative, &standard, 0.0880544, 7),
        ("negative/valuable", Valence::Negative, &valuable, 0.880640, 6),
        ("positive/standard", Valence::Positive, &standard, 0.0044720, 7),
        ("positive/valuable", Valence::Positive, &valuable, 0.044720, 6),
    ];
    let mut detail = Vec::new();
    let mut failed = Vec::new();
    for (name, valence, features, stated, digits) in cells {
        let got = expected_revenue(features, valence, &schema, &rates).map_err(|e| e.to_string())?;
        let ok = (got - stated).abs() < 0.5 * 10f64.powi(-digits);
        let note = if ok { String::new() } else { format!(" (stated {stated})") };
        detail.push(format!("{name} {got:.7}{note}"));
        if !ok {
            failed.push((name, got));
        }
    }
    // 0.0256 * 3.44 is 0.088064; the stated 0.0880544 is not that product.
    let known = failed.len() == 1 && failed[0].0 == "negative/standard" && (failed[0].1 - 0.088064).abs() < 5e-8;
    let mut text = detail.join(", ");
    if known {
        text.push_str("; stated negative/standard value disagrees with 0.0256 x 3.44 = 0.088064");
    }
    Ok((failed.is_empty(), text, known))
}

fn criterion_3(a: &Path, train_time: Duration) -> Check {
    let metrics: Metrics = serde_json::from_slice(&fs::read(a.join(report::METRICS_FILE)).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let ok = metrics.auc >= 0.75 && train_time < Duration::from_secs(30);
    Ok((
        ok,
        format!(
            "test AUC {:.4} on {} rows, train+eval {:.1} s",
            metrics.auc,
            metrics.test_size,
            train_time.as_secs_f64()
        ),
    ))
}

fn criterion_4(a: &Path) -> Check {
    let start = Instant::now();
    let mut sc = Scenario::load(&scenario_path()).map_err(|e| e.to_string())?;
    sc.output_dir = a.to_path_buf();
    let prepared = pipeline::prepare(&sc).map_err(|e| e.to_string())?;
    let model = pipeline::load_model(&sc, &prepared).map_err(|e| e.to_string())?;
    let threshold = Threshold::new(sc.strategy.threshold).map_err(|e| e.to_string())?;
    let explained = pipeline::explain(&sc, &prepared, &model).map_err(|e| e.to_string())?;
    let by_id: BTreeMap<&str, _> = prepared.eval.rows.iter().map(|r| (r.id.as_str(), r)).collect();
    let (mut total, mut valid) = (0, 0);
    for e in &explained {
        let row = by_id[e.id.as_str()];
        for cf in &e.counterfactuals {
            total += 1;
            let flipped = flips(&model, row, &cf.changes, threshold).map_err(|e| e.to_string())?;
            let irreducible = passes_single_revert(&model, row, &cf.changes, threshold).map_err(|e| e.to_string())?;
            valid += usize::from(flipped && irreducible);
        }
    }

    let half = Threshold::new(0.5).map_err(|e| e.to_string())?;
    let (mut desk_total, mut desk_within) = (0, 0);
    for seed in [3, 11, 29] {
        let (model, grid, probes) = desk_setup(seed);
        let config = SearchConfig {
            k_max: 6,
            samples_per_size: 1_000_000,
            grid: 6,
            n_diverse: 5,
            preferred: None,
            seed,
        };
        for probe in &probes {
            let oracle = exhaustive_min_distance(&model, &grid, probe, half);
            let engine = find_counterfactuals(&model, &grid, probe, half, &config)
                .map_err(|e| e.to_string())?
                .iter()
                .map(|c| c.distance)
                .reduce(f64::min);
            desk_total += 1;
            desk_within += usize::from(match (engine, oracle) {
                (None, None) => true,
                (Some(e), Some(o)) => e <= 1.1 * o + 1e-12,
                _ => false,
            });
        }
    }
    let elapsed = start.elapsed();
    let rate = desk_within as f64 / desk_total as f64;
    let ok = total > 0 && valid == total && rate >= 0.95 && elapsed < Duration::from_secs(60);
    Ok((
        ok,
        format!(
            "{valid}/{total} counterfactuals valid over {} test rows; desk {desk_within}/{desk_total} within 1.1x; {:.1} s",
            explained.len(),
            elapsed.as_secs_f64()
        ),
    ))
}

fn read_summary(a: &Path) -> Result<BTreeMap<usize, SummaryRow>, String> {
    let rows: Vec<SummaryRow> = report::read_csv(&a.join(report::SUMMARY_CSV)).map_err(|e| e.to_string())?;
    Ok(rows.into_iter().map(|r| (r.number, r)).collect())
}

fn criterion_5(a: &Path) -> Check {
    let s = read_summary(a)?;
    let row = |n: usize| s.get(&n).ok_or(format!("summary lacks strategy {n}"));
    let (s1, s2, s3, s4, s5) = (row(1)?, row(2)?, row(3)?, row(4)?, row(5)?);
    let records = |kind| -> Result<BTreeMap<String, f64>, String> {
        let rows: Vec<RecordRow> = report::read_csv(&a.join(report::records_file(kind))).map_err(|e| e.to_string())?;
        Ok(rows.into_iter().map(|r| (r.id, r.expected_revenue)).collect())
    };
    let base = records(StrategyKind::Baseline)?;
    let picked = records(StrategyKind::FeaturePicking)?;
    let dominated = base.len() == picked.len()
        && base.iter().all(|(id, b)| picked.get(id).is_some_and(|p| *p >= *b));
    let t = |r: &SummaryRow| r.extrapolated_total;
    let a_ok = t(s2) >= t(s1) && dominated;
    let b_ok = t(s3) >= t(s2);
    let c_ok = s4.rejected > s1.rejected && t(s4) > t(s1);
    let d_ok = [s1, s2, s3, s4].iter().all(|r| t(s5) >= t(r)) && t(s5) >= 3.0 * t(s1);
    let e_ok = [s2, s3, s4, s5].iter().all(|r| r.percent_increase.is_some_and(|p| p > 0.0));
    let flag = |ok: bool| if ok { "ok" } else { "FAIL" };
    Ok((
        a_ok && b_ok && c_ok && d_ok && e_ok,
        format!(
            "(a) {} per-instance {} (b) {} (c) {} rejected {}>{} (d) {} {:.1}x (e) {} increases {:?}",
            flag(t(s2) >= t(s1)),
            flag(dominated),
            flag(b_ok),
            flag(c_ok),
            s4.rejected,
            s1.rejected,
            flag(d_ok),
            t(s5) / t(s1),
            flag(e_ok),
            [s2, s3, s4, s5].map(|r| r.percent_increase.map(|p| p.round())),
        ),
    ))
}

fn criterion_6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xac);
    let mut mismatches = 0;
    let mut ties = 0;
    let mut reserve_bound = 0;
    for pricing in [Pricing::FirstPrice, Pricing::SecondPrice] {
        for i in 0..10_000u64 {
            let (bids, mut rules) = random_auction(&mut rng);
            rules.pricing = pricing;
            let record = run_auction(i, bids.clone(), &rules);
            let oracle = brute_force_auction(&bids, &rules);
            let got = record.winner.clone().map(|w| (w, record.clearing_price));
            mismatches += usize::from(got != oracle || (oracle.is_none() && record.clearing_price != 0.0));
            let top = bids.iter().map(|b| b.price).fold(f64::NEG_INFINITY, f64::max);
            ties += usize::from(bids.iter().filter(|b| b.price == top).count() > 1);
            reserve_bound += usize::from(record.sold() && record.winning_bid.unwrap() < top);
        }
    }

    // Conservation: every sold impression is booked once, revenue sums to
    // the clicked clearing prices and splits into provider and platform.
    let mut registry = Registry::new();
    let mut ledger = Ledger::default();
    let (mut sold, mut expected) = (0usize, 0.0f64);
    for i in 0..10_000u64 {
        let (bids, rules) = random_auction(&mut rng);
        let record = run_auction(i, bids, &rules);
        let clicked = rng.gen_bool(0.3);
        if record.sold() {
            settle(&mut registry, &mut ledger, &record, clicked).map_err(|e| e.to_string())?;
            sold += 1;
            if clicked {
                expected += record.clearing_price;
            }
        }
    }
    let conserved = ledger.events().len() == sold
        && ledger.total_revenue() == expected
        && ledger.provider_revenue() + ledger.platform_revenue() == ledger.total_revenue();
    Ok((
        mismatches == 0 && conserved,
        format!(
            "{mismatches} mismatches in 20000 auctions ({ties} with tied top bids, {reserve_bound} won below the top bid via reserves); ledger {} over {sold} sold",
            if conserved { "conserved" } else { "NOT conserved" }
        ),
    ))
}

fn criterion_7(a: &Path) -> Check {
    let counts = |kind| -> Result<BTreeMap<String, usize>, String> {
        let mut total = BTreeMap::new();
        for valence in [Valence::Negative, Valence::Positive] {
            for (name, n) in report::read_histogram(&a.join(report::histogram_file(kind, valence))).map_err(|e| e.to_string())? {
                *total.entry(name).or_insert(0) += n;
            }
        }
        Ok(total)
    };
    let s1 = counts(StrategyKind::Baseline)?;
    let s2 = counts(StrategyKind::FeaturePicking)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for f in ["Property", "Housing", "Telephone", "Employment"] {
        let (x, y) = (s1.get(f).copied().unwrap_or(0), s2.get(f).copied().unwrap_or(0));
        ok &= y > x;
        detail.push(format!("{f} {x}->{y}"));
    }
    Ok((ok, detail.join(", ")))
}

fn criterion_8(a: &Path) -> Check {
    let s = read_summary(a)?;
    let mut ok = !s.is_empty();
    let mut detail = Vec::new();
    for r in s.values() {
        let z = (r.mc_mean - r.test_total_revenue) / r.mc_stderr;
        ok &= r.mc_trials >= 10_000 && z.abs() <= 3.0;
        detail.push(format!("S{} z={z:+.2}", r.number));
    }
    Ok((ok, format!("{} at {} trials", detail.join(", "), s.values().next().map_or(0, |r| r.mc_trials))))
}

fn criterion_9(a: &Path, b: &Path, market: &[Vec<u8>; 2]) -> Check {
    let mut names: Vec<_> = fs::read_dir(a)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        if fs::read(a.join(name)).ok() != fs::read(b.join(name)).ok() {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    if market[0] != market[1] {
        differing.push("market stdout".into());
    }
    Ok((
        differing.is_empty() && names.len() >= 10,
        if differing.is_empty() {
            format!("{} files from train/simulate/explain/exchange plus market output identical", names.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    ))
}

fn print(n: usize, check: Check) -> bool {
    let (pass, detail) = check.unwrap_or_else(|e| (false, format!("error: {e}")));
    println!("criterion {n}: {} - {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() -> ExitCode {
    let dirs = [tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir")];
    let (a, b) = (dirs[0].path(), dirs[1].path());

    let mut failures = 0;
    let mut market = [Vec::new(), Vec::new()];
    let mut train_time = Duration::MAX;
    let mut setup_error = None;
    for (i, dir) in [a, b].into_iter().enumerate() {
        let mut steps = || -> Result<(), String> {
            market[i] = explat(&["market", "all"])?.stdout;
            let train = command_in("train", dir)?;
            if i == 0 {
                train_time = train.elapsed;
            }
            for command in ["simulate", "explain", "exchange"] {
                command_in(command, dir)?;
            }
            Ok(())
        };
        if let Err(e) = steps() {
            setup_error = Some(e);
            break;
        }
    }
    let setup = |check: fn(&Path) -> Check| -> Check {
        match &setup_error {
            Some(e) => Err(e.clone()),
            None => check(a),
        }
    };

    failures += usize::from(!print(1, criterion_1()));
    match criterion_2() {
        Ok((pass, detail, known)) => {
            println!("criterion 2: {} - {detail}", if pass { "PASS" } else { "FAIL" });
            // The one stated value that contradicts its own inputs is reported
            // but does not fail the run; any other mismatch does.
            failures += usize::from(!pass && !known);
        }
        Err(e) => {
            println!("criterion 2: FAIL - error: {e}");
            failures += 1;
        }
    }
    let c3 = match &setup_error {
        Some(e) => Err(e.clone()),
        None => criterion_3(a, train_time),
    };
    failures += usize::from(!print(3, c3));
    failures += usize::from(!print(4, setup(criterion_4)));
    failures += usize::from(!print(5, setup(criterion_5)));
    failures += usize::from(!print(6, criterion_6()));
    failures += usize::from(!print(7, setup(criterion_7)));
    failures += usize::from(!print(8, setup(criterion_8)));
    let c9 = match &setup_error {
        Some(e) => Err(e.clone()),
        None => criterion_9(a, b, &market),
    };
    failures += usize::from(!print(9, c9));

    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
