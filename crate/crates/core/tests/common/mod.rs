//! Shared fixtures and brute-force oracles for integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use explat::counterfactual::{distance, ProposalGrid};
use explat::exchange::{AuctionRules, Bid, Pricing};
use explat::forest::{Forest, ForestParams, Threshold, Verdict};
use explat::tabular::{Dataset, Feature, Instance, LabelSpec, Schema, Value};

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Six features, one immutable: the largest "desk-scale" shape.
pub fn desk_schema() -> Arc<Schema> {
    Arc::new(
        Schema::new(
            "desk",
            vec![
                Feature::numeric("Hours", 0.0, 10.0).integer(),
                Feature::numeric("Score", 0.0, 1.0),
                Feature::binary("Degree", ["no", "yes"]),
                Feature::categorical("Region", &["north", "south", "west"]),
                Feature::numeric("Debt", 0.0, 100.0).integer(),
                Feature::numeric("Age", 18.0, 70.0).integer().immutable(),
            ],
            LabelSpec {
                column: "y".into(),
                positive: "1".into(),
                negative: "0".into(),
            },
        )
        .unwrap(),
    )
}

pub fn desk_row(rng: &mut ChaCha8Rng, id: usize) -> Instance {
    Instance::new(
        id.to_string(),
        vec![
            Value::Number(rng.gen_range(0..=10) as f64),
            Value::Number((rng.gen::<f64>() * 100.0).round() / 100.0),
            Value::Category(rng.gen_range(0..2)),
            Value::Category(rng.gen_range(0..3)),
            Value::Number(rng.gen_range(0..=100) as f64),
            Value::Number(rng.gen_range(18..=70) as f64),
        ],
    )
}

fn desk_label(rng: &mut ChaCha8Rng, r: &Instance) -> bool {
    let num = |j: usize| match r.values[j] {
        Value::Number(x) => x,
        Value::Category(c) => c as f64,
    };
    let score = 0.05 * num(0) + 0.6 * num(1) + 0.3 * num(2) + 0.2 * f64::from(u8::from(num(3) == 2.0))
        - 0.004 * num(4)
        + 0.002 * (num(5) - 40.0);
    (score > 0.45) ^ (rng.gen::<f64>() < 0.08)
}

/// Synthetic training data, a small forest over it and a quantile grid.
pub fn desk_setup(seed: u64) -> (Forest, ProposalGrid, Vec<Instance>) {
    let schema = desk_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Instance> = (0..300).map(|i| desk_row(&mut rng, i + 1)).collect();
    let labels = rows.iter().map(|r| desk_label(&mut rng, r)).collect();
    let data = Dataset::new(Arc::clone(&schema), rows, labels).unwrap();
    let params = ForestParams {
        n_trees: 25,
        max_depth: Some(5),
        ..ForestParams::default()
    };
    let model = Forest::train(&data, &params, seed).unwrap();
    let grid = ProposalGrid::from_dataset(&data, 6);
    let probes = (0..60).map(|i| desk_row(&mut rng, 1000 + i)).collect();
    (model, grid, probes)
}

/// Minimum distance over every combination of grid values for the mutable
/// features that flips the decision, or `None` when nothing flips.
pub fn exhaustive_min_distance(
    model: &Forest,
    grid: &ProposalGrid,
    instance: &Instance,
    threshold: Threshold,
) -> Option<f64> {
    let schema = model.schema();
    let base = model.decide(instance, threshold).unwrap().verdict;
    let options: Vec<(usize, Vec<Value>)> = schema
        .features
        .iter()
        .enumerate()
        .filter(|(_, f)| f.mutable)
        .map(|(j, _)| {
            let mut vals = vec![instance.values[j]];
            vals.extend(grid.values(j).iter().copied().filter(|v| *v != instance.values[j]));
            (j, vals)
        })
        .collect();
    let mut best: Option<f64> = None;
    let mut idx = vec![0usize; options.len()];
    loop {
        // Advance the mixed-radix counter; the all-zero state is the base.
        let mut k = 0;
        while k < idx.len() {
            idx[k] += 1;
            if idx[k] < options[k].1.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == idx.len() {
            return best;
        }
        let mut changes = BTreeMap::new();
        let mut moved = instance.clone();
        for (slot, (j, vals)) in options.iter().enumerate() {
            if idx[slot] > 0 {
                changes.insert(schema.features[*j].name.clone(), vals[idx[slot]]);
                moved.values[*j] = vals[idx[slot]];
            }
        }
        let d = distance(instance, &changes, schema).unwrap();
        if best.is_some_and(|b| d >= b) {
            continue;
        }
        if model.decide(&moved, threshold).unwrap().verdict != base {
            best = Some(d);
        }
    }
}

/// Winner and clearing price by a direct scan, independent of sorting.
pub fn brute_force_auction(bids: &[Bid], rules: &AuctionRules) -> Option<(String, f64)> {
    let qualifies = |b: &Bid| b.price >= rules.reserve_for(&b.matched_keyword);
    let mut winner: Option<&Bid> = None;
    for b in bids.iter().filter(|b| qualifies(b)) {
        winner = match winner {
            None => Some(b),
            Some(w) if b.price > w.price || (b.price == w.price && b.advertiser < w.advertiser) => Some(b),
            keep => keep,
        };
    }
    let w = winner?;
    let price = match rules.pricing {
        Pricing::FirstPrice => w.price,
        Pricing::SecondPrice => {
            let runner_up = bids
                .iter()
                .filter(|b| qualifies(b) && !std::ptr::eq(*b, w))
                .map(|b| b.price)
                .fold(f64::NEG_INFINITY, f64::max);
            runner_up.max(rules.reserve_for(&w.matched_keyword))
        }
    };
    Some((w.advertiser.clone(), price))
}

/// Random bids on a coarse price lattice so ties are frequent.
pub fn random_auction(rng: &mut ChaCha8Rng) -> (Vec<Bid>, AuctionRules) {
    let n = rng.gen_range(0..8);
    let keys = ["Housing", "Property", "Telephone"];
    let mut ids: Vec<usize> = (0..12).collect();
    let bids = (0..n)
        .map(|_| {
            let id = ids.swap_remove(rng.gen_range(0..ids.len()));
            Bid {
                advertiser: format!("adv{id:02}"),
                price: f64::from(rng.gen_range(1..=20)) * 0.25,
                matched_keyword: keys[rng.gen_range(0..keys.len())].to_string(),
            }
        })
        .collect();
    let pricing = if rng.gen_bool(0.5) { Pricing::FirstPrice } else { Pricing::SecondPrice };
    let mut rules = AuctionRules::new(pricing, f64::from(rng.gen_range(0..=12)) * 0.25).unwrap();
    if rng.gen_bool(0.3) {
        rules.keyword_reserves.insert(keys[rng.gen_range(0..keys.len())].into(), f64::from(rng.gen_range(0..=16)) * 0.25);
    }
    (bids, rules)
}

pub fn verdict_flipped(model: &Forest, base: &Instance, moved: &Instance, threshold: Threshold) -> bool {
    let a: Verdict = model.decide(base, threshold).unwrap().verdict;
    a != model.decide(moved, threshold).unwrap().verdict
}
