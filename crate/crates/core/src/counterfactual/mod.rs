//! Model-agnostic counterfactual search.
//!
//! Candidates are drawn by change-set size (1..=k_max) from per-feature
//! proposal grids, checked against the real forest, and every flipping
//! candidate is greedily reduced until no single changed feature can be
//! reverted without losing the flip. Results are distinct by changed-feature
//! set and ranked by (distance, feature names).

mod grid;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use grid::ProposalGrid;

use crate::error::CounterfactualError;
use crate::forest::{Forest, Threshold, Verdict};
use crate::tabular::{Domain, Instance, Schema, Value};
use crate::util::substream_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub k_max: usize,
    pub samples_per_size: usize,
    /// Quantile points per numeric feature when the grid is built from data.
    pub grid: usize,
    pub n_diverse: usize,
    pub preferred: Option<BTreeSet<String>>,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            k_max: 4,
            samples_per_size: 2000,
            grid: 10,
            n_diverse: 5,
            preferred: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterfactual {
    pub base_id: String,
    pub base_verdict: Verdict,
    pub achieved_verdict: Verdict,
    /// Feature name → new value.
    pub changes: BTreeMap<String, Value>,
    pub distance: f64,
    pub irreducible: bool,
}

impl Counterfactual {
    pub fn features(&self) -> BTreeSet<String> {
        self.changes.keys().cloned().collect()
    }

    /// The base instance with `changes` applied.
    pub fn apply(&self, schema: &Schema, instance: &Instance) -> Result<Instance, CounterfactualError> {
        apply_changes(schema, instance, &self.changes)
    }
}

pub fn apply_changes(
    schema: &Schema,
    instance: &Instance,
    changes: &BTreeMap<String, Value>,
) -> Result<Instance, CounterfactualError> {
    let mut out = instance.clone();
    for (name, v) in changes {
        let j = schema
            .index_of(name)
            .ok_or_else(|| CounterfactualError::UnknownFeature(name.clone()))?;
        if !schema.features[j].contains(v) {
            return Err(CounterfactualError::OutOfDomain(name.clone()));
        }
        out.values[j] = *v;
    }
    Ok(out)
}

/// Range-normalized L1 over numeric changes plus one per categorical or
/// binary mismatch.
pub fn distance(
    instance: &Instance,
    changes: &BTreeMap<String, Value>,
    schema: &Schema,
) -> Result<f64, CounterfactualError> {
    changes.iter().try_fold(0.0, |acc, (name, v)| {
        let j = schema
            .index_of(name)
            .ok_or_else(|| CounterfactualError::UnknownFeature(name.clone()))?;
        Ok(acc + feature_cost(schema, j, &instance.values[j], v))
    })
}

fn feature_cost(schema: &Schema, j: usize, from: &Value, to: &Value) -> f64 {
    match (&schema.features[j].domain, from, to) {
        (Domain::Range { lo, hi }, Value::Number(a), Value::Number(b)) => (a - b).abs() / (hi - lo),
        _ => f64::from(u8::from(from != to)),
    }
}

/// Whether applying `changes` moves the decision off the base verdict.
pub fn flips(
    model: &Forest,
    instance: &Instance,
    changes: &BTreeMap<String, Value>,
    threshold: Threshold,
) -> Result<bool, CounterfactualError> {
    let base = model
        .decide(instance, threshold)
        .map_err(|e| CounterfactualError::InvalidInstance(e.to_string()))?;
    let moved = apply_changes(model.schema(), instance, changes)?;
    let after = model
        .decide(&moved, threshold)
        .map_err(|e| CounterfactualError::InvalidInstance(e.to_string()))?;
    Ok(after.verdict != base.verdict)
}

/// True when reverting any single changed feature un-flips the decision.
pub fn passes_single_revert(
    model: &Forest,
    instance: &Instance,
    changes: &BTreeMap<String, Value>,
    threshold: Threshold,
) -> Result<bool, CounterfactualError> {
    for name in changes.keys() {
        let mut fewer = changes.clone();
        fewer.remove(name);
        if !fewer.is_empty() && flips(model, instance, &fewer, threshold)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Index-based change set, sorted by feature index.
type ChangeSet = Vec<(usize, Value)>;

struct Probe<'a> {
    model: &'a Forest,
    schema: &'a Schema,
    base: &'a Instance,
    base_verdict: Verdict,
    threshold: Threshold,
    values: Vec<Value>,
    buf: Vec<f64>,
}

impl<'a> Probe<'a> {
    fn new(model: &'a Forest, instance: &'a Instance, threshold: Threshold) -> Result<Self, CounterfactualError> {
        let base_verdict = model
            .decide(instance, threshold)
            .map_err(|e| CounterfactualError::InvalidInstance(e.to_string()))?
            .verdict;
        Ok(Self {
            model,
            schema: model.schema(),
            base: instance,
            base_verdict,
            threshold,
            values: instance.values.clone(),
            buf: Vec::with_capacity(model.schema().encoded_width()),
        })
    }

    fn flips(&mut self, changes: &[(usize, Value)]) -> bool {
        for &(j, v) in changes {
            self.values[j] = v;
        }
        let verdict = self.model.verdict_values(&self.values, self.threshold, &mut self.buf);
        for &(j, _) in changes {
            self.values[j] = self.base.values[j];
        }
        verdict != self.base_verdict
    }

    fn cost(&self, changes: &[(usize, Value)]) -> f64 {
        changes
            .iter()
            .map(|(j, v)| feature_cost(self.schema, *j, &self.base.values[*j], v))
            .sum()
    }

    /// Greedy revert loop: try single reverts in ascending order of the
    /// remaining distance (ties by feature name) and keep the first one that
    /// preserves the flip; stop when none does.
    fn reduce(&mut self, mut changes: ChangeSet) -> ChangeSet {
        loop {
            if changes.len() <= 1 {
                return changes;
            }
            let mut order: Vec<(f64, &str, usize)> = (0..changes.len())
                .map(|k| {
                    let mut rest = changes.clone();
                    rest.remove(k);
                    let j = changes[k].0;
                    (self.cost(&rest), self.schema.features[j].name.as_str(), k)
                })
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
            let order: Vec<usize> = order.into_iter().map(|(_, _, k)| k).collect();
            let mut reverted = false;
            for k in order {
                let mut rest = changes.clone();
                rest.remove(k);
                if self.flips(&rest) {
                    changes = rest;
                    reverted = true;
                    break;
                }
            }
            if !reverted {
                return changes;
            }
        }
    }

    fn to_counterfactual(&self, changes: &[(usize, Value)], irreducible: bool) -> Counterfactual {
        Counterfactual {
            base_id: self.base.id.clone(),
            base_verdict: self.base_verdict,
            achieved_verdict: self.base_verdict.opposite(),
            changes: changes
                .iter()
                .map(|(j, v)| (self.schema.features[*j].name.clone(), *v))
                .collect(),
            distance: self.cost(changes),
            irreducible,
        }
    }
}

/// Reduces a flipping change map to an irreducible one.
pub fn reduce_to_irreducible(
    model: &Forest,
    instance: &Instance,
    candidate: &BTreeMap<String, Value>,
    threshold: Threshold,
) -> Result<Counterfactual, CounterfactualError> {
    let schema = model.schema();
    let mut probe = Probe::new(model, instance, threshold)?;
    apply_changes(schema, instance, candidate)?;
    let mut changes: ChangeSet = candidate
        .iter()
        .map(|(name, v)| (schema.index_of(name).expect("checked by apply_changes"), *v))
        .collect();
    changes.sort_by_key(|(j, _)| *j);
    if !probe.flips(&changes) {
        return Err(CounterfactualError::NoFlip);
    }
    let reduced = probe.reduce(changes);
    Ok(probe.to_counterfactual(&reduced, true))
}

/// Searches for up to `n_diverse` irreducible counterfactuals with pairwise
/// distinct changed-feature sets, sorted by (distance, feature names).
///
/// With `preferred` set, the search first runs over preferred features only;
/// if that finds nothing, it runs the unrestricted search with the same seed,
/// so the fallback equals the no-preference result. An empty list means no
/// counterfactual was found within budget.
pub fn find_counterfactuals(
    model: &Forest,
    grid: &ProposalGrid,
    instance: &Instance,
    threshold: Threshold,
    config: &SearchConfig,
) -> Result<Vec<Counterfactual>, CounterfactualError> {
    let schema = model.schema();
    if config.k_max == 0 || config.n_diverse == 0 {
        return Err(CounterfactualError::InvalidConfig("k_max and n_diverse must be at least 1".into()));
    }
    if grid.len() != schema.len() {
        return Err(CounterfactualError::InvalidConfig("proposal grid does not match schema".into()));
    }
    let mutable: Vec<usize> = (0..schema.len()).filter(|&j| schema.features[j].mutable).collect();
    if let Some(preferred) = &config.preferred {
        let mut restricted = Vec::new();
        for name in preferred {
            let j = schema
                .index_of(name)
                .ok_or_else(|| CounterfactualError::UnknownFeature(name.clone()))?;
            if !schema.features[j].mutable {
                return Err(CounterfactualError::Immutable(name.clone()));
            }
            restricted.push(j);
        }
        restricted.sort_unstable();
        let found = search(model, grid, instance, threshold, config, &restricted)?;
        if !found.is_empty() {
            return Ok(found);
        }
    }
    search(model, grid, instance, threshold, config, &mutable)
}

fn search(
    model: &Forest,
    grid: &ProposalGrid,
    instance: &Instance,
    threshold: Threshold,
    config: &SearchConfig,
    features: &[usize],
) -> Result<Vec<Counterfactual>, CounterfactualError> {
    let mut probe = Probe::new(model, instance, threshold)?;
    let mut rng = ChaCha8Rng::seed_from_u64(substream_for(config.seed, &instance.id));

    // Alternatives per searchable feature, excluding the current value.
    let options: Vec<(usize, Vec<Value>)> = features
        .iter()
        .map(|&j| {
            let alts = grid
                .values(j)
                .iter()
                .filter(|v| **v != instance.values[j])
                .copied()
                .collect();
            (j, alts)
        })
        .filter(|(_, alts): &(usize, Vec<Value>)| !alts.is_empty())
        .collect();

    let mut seen: HashSet<Vec<(usize, u64)>> = HashSet::new();
    let mut found: BTreeMap<Vec<usize>, ChangeSet> = BTreeMap::new();
    let consider = |probe: &mut Probe, candidate: ChangeSet, found: &mut BTreeMap<Vec<usize>, ChangeSet>| {
        if !probe.flips(&candidate) {
            return;
        }
        let reduced = probe.reduce(candidate);
        let key: Vec<usize> = reduced.iter().map(|(j, _)| *j).collect();
        let cost = probe.cost(&reduced);
        match found.get(&key) {
            Some(prev) if probe.cost(prev) <= cost => {}
            _ => {
                found.insert(key, reduced);
            }
        }
    };

    let max_size = config.k_max.min(options.len());
    for size in 1..=max_size {
        let space = combination_space(&options, size);
        if space <= config.samples_per_size as f64 {
            for_each_combination(&options, size, &mut |candidate| {
                consider(&mut probe, candidate, &mut found);
            });
            continue;
        }
        for _ in 0..config.samples_per_size {
            let mut picks = index::sample(&mut rng, options.len(), size).into_vec();
            picks.sort_unstable();
            let candidate: ChangeSet = picks
                .iter()
                .map(|&p| {
                    let (j, alts) = &options[p];
                    (*j, alts[rng.gen_range(0..alts.len())])
                })
                .collect();
            let key: Vec<(usize, u64)> = candidate.iter().map(|(j, v)| (*j, v.key())).collect();
            if !seen.insert(key) {
                continue;
            }
            consider(&mut probe, candidate, &mut found);
        }
    }

    let mut out: Vec<Counterfactual> = found.values().map(|c| probe.to_counterfactual(c, true)).collect();
    out.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| a.changes.keys().cmp(b.changes.keys()))
    });
    out.truncate(config.n_diverse);
    Ok(out)
}

/// Number of distinct candidates with exactly `size` changed features.
fn combination_space(options: &[(usize, Vec<Value>)], size: usize) -> f64 {
    // Elementary symmetric polynomial of the per-feature alternative counts.
    let mut e = vec![0.0; size + 1];
    e[0] = 1.0;
    for (_, alts) in options {
        let c = alts.len() as f64;
        for k in (1..=size).rev() {
            e[k] += e[k - 1] * c;
        }
    }
    e[size]
}

fn for_each_combination(options: &[(usize, Vec<Value>)], size: usize, f: &mut dyn FnMut(ChangeSet)) {
    fn rec(
        options: &[(usize, Vec<Value>)],
        start: usize,
        size: usize,
        current: &mut ChangeSet,
        f: &mut dyn FnMut(ChangeSet),
    ) {
        if current.len() == size {
            f(current.clone());
            return;
        }
        for p in start..options.len() {
            if options.len() - p < size - current.len() {
                break;
            }
            let (j, alts) = &options[p];
            for v in alts {
                current.push((*j, *v));
                rec(options, p + 1, size, current, f);
                current.pop();
            }
        }
    }
    rec(options, 0, size, &mut Vec::with_capacity(size), f);
}

/// Adds `feature = value` to an explanation that lacks it. The padded
/// explanation must still flip the decision; it is irreducible only if the
/// original changes alone no longer flip.
pub fn inject_spam(
    cf: &Counterfactual,
    feature: &str,
    value: Value,
    model: &Forest,
    instance: &Instance,
    threshold: Threshold,
) -> Result<Counterfactual, CounterfactualError> {
    if cf.changes.contains_key(feature) {
        return Ok(cf.clone());
    }
    let schema = model.schema();
    let j = schema
        .index_of(feature)
        .ok_or_else(|| CounterfactualError::UnknownFeature(feature.to_string()))?;
    let f = &schema.features[j];
    if !f.mutable {
        return Err(CounterfactualError::Immutable(feature.to_string()));
    }
    if !f.contains(&value) {
        return Err(CounterfactualError::OutOfDomain(feature.to_string()));
    }
    if instance.values[j] == value {
        return Err(CounterfactualError::NoChange(feature.to_string()));
    }
    let mut changes = cf.changes.clone();
    changes.insert(feature.to_string(), value);
    if !flips(model, instance, &changes, threshold)? {
        return Err(CounterfactualError::SpamUnflips(feature.to_string()));
    }
    let original_survives = flips(model, instance, &cf.changes, threshold)?;
    Ok(Counterfactual {
        base_id: cf.base_id.clone(),
        base_verdict: cf.base_verdict,
        achieved_verdict: cf.achieved_verdict,
        distance: distance(instance, &changes, schema)?,
        changes,
        irreducible: !original_survives,
    })
}
