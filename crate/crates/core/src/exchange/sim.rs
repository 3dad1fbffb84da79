use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{collect_bids, run_auction, settle, AuctionRules, BidRequest, Granularity, ImpressionRecord, Ledger, Registry};
use crate::error::ExchangeError;
use crate::market::{ApplicantRecord, RateTable};
use crate::util::substream;

/// Output of a batch exchange run.
#[derive(Debug, Clone)]
pub struct ExchangeRun {
    /// One record per request, in impression-id order.
    pub records: Vec<ImpressionRecord>,
    pub ledger: Ledger,
    pub registry: Registry,
}

impl ExchangeRun {
    pub fn sold(&self) -> usize {
        self.records.iter().filter(|r| r.sold()).count()
    }
}

/// One request per applicant with an explanation, numbered from 1 in record
/// order; every changed feature is offered for matching.
pub fn requests_from_records(
    records: &[ApplicantRecord],
    theme_map: &BTreeMap<String, BTreeSet<String>>,
    context: &str,
    granularity: Granularity,
) -> Result<Vec<BidRequest>, ExchangeError> {
    records
        .iter()
        .filter(|r| r.found())
        .enumerate()
        .map(|(i, r)| {
            let mut req = BidRequest::new(
                i as u64 + 1,
                context,
                r.valence,
                r.features.iter().cloned().collect(),
                theme_map,
                granularity,
            )?;
            req.recipient.insert("applicant".into(), r.id.clone());
            Ok(req)
        })
        .collect()
}

/// Runs every request through collection, auction and settlement in
/// impression-id order. A click is a Bernoulli(ctr[valence]) draw from a
/// stream keyed by the impression id, so results do not depend on batch
/// composition.
pub fn run_exchange(
    mut registry: Registry,
    rules: &AuctionRules,
    mut requests: Vec<BidRequest>,
    rates: &RateTable,
    revenue_share: f64,
    seed: u64,
) -> Result<ExchangeRun, ExchangeError> {
    rules.validate()?;
    requests.sort_by_key(|r| r.impression_id);
    if let Some(w) = requests.windows(2).find(|w| w[0].impression_id == w[1].impression_id) {
        return Err(ExchangeError::InvalidRequest {
            id: w[0].impression_id,
            message: "duplicate impression id".into(),
        });
    }
    let mut ledger = Ledger::new(revenue_share)?;
    let mut records = Vec::with_capacity(requests.len());
    for req in &requests {
        let record = run_auction(req.impression_id, collect_bids(&registry, req), rules);
        if record.sold() {
            let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, req.impression_id));
            let clicked = rng.gen_bool(rates.ctr(req.valence).clamp(0.0, 1.0));
            settle(&mut registry, &mut ledger, &record, clicked)?;
        }
        records.push(record);
    }
    Ok(ExchangeRun {
        records,
        ledger,
        registry,
    })
}
