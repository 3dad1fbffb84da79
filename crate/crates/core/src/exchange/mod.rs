//! Real-time-bidding exchange for explanation impressions: advertiser
//! registry, keyword and theme matching, single-slot auctions, and an
//! append-only revenue ledger.

mod campaign;
mod sim;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use campaign::{load_campaigns, parse_campaigns};
pub use sim::{requests_from_records, run_exchange, ExchangeRun};

use crate::error::ExchangeError;
use crate::market::Valence;

/// Live-serving budget for one auction; recorded, never enforced.
pub const LATENCY_BUDGET: Duration = Duration::from_millis(100);

/// Provider's share of click revenue, after AdSense's 68/32 split.
pub const DEFAULT_REVENUE_SHARE: f64 = 0.68;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValenceFilter {
    Negative,
    Positive,
    #[default]
    Any,
}

impl ValenceFilter {
    pub fn admits(self, valence: Valence) -> bool {
        match self {
            ValenceFilter::Any => true,
            ValenceFilter::Negative => valence == Valence::Negative,
            ValenceFilter::Positive => valence == Valence::Positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    /// Feature names matched exactly.
    pub keywords: BTreeSet<String>,
    /// Theme tags matched against the themes of explanation features.
    pub themes: BTreeSet<String>,
    /// Context tags; empty matches every context.
    pub contexts: BTreeSet<String>,
    pub valence: ValenceFilter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Advertiser {
    pub id: String,
    pub campaign: Campaign,
    /// Keyword or theme → bid price.
    pub bids: BTreeMap<String, f64>,
    /// Remaining spend; `None` is unlimited.
    pub budget: Option<f64>,
}

impl Advertiser {
    pub fn validate(&self) -> Result<(), ExchangeError> {
        let invalid = |message: String| ExchangeError::InvalidAdvertiser {
            id: self.id.clone(),
            message,
        };
        if self.id.is_empty() {
            return Err(invalid("id must be non-empty".into()));
        }
        if self.campaign.keywords.is_empty() && self.campaign.themes.is_empty() {
            return Err(invalid("campaign needs at least one keyword or theme".into()));
        }
        for (key, price) in &self.bids {
            if !(price.is_finite() && *price > 0.0) {
                return Err(invalid(format!("bid for `{key}` must be positive, got {price}")));
            }
        }
        for key in self.campaign.keywords.iter().chain(&self.campaign.themes) {
            if !self.bids.contains_key(key) {
                return Err(invalid(format!("no bid price for `{key}`")));
            }
        }
        if let Some(b) = self.budget {
            if !(b.is_finite() && b >= 0.0) {
                return Err(invalid(format!("budget must be non-negative, got {b}")));
            }
        }
        Ok(())
    }
}

/// Advertisers in registration order.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    advertisers: Vec<Advertiser>,
    index: HashMap<String, usize>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, advertiser: Advertiser) -> Result<&str, ExchangeError> {
        advertiser.validate()?;
        if self.index.contains_key(&advertiser.id) {
            return Err(ExchangeError::DuplicateAdvertiser(advertiser.id));
        }
        self.index.insert(advertiser.id.clone(), self.advertisers.len());
        self.advertisers.push(advertiser);
        Ok(&self.advertisers.last().unwrap().id)
    }

    pub fn get(&self, id: &str) -> Option<&Advertiser> {
        self.index.get(id).map(|&i| &self.advertisers[i])
    }

    pub fn len(&self) -> usize {
        self.advertisers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.advertisers.is_empty()
    }

    /// Registration order.
    pub fn iter(&self) -> impl Iterator<Item = &Advertiser> {
        self.advertisers.iter()
    }

    fn charge(&mut self, id: &str, amount: f64) {
        if let Some(&i) = self.index.get(id) {
            if let Some(b) = &mut self.advertisers[i].budget {
                *b = (*b - amount).max(0.0);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// Feature names are visible to bidders.
    #[default]
    Fine,
    /// Only feature themes are visible; keyword campaigns cannot match.
    Coarse,
}

impl FromStr for Granularity {
    type Err = ExchangeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fine" => Ok(Granularity::Fine),
            "coarse" => Ok(Granularity::Coarse),
            other => Err(ExchangeError::Config(format!("unknown granularity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BidRequest {
    pub impression_id: u64,
    pub context: String,
    pub valence: Valence,
    pub features: BTreeSet<String>,
    /// Themes of the explanation features.
    pub themes: BTreeSet<String>,
    pub granularity: Granularity,
    pub recipient: BTreeMap<String, String>,
}

impl BidRequest {
    /// Builds a request whose themes are looked up from `theme_map`
    /// (feature → themes).
    pub fn new(
        impression_id: u64,
        context: &str,
        valence: Valence,
        features: BTreeSet<String>,
        theme_map: &BTreeMap<String, BTreeSet<String>>,
        granularity: Granularity,
    ) -> Result<Self, ExchangeError> {
        if features.is_empty() {
            return Err(ExchangeError::InvalidRequest {
                id: impression_id,
                message: "explanation has no features".into(),
            });
        }
        let themes = features
            .iter()
            .filter_map(|f| theme_map.get(f))
            .flatten()
            .cloned()
            .collect();
        Ok(Self {
            impression_id,
            context: context.to_string(),
            valence,
            features,
            themes,
            granularity,
            recipient: BTreeMap::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub advertiser: String,
    pub price: f64,
    pub matched_keyword: String,
}

/// One bid per eligible advertiser, in registration order. An advertiser bids
/// its highest price among matching keys (ties go to the smaller key) and is
/// skipped when its remaining budget cannot cover that price.
pub fn collect_bids(registry: &Registry, request: &BidRequest) -> Vec<Bid> {
    let mut bids = Vec::new();
    for a in registry.iter() {
        let c = &a.campaign;
        if !(c.contexts.is_empty() || c.contexts.contains(&request.context)) || !c.valence.admits(request.valence) {
            continue;
        }
        let keyword_hits = match request.granularity {
            Granularity::Fine => Some(c.keywords.intersection(&request.features)),
            Granularity::Coarse => None,
        };
        let theme_hits = c.themes.intersection(&request.themes);
        let best = keyword_hits
            .into_iter()
            .flatten()
            .chain(theme_hits)
            .map(|k| (a.bids[k], k))
            .fold(None::<(f64, &String)>, |best, (p, k)| match best {
                Some((bp, bk)) if bp > p || (bp == p && bk <= k) => Some((bp, bk)),
                _ => Some((p, k)),
            });
        let Some((price, key)) = best else { continue };
        if a.budget.is_some_and(|b| b < price) {
            continue;
        }
        bids.push(Bid {
            advertiser: a.id.clone(),
            price,
            matched_keyword: key.clone(),
        });
    }
    bids
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pricing {
    FirstPrice,
    #[default]
    SecondPrice,
}

impl FromStr for Pricing {
    type Err = ExchangeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "first-price" | "first" => Ok(Pricing::FirstPrice),
            "second-price" | "second" => Ok(Pricing::SecondPrice),
            other => Err(ExchangeError::Config(format!("unknown pricing rule `{other}`"))),
        }
    }
}

/// Ties between equal bids always go to the lexicographically smaller id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuctionRules {
    pub pricing: Pricing,
    /// Floor for keys without their own reserve.
    pub reserve: f64,
    /// Per-keyword floors; override `reserve` for bids on that key.
    pub keyword_reserves: BTreeMap<String, f64>,
}

impl AuctionRules {
    pub fn new(pricing: Pricing, reserve: f64) -> Result<Self, ExchangeError> {
        let rules = Self {
            pricing,
            reserve,
            keyword_reserves: BTreeMap::new(),
        };
        rules.validate()?;
        Ok(rules)
    }

    pub fn validate(&self) -> Result<(), ExchangeError> {
        for r in std::iter::once(&self.reserve).chain(self.keyword_reserves.values()) {
            if !(r.is_finite() && *r >= 0.0) {
                return Err(ExchangeError::Reserve(*r));
            }
        }
        Ok(())
    }

    pub fn reserve_for(&self, key: &str) -> f64 {
        self.keyword_reserves.get(key).copied().unwrap_or(self.reserve)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpressionRecord {
    pub impression_id: u64,
    pub winner: Option<String>,
    pub winning_bid: Option<f64>,
    /// 0 when unsold.
    pub clearing_price: f64,
    pub matched_keyword: Option<String>,
    /// Every submitted bid, qualifying or not.
    pub bids: Vec<Bid>,
    /// Wall-clock time stayed under [`LATENCY_BUDGET`]. Not part of any
    /// written output, since timing is not reproducible.
    #[serde(skip, default = "yes")]
    pub within_latency_budget: bool,
}

fn yes() -> bool {
    true
}

impl ImpressionRecord {
    pub fn sold(&self) -> bool {
        self.winner.is_some()
    }
}

/// Single-slot auction. A bid qualifies when it meets the reserve of its
/// key. The highest qualifying bid wins; first price pays the bid, second
/// price pays max(next qualifying bid, winner's reserve).
pub fn run_auction(impression_id: u64, bids: Vec<Bid>, rules: &AuctionRules) -> ImpressionRecord {
    let start = Instant::now();
    let mut qualifying: Vec<&Bid> = bids
        .iter()
        .filter(|b| b.price >= rules.reserve_for(&b.matched_keyword))
        .collect();
    qualifying.sort_by(|a, b| b.price.total_cmp(&a.price).then_with(|| a.advertiser.cmp(&b.advertiser)));

    let (winner, winning_bid, price, key) = match qualifying.first() {
        None => (None, None, 0.0, None),
        Some(top) => {
            let price = match rules.pricing {
                Pricing::FirstPrice => top.price,
                Pricing::SecondPrice => {
                    let floor = rules.reserve_for(&top.matched_keyword);
                    qualifying.get(1).map_or(floor, |b| b.price.max(floor))
                }
            };
            (Some(top.advertiser.clone()), Some(top.price), price, Some(top.matched_keyword.clone()))
        }
    };
    ImpressionRecord {
        impression_id,
        winner,
        winning_bid,
        clearing_price: price,
        matched_keyword: key,
        within_latency_budget: start.elapsed() <= LATENCY_BUDGET,
        bids,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueEvent {
    pub impression_id: u64,
    pub advertiser: String,
    pub matched_keyword: String,
    pub price: f64,
    pub clicked: bool,
    /// `price` on a click, else 0.
    pub revenue: f64,
}

/// Append-only record of settled impressions.
#[derive(Debug, Clone, PartialEq)]
pub struct Ledger {
    events: Vec<RevenueEvent>,
    settled: BTreeSet<u64>,
    revenue_share: f64,
}

impl Default for Ledger {
    fn default() -> Self {
        Self::new(DEFAULT_REVENUE_SHARE).unwrap()
    }
}

impl Ledger {
    /// `revenue_share` is the provider's fraction; the platform keeps the rest.
    pub fn new(revenue_share: f64) -> Result<Self, ExchangeError> {
        if !(0.0..=1.0).contains(&revenue_share) {
            return Err(ExchangeError::Config(format!(
                "revenue share must lie in [0, 1], got {revenue_share}"
            )));
        }
        Ok(Self {
            events: Vec::new(),
            settled: BTreeSet::new(),
            revenue_share,
        })
    }

    pub fn events(&self) -> &[RevenueEvent] {
        &self.events
    }

    pub fn revenue_share(&self) -> f64 {
        self.revenue_share
    }

    pub fn total_revenue(&self) -> f64 {
        self.events.iter().map(|e| e.revenue).sum()
    }

    pub fn provider_revenue(&self) -> f64 {
        self.total_revenue() * self.revenue_share
    }

    pub fn platform_revenue(&self) -> f64 {
        self.total_revenue() - self.provider_revenue()
    }

    pub fn clicks(&self) -> usize {
        self.events.iter().filter(|e| e.clicked).count()
    }

    /// Rows `impression_id,winner,price,matched_keyword,clicked`.
    pub fn to_csv(&self) -> Result<Vec<u8>, ExchangeError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| ExchangeError::Config(e.to_string());
        w.write_record(["impression_id", "winner", "price", "matched_keyword", "clicked"])
            .map_err(io)?;
        for e in &self.events {
            w.write_record([
                e.impression_id.to_string(),
                e.advertiser.clone(),
                e.price.to_string(),
                e.matched_keyword.clone(),
                e.clicked.to_string(),
            ])
            .map_err(io)?;
        }
        w.into_inner().map_err(|e| ExchangeError::Config(e.to_string()))
    }
}

/// Books a sold impression: revenue is the clearing price on a click, and
/// the winner's budget is charged on a click.
pub fn settle<'a>(
    registry: &mut Registry,
    ledger: &'a mut Ledger,
    record: &ImpressionRecord,
    clicked: bool,
) -> Result<&'a RevenueEvent, ExchangeError> {
    let (Some(winner), Some(key)) = (&record.winner, &record.matched_keyword) else {
        return Err(ExchangeError::Unsold(record.impression_id));
    };
    if !ledger.settled.insert(record.impression_id) {
        return Err(ExchangeError::AlreadySettled(record.impression_id));
    }
    let revenue = if clicked { record.clearing_price } else { 0.0 };
    if clicked {
        registry.charge(winner, record.clearing_price);
    }
    ledger.events.push(RevenueEvent {
        impression_id: record.impression_id,
        advertiser: winner.clone(),
        matched_keyword: key.clone(),
        price: record.clearing_price,
        clicked,
        revenue,
    });
    Ok(ledger.events.last().unwrap())
}

impl fmt::Display for Pricing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pricing::FirstPrice => "first-price",
            Pricing::SecondPrice => "second-price",
        })
    }
}
