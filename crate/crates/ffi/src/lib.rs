//! C ABI over the explat library.
//!
//! Conventions:
//! - Every fallible function returns an [`ExplatStatus`]; results go through
//!   out-pointers that are written only on success.
//! - On failure, [`explat_last_error`] returns a message for the calling
//!   thread, valid until that thread's next call into this library.
//! - Handles are opaque and must be released with the matching `*_free`
//!   function. Passing NULL to a `*_free` function is a no-op.
//! - Strings are NUL-terminated UTF-8.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use explat::exchange::{self, AuctionRules, BidRequest, Granularity, Pricing, Registry};
use explat::forest::{auc, Forest, ForestParams};
use explat::market::{estimate_market, MarketDomain, MarketParams, RateTable, Valence};
use explat::tabular::{load_dataset, split, Dataset, Schema, Tier};
use explat::{DataError, ExchangeError, MarketError, ModelError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplatStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Data = 4,
    Model = 5,
    Market = 6,
    Exchange = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplatValence {
    Negative = 0,
    Positive = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplatTier {
    Standard = 0,
    Valuable = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplatDomain {
    Finance = 0,
    Employment = 1,
    Education = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplatPricing {
    FirstPrice = 0,
    SecondPrice = 1,
}

/// Closed-form yearly market size.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExplatMarketEstimate {
    pub rejected_revenue: f64,
    pub accepted_revenue: f64,
    pub total_revenue: f64,
}

/// Outcome of one auction. `winner` is a registration index, or -1 when
/// the impression went unsold.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplatAuctionResult {
    pub winner: i64,
    pub winning_bid: f64,
    pub clearing_price: f64,
    pub bids: u64,
}

pub struct ExplatSchema {
    inner: Arc<Schema>,
}

pub struct ExplatDataset {
    inner: Dataset,
}

pub struct ExplatForest {
    inner: Forest,
}

pub struct ExplatRegistry {
    inner: Registry,
    ids: Vec<CString>,
    themes: std::collections::BTreeMap<String, BTreeSet<String>>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ExplatStatus, String);

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure(ExplatStatus::Data, e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure(ExplatStatus::Model, e.to_string())
    }
}

impl From<MarketError> for Failure {
    fn from(e: MarketError) -> Self {
        Failure(ExplatStatus::Market, e.to_string())
    }
}

impl From<ExchangeError> for Failure {
    fn from(e: ExchangeError) -> Self {
        Failure(ExplatStatus::Exchange, e.to_string())
    }
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NULs were removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ExplatStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ExplatStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {message}"));
            ExplatStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ExplatStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(ExplatStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<T>(ptr: *mut T, what: &str, value: T) -> Result<(), Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    ptr.write(value);
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

unsafe fn free<T>(ptr: *mut T) {
    if !ptr.is_null() {
        drop(Box::from_raw(ptr));
    }
}

/// Message for the last failed call on this thread, or NULL.
#[no_mangle]
pub extern "C" fn explat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn explat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a schema file.
#[no_mangle]
pub unsafe extern "C" fn explat_schema_load(path: *const c_char, out_schema: *mut *mut ExplatSchema) -> ExplatStatus {
    guard(|| {
        let path = PathBuf::from(text(path, "path")?);
        let schema = Schema::load(&path)?;
        out(out_schema, "out_schema", boxed(ExplatSchema { inner: Arc::new(schema) }))
    })
}

#[no_mangle]
pub unsafe extern "C" fn explat_schema_free(schema: *mut ExplatSchema) {
    free(schema)
}

/// Number of input features.
#[no_mangle]
pub unsafe extern "C" fn explat_schema_feature_count(schema: *const ExplatSchema, out_count: *mut u64) -> ExplatStatus {
    guard(|| {
        let s = handle(schema, "schema")?;
        out(out_count, "out_count", s.inner.len() as u64)
    })
}

/// Loads a dataset that conforms to `schema`.
#[no_mangle]
pub unsafe extern "C" fn explat_dataset_load(
    schema: *const ExplatSchema,
    path: *const c_char,
    out_dataset: *mut *mut ExplatDataset,
) -> ExplatStatus {
    guard(|| {
        let s = handle(schema, "schema")?;
        let path = PathBuf::from(text(path, "path")?);
        let data = load_dataset(&path, Arc::clone(&s.inner))?;
        out(out_dataset, "out_dataset", boxed(ExplatDataset { inner: data }))
    })
}

#[no_mangle]
pub unsafe extern "C" fn explat_dataset_free(dataset: *mut ExplatDataset) {
    free(dataset)
}

#[no_mangle]
pub unsafe extern "C" fn explat_dataset_len(dataset: *const ExplatDataset, out_len: *mut u64) -> ExplatStatus {
    guard(|| {
        let d = handle(dataset, "dataset")?;
        out(out_len, "out_len", d.inner.len() as u64)
    })
}

/// Stratified split; the test part has round(test_fraction * rows) rows.
#[no_mangle]
pub unsafe extern "C" fn explat_dataset_split(
    dataset: *const ExplatDataset,
    test_fraction: f64,
    seed: u64,
    out_train: *mut *mut ExplatDataset,
    out_test: *mut *mut ExplatDataset,
) -> ExplatStatus {
    guard(|| {
        let d = handle(dataset, "dataset")?;
        if out_train.is_null() || out_test.is_null() {
            return Err(null("output pointer"));
        }
        let (train, test) = split(&d.inner, test_fraction, seed)?;
        out(out_train, "out_train", boxed(ExplatDataset { inner: train }))?;
        out(out_test, "out_test", boxed(ExplatDataset { inner: test }))
    })
}

/// Trains a random forest. `max_depth` 0 means unlimited; the number of
/// features tried per split is the default (square root of the encoded width).
#[no_mangle]
pub unsafe extern "C" fn explat_forest_train(
    train: *const ExplatDataset,
    n_trees: u64,
    max_depth: u64,
    min_leaf: u64,
    seed: u64,
    out_forest: *mut *mut ExplatForest,
) -> ExplatStatus {
    guard(|| {
        let d = handle(train, "train")?;
        let params = ForestParams {
            n_trees: n_trees as usize,
            max_depth: (max_depth > 0).then_some(max_depth as usize),
            min_leaf: min_leaf as usize,
            ..ForestParams::default()
        };
        let forest = Forest::train(&d.inner, &params, seed)?;
        out(out_forest, "out_forest", boxed(ExplatForest { inner: forest }))
    })
}

/// Loads a model file written by `explat train` or [`explat_forest_save`].
#[no_mangle]
pub unsafe extern "C" fn explat_forest_load(
    schema: *const ExplatSchema,
    path: *const c_char,
    out_forest: *mut *mut ExplatForest,
) -> ExplatStatus {
    guard(|| {
        let s = handle(schema, "schema")?;
        let path = PathBuf::from(text(path, "path")?);
        let forest = Forest::load(&path, Arc::clone(&s.inner))?;
        out(out_forest, "out_forest", boxed(ExplatForest { inner: forest }))
    })
}

#[no_mangle]
pub unsafe extern "C" fn explat_forest_save(forest: *const ExplatForest, path: *const c_char) -> ExplatStatus {
    guard(|| {
        let f = handle(forest, "forest")?;
        let path = PathBuf::from(text(path, "path")?);
        Ok(f.inner.save(&path)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn explat_forest_free(forest: *mut ExplatForest) {
    free(forest)
}

/// Positive-class probability of row `row` (0-based) of `dataset`.
#[no_mangle]
pub unsafe extern "C" fn explat_forest_predict(
    forest: *const ExplatForest,
    dataset: *const ExplatDataset,
    row: u64,
    out_probability: *mut f64,
) -> ExplatStatus {
    guard(|| {
        let f = handle(forest, "forest")?;
        let d = handle(dataset, "dataset")?;
        let instance = d.inner.rows.get(row as usize).ok_or_else(|| {
            Failure(
                ExplatStatus::InvalidArgument,
                format!("row {row} out of range ({} rows)", d.inner.len()),
            )
        })?;
        let p = f.inner.predict_proba(instance)?;
        out(out_probability, "out_probability", p)
    })
}

/// Area under the ROC curve of the forest on a labelled dataset.
#[no_mangle]
pub unsafe extern "C" fn explat_forest_auc(
    forest: *const ExplatForest,
    dataset: *const ExplatDataset,
    out_auc: *mut f64,
) -> ExplatStatus {
    guard(|| {
        let f = handle(forest, "forest")?;
        let d = handle(dataset, "dataset")?;
        let value = auc(&f.inner, &d.inner)?;
        out(out_auc, "out_auc", value)
    })
}

/// Expected revenue of one explanation impression under the default rate
/// table: ctr[valence] * cpc[valence, tier of the most expensive feature].
#[no_mangle]
pub unsafe extern "C" fn explat_expected_revenue(
    valence: ExplatValence,
    tier: ExplatTier,
    out_revenue: *mut f64,
) -> ExplatStatus {
    guard(|| {
        let v = match valence {
            ExplatValence::Negative => Valence::Negative,
            ExplatValence::Positive => Valence::Positive,
        };
        let t = match tier {
            ExplatTier::Standard => Tier::Standard,
            ExplatTier::Valuable => Tier::Valuable,
        };
        out(out_revenue, "out_revenue", RateTable::default().impression_value(v, t))
    })
}

/// Yearly market size with the built-in parameters for `domain`.
#[no_mangle]
pub unsafe extern "C" fn explat_market_estimate(
    domain: ExplatDomain,
    out_estimate: *mut ExplatMarketEstimate,
) -> ExplatStatus {
    guard(|| {
        let d = match domain {
            ExplatDomain::Finance => MarketDomain::Finance,
            ExplatDomain::Employment => MarketDomain::Employment,
            ExplatDomain::Education => MarketDomain::Education,
        };
        let e = estimate_market(&MarketParams::builtin(d))?;
        out(
            out_estimate,
            "out_estimate",
            ExplatMarketEstimate {
                rejected_revenue: e.rejected_revenue,
                accepted_revenue: e.accepted_revenue,
                total_revenue: e.total_revenue,
            },
        )
    })
}

/// Loads advertisers from a campaign file. Feature themes for broad
/// matching come from `schema`, which may be NULL (keyword matching only).
#[no_mangle]
pub unsafe extern "C" fn explat_registry_load(
    path: *const c_char,
    schema: *const ExplatSchema,
    out_registry: *mut *mut ExplatRegistry,
) -> ExplatStatus {
    guard(|| {
        let path = PathBuf::from(text(path, "path")?);
        let registry = exchange::load_campaigns(&path)?;
        let ids = registry
            .iter()
            .map(|a| CString::new(a.id.clone()).map_err(|_| Failure(ExplatStatus::Exchange, "id contains NUL".into())))
            .collect::<Result<_, _>>()?;
        let themes = schema
            .as_ref()
            .map(|s| {
                s.inner
                    .features
                    .iter()
                    .map(|f| (f.name.clone(), f.themes.clone()))
                    .collect()
            })
            .unwrap_or_default();
        out(
            out_registry,
            "out_registry",
            boxed(ExplatRegistry {
                inner: registry,
                ids,
                themes,
            }),
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn explat_registry_free(registry: *mut ExplatRegistry) {
    free(registry)
}

#[no_mangle]
pub unsafe extern "C" fn explat_registry_len(registry: *const ExplatRegistry, out_len: *mut u64) -> ExplatStatus {
    guard(|| {
        let r = handle(registry, "registry")?;
        out(out_len, "out_len", r.inner.len() as u64)
    })
}

/// Id of the advertiser at registration index `index`, owned by the
/// registry; NULL when out of range.
#[no_mangle]
pub unsafe extern "C" fn explat_registry_advertiser_id(registry: *const ExplatRegistry, index: u64) -> *const c_char {
    registry
        .as_ref()
        .and_then(|r| r.ids.get(index as usize))
        .map_or(std::ptr::null(), |c| c.as_ptr())
}

/// Collects bids for an explanation with `n_features` changed features and
/// runs a single-slot auction. Budgets are not charged.
#[no_mangle]
pub unsafe extern "C" fn explat_auction(
    registry: *const ExplatRegistry,
    features: *const *const c_char,
    n_features: u64,
    context: *const c_char,
    valence: ExplatValence,
    pricing: ExplatPricing,
    reserve: f64,
    out_result: *mut ExplatAuctionResult,
) -> ExplatStatus {
    guard(|| {
        let r = handle(registry, "registry")?;
        if features.is_null() && n_features > 0 {
            return Err(null("features"));
        }
        let mut names = BTreeSet::new();
        for i in 0..n_features as usize {
            names.insert(text(*features.add(i), "feature name")?.to_string());
        }
        let context = text(context, "context")?;
        let valence = match valence {
            ExplatValence::Negative => Valence::Negative,
            ExplatValence::Positive => Valence::Positive,
        };
        let pricing = match pricing {
            ExplatPricing::FirstPrice => Pricing::FirstPrice,
            ExplatPricing::SecondPrice => Pricing::SecondPrice,
        };
        let rules = AuctionRules::new(pricing, reserve)?;
        let request = BidRequest::new(0, context, valence, names, &r.themes, Granularity::Fine)?;
        let record = exchange::run_auction(0, exchange::collect_bids(&r.inner, &request), &rules);
        let winner = match &record.winner {
            Some(id) => r.inner.iter().position(|a| &a.id == id).map_or(-1, |i| i as i64),
            None => -1,
        };
        out(
            out_result,
            "out_result",
            ExplatAuctionResult {
                winner,
                winning_bid: record.winning_bid.unwrap_or(0.0),
                clearing_price: record.clearing_price,
                bids: record.bids.len() as u64,
            },
        )
    })
}
