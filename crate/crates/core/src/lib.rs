//! Deterministic simulator for an explanation platform: tabular credit data,
//! a random-forest decision model, counterfactual explanations, explanation
//! ad auctions and revenue strategies.

pub mod counterfactual;
pub mod error;
pub mod exchange;
pub mod fixtures;
pub mod forest;
pub mod market;
pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod tabular;
pub mod util;

pub use error::{
    CounterfactualError, DataError, ExchangeError, MarketError, ModelError, PipelineError, ScenarioError,
};
