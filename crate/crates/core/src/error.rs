use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by schema and dataset handling.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema: {0}")]
    Schema(String),
    #[error("no rows")]
    NoRows,
    #[error("row {row}: expected {expected} columns, found {found}")]
    ColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {column}: {message}")]
    Domain {
        row: usize,
        column: String,
        message: String,
    },
    #[error("dataset must contain both classes")]
    SingleClass,
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    Fraction(f64),
    #[error("instance does not conform to schema: {0}")]
    Conformance(String),
}

/// Errors raised while training, loading or querying a forest.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("threshold {0} must lie strictly between 0 and 1")]
    Threshold(f64),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Errors raised by counterfactual operations.
#[derive(Debug, Error, PartialEq)]
pub enum CounterfactualError {
    #[error("candidate changes do not flip the decision")]
    NoFlip,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature `{0}` is immutable")]
    Immutable(String),
    #[error("value for `{0}` lies outside its domain")]
    OutOfDomain(String),
    #[error("adding `{0}` un-flips the decision")]
    SpamUnflips(String),
    #[error("value for `{0}` equals the instance's current value")]
    NoChange(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
}

/// Errors raised by the ad exchange.
#[derive(Debug, Error, PartialEq)]
pub enum ExchangeError {
    #[error("duplicate advertiser id `{0}`")]
    DuplicateAdvertiser(String),
    #[error("advertiser `{id}`: {message}")]
    InvalidAdvertiser { id: String, message: String },
    #[error("impression {0} was not sold")]
    Unsold(u64),
    #[error("impression {0} was already settled")]
    AlreadySettled(u64),
    #[error("invalid bid request {id}: {message}")]
    InvalidRequest { id: u64, message: String },
    #[error("reserve price must be non-negative, got {0}")]
    Reserve(f64),
    #[error("campaign file: {0}")]
    Config(String),
}

/// Errors raised by the revenue layer.
#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("explanation has no features")]
    EmptyExplanation,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("test size must be positive")]
    ZeroTestSize,
    #[error("invalid rate table: {0}")]
    Rates(String),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("unknown market domain `{0}`")]
    UnknownDomain(String),
    #[error("invalid strategy: {0}")]
    Strategy(String),
    #[error("counterfactual search failed for `{id}`: {message}")]
    Search { id: String, message: String },
}

/// Errors raised while loading a scenario file.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

/// Any failure of a scenario-driven pipeline run.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Counterfactual(#[from] CounterfactualError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Exchange(#[from] ExchangeError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Precondition(String),
}
