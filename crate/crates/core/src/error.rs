use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseClipIdError {
    #[error("clip id is empty")]
    Empty,
    #[error("clip id `{input}` is missing the `{marker}` segment")]
    MissingMarker { marker: &'static str, input: String },
    #[error("clip id has an empty video id")]
    EmptyVideoId,
    #[error("clip id {segment} segment `{value}` is not a non-negative integer")]
    BadSeconds { segment: &'static str, value: String },
    #[error("clip id end {end_s} must be greater than start {start_s}")]
    EmptyExtent { start_s: u64, end_s: u64 },
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("duplicate clip_id {0}")]
    DuplicateClip(String),
    #[error("invalid generator parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmbedError {
    #[error("unknown embedder `{0}`")]
    UnknownEmbedder(String),
    #[error("embedder dimension {0} is below the minimum of 8")]
    DimTooSmall(usize),
    #[error("invalid embedder parameter `{key}`: {message}")]
    BadParameter { key: String, message: String },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("search depth must be at least 1")]
    ZeroDepth,
    #[error("cannot build an index from an empty corpus")]
    EmptyCorpus,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed index file: {0}")]
    Format(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("fusion needs at least one ranked list")]
    NoLists,
    #[error("more than one list for modality {0}")]
    DuplicateModality(&'static str),
    #[error("list from field `{0}` is not a routable modality")]
    NotAModality(&'static str),
    #[error("fusion depth {depth} is smaller than list length {len}")]
    DepthTooSmall { depth: usize, len: usize },
    #[error("RRF constant must be positive and finite, got {0}")]
    BadRrfConstant(f64),
}

#[derive(Debug, Error)]
pub enum RouterError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("LLM backend is not configured: {0}")]
    NotConfigured(String),
    #[error("no replay entry for query `{0}`")]
    MissingReplay(String),
    #[error("LLM request failed after {attempts} attempt(s): {message}")]
    Backend { attempts: u32, message: String },
    #[error("{path}: {message}")]
    Fixture { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("missing index for `{0}`")]
    MissingIndex(&'static str),
    #[error("gold clip {gold} of query {query_id} is not in the corpus")]
    UnknownGold { query_id: String, gold: String },
    #[error(transparent)]
    Router(#[from] RouterError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
