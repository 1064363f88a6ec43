//! Text embedding abstraction and the deterministic reference embedder.
//!
//! Vectors are stored sparsely as sorted `(bucket, weight)` pairs over a fixed
//! dimension. A vector is either L2-normalized or the all-zero sentinel that
//! stands for text with no embeddable content.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::normalize_text;
use crate::error::EmbedError;

pub const MIN_DIM: usize = 8;
pub const DEFAULT_DIM: usize = 4096;
pub const REFERENCE_EMBEDDER: &str = "hash-trigram";

#[derive(Clone, Debug, PartialEq)]
pub struct UnitVector {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl UnitVector {
    pub fn zero(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// L2-normalizes accumulated weights. Zero or empty input gives the sentinel.
    pub fn from_weights(dim: usize, weights: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for (i, w) in weights {
            debug_assert!((i as usize) < dim);
            *acc.entry(i).or_insert(0.0) += w;
        }
        let norm = acc.values().map(|w| w * w).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 0.0 || norm.is_infinite() {
            return Self::zero(dim);
        }
        let entries = acc.into_iter().filter(|&(_, w)| w != 0.0).map(|(i, w)| (i, w / norm)).collect();
        Self { dim, entries }
    }

    /// Rebuilds a vector from stored parts, checking the unit-norm invariant.
    pub fn from_parts(dim: usize, entries: Vec<(u32, f64)>) -> Result<Self, String> {
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err("vector buckets are not strictly increasing".into());
        }
        if entries.last().is_some_and(|&(i, _)| i as usize >= dim) {
            return Err(format!("vector bucket out of range for dim {dim}"));
        }
        let v = Self { dim, entries };
        if !v.is_zero() && (v.norm() - 1.0).abs() > 1e-9 {
            return Err(format!("vector norm {} is not 1", v.norm()));
        }
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            out[i as usize] = w;
        }
        out
    }

    /// Dot product against a dense vector of the same dimension.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| w * dense[i as usize]).sum()
    }

    /// Renormalized mean of the given vectors; sentinels are skipped.
    pub fn mean_pool<'a>(dim: usize, vectors: impl IntoIterator<Item = &'a UnitVector>) -> Self {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        let mut count = 0usize;
        let mut only: Option<&UnitVector> = None;
        for v in vectors {
            if v.is_zero() {
                continue;
            }
            count += 1;
            only = Some(v);
            for &(i, w) in &v.entries {
                *acc.entry(i).or_insert(0.0) += w;
            }
        }
        match (count, only) {
            (0, _) => return Self::zero(dim),
            // skip the renormalization round trip so pooling one vector is exact
            (1, Some(v)) => return v.clone(),
            _ => {}
        }
        let n = count as f64;
        Self::from_weights(dim, acc.into_iter().map(|(i, w)| (i, w / n)))
    }
}

/// Cosine similarity of two unit vectors (their dot product). The sentinel
/// scores 0 against anything.
pub fn cosine(u: &UnitVector, v: &UnitVector) -> Result<f64, EmbedError> {
    if u.dim != v.dim {
        return Err(EmbedError::DimMismatch { left: u.dim, right: v.dim });
    }
    let (mut a, mut b) = (u.entries.iter().peekable(), v.entries.iter().peekable());
    let mut dot = 0.0;
    while let (Some(&&(i, x)), Some(&&(j, y))) = (a.peek(), b.peek()) {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => {
                a.next();
            }
            std::cmp::Ordering::Greater => {
                b.next();
            }
            std::cmp::Ordering::Equal => {
                dot += x * y;
                a.next();
                b.next();
            }
        }
    }
    Ok(dot)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub name: String,
    pub dim: usize,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
}

impl EmbedderSpec {
    /// The reference hashing embedder with its default parameters.
    pub fn reference(dim: usize) -> Self {
        let parameters = [
            ("hash", "fnv1a-64"),
            ("features", "word+char3"),
            ("word_weight", "1.0"),
            ("trigram_weight", "0.5"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v.to_owned()))
        .collect();
        Self { name: REFERENCE_EMBEDDER.to_owned(), dim, parameters }
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        resolve(self).map(|_| ())
    }
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        Self::reference(DEFAULT_DIM)
    }
}

pub trait Embedder: Send + Sync {
    fn spec(&self) -> &EmbedderSpec;

    fn embed(&self, text: &str) -> UnitVector;
}

pub type EmbedderFactory = fn(&EmbedderSpec) -> Result<Box<dyn Embedder>, EmbedError>;

/// Name → constructor table. New embedders plug in by registering a name.
pub struct EmbedderRegistry {
    factories: HashMap<String, EmbedderFactory>,
}

impl EmbedderRegistry {
    pub fn empty() -> Self {
        Self { factories: HashMap::new() }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(REFERENCE_EMBEDDER, |spec| Ok(Box::new(HashTrigramEmbedder::new(spec)?)));
        r
    }

    pub fn register(&mut self, name: &str, factory: EmbedderFactory) {
        self.factories.insert(name.to_owned(), factory);
    }

    pub fn build(&self, spec: &EmbedderSpec) -> Result<Box<dyn Embedder>, EmbedError> {
        if spec.dim < MIN_DIM {
            return Err(EmbedError::DimTooSmall(spec.dim));
        }
        let factory =
            self.factories.get(&spec.name).ok_or_else(|| EmbedError::UnknownEmbedder(spec.name.clone()))?;
        factory(spec)
    }
}

fn default_registry() -> &'static EmbedderRegistry {
    static REGISTRY: OnceLock<EmbedderRegistry> = OnceLock::new();
    REGISTRY.get_or_init(EmbedderRegistry::with_defaults)
}

/// Builds an embedder from the default registry.
pub fn resolve(spec: &EmbedderSpec) -> Result<Box<dyn Embedder>, EmbedError> {
    default_registry().build(spec)
}

pub fn embed_text(spec: &EmbedderSpec, text: &str) -> Result<UnitVector, EmbedError> {
    Ok(resolve(spec)?.embed(text))
}

/// 64-bit FNV-1a. Fixed and unseeded so buckets are stable everywhere.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hashes whole tokens and character trigrams into `dim` buckets, accumulates
/// term frequencies and L2-normalizes.
pub struct HashTrigramEmbedder {
    spec: EmbedderSpec,
    word_weight: f64,
    trigram_weight: f64,
}

impl HashTrigramEmbedder {
    pub fn new(spec: &EmbedderSpec) -> Result<Self, EmbedError> {
        let weight = |key: &str, default: f64| -> Result<f64, EmbedError> {
            match spec.parameters.get(key) {
                None => Ok(default),
                Some(v) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|w| w.is_finite() && *w >= 0.0)
                    .ok_or_else(|| EmbedError::BadParameter {
                        key: key.to_owned(),
                        message: format!("`{v}` is not a non-negative number"),
                    }),
            }
        };
        if let Some(h) = spec.parameters.get("hash") {
            if h != "fnv1a-64" {
                return Err(EmbedError::BadParameter { key: "hash".into(), message: format!("unsupported `{h}`") });
            }
        }
        Ok(Self {
            spec: spec.clone(),
            word_weight: weight("word_weight", 1.0)?,
            trigram_weight: weight("trigram_weight", 0.5)?,
        })
    }

    fn bucket(&self, kind: u8, feature: &str) -> u32 {
        let mut bytes = Vec::with_capacity(feature.len() + 2);
        bytes.push(kind);
        bytes.push(0x1f);
        bytes.extend_from_slice(feature.as_bytes());
        (fnv1a64(&bytes) % self.spec.dim as u64) as u32
    }

    /// Feature buckets with weights for already-normalized text.
    pub fn features(&self, normalized: &str) -> Vec<(u32, f64)> {
        let mut out = Vec::new();
        for token in normalized.split(' ').filter(|t| !t.is_empty()) {
            out.push((self.bucket(b'w', token), self.word_weight));
            let chars: Vec<char> = token.chars().collect();
            for tri in chars.windows(3) {
                let s: String = tri.iter().collect();
                out.push((self.bucket(b'g', &s), self.trigram_weight));
            }
        }
        out
    }
}

impl Embedder for HashTrigramEmbedder {
    fn spec(&self) -> &EmbedderSpec {
        &self.spec
    }

    fn embed(&self, text: &str) -> UnitVector {
        UnitVector::from_weights(self.spec.dim, self.features(&normalize_text(text)))
    }
}
