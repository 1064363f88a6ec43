//! Route → search selected indices → fuse.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{ClipRef, Corpus, IndexField};
use crate::embed::{self, Embedder, EmbedderSpec, UnitVector};
use crate::error::{EvalError, IndexError};
use crate::exec::Execution;
use crate::fusion::{fuse_with, FusedRanking, FusionConfig};
use crate::index::{build_indices, ModalityIndex, RankedList};
use crate::router::RoutingDecision;

/// Loaded indices sharing one embedder.
pub struct IndexSet {
    indices: BTreeMap<IndexField, ModalityIndex>,
    embedder: Box<dyn Embedder>,
}

impl IndexSet {
    pub fn new(indices: Vec<ModalityIndex>) -> Result<Self, IndexError> {
        let spec = indices
            .first()
            .map(|i| i.embedder().clone())
            .ok_or_else(|| IndexError::Format("no indices supplied".into()))?;
        let mut map = BTreeMap::new();
        for idx in indices {
            if idx.embedder() != &spec {
                return Err(IndexError::Format(format!("index `{}` uses a different embedder", idx.field())));
            }
            if map.insert(idx.field(), idx).is_some() {
                return Err(IndexError::Format("two indices for the same field".into()));
            }
        }
        Ok(Self { indices: map, embedder: embed::resolve(&spec)? })
    }

    pub fn build(
        corpus: &Corpus,
        fields: &[IndexField],
        spec: &EmbedderSpec,
        exec: Execution,
    ) -> Result<Self, IndexError> {
        Self::new(build_indices(corpus, fields, spec, exec)?)
    }

    /// Loads whichever `<field>.idx` files exist in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, IndexError> {
        let dir = dir.as_ref();
        let mut found = Vec::new();
        for field in IndexField::ALL {
            let path = dir.join(ModalityIndex::file_name(field));
            if path.exists() {
                found.push(ModalityIndex::read_from(&path)?);
            }
        }
        if found.is_empty() {
            return Err(IndexError::Format(format!("no index files in {}", dir.display())));
        }
        Self::new(found)
    }

    pub fn get(&self, field: IndexField) -> Option<&ModalityIndex> {
        self.indices.get(&field)
    }

    pub fn require(&self, field: IndexField) -> Result<&ModalityIndex, EvalError> {
        self.get(field).ok_or(EvalError::MissingIndex(field.wire_name()))
    }

    pub fn fields(&self) -> impl Iterator<Item = IndexField> + '_ {
        self.indices.keys().copied()
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn spec(&self) -> &EmbedderSpec {
        self.embedder.spec()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SearchConfig {
    pub depth: usize,
    pub fusion: FusionConfig,
    /// Search each modality with the router's rewritten query instead of
    /// the original text.
    pub use_rewrites: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { depth: crate::index::DEFAULT_DEPTH, fusion: FusionConfig::default(), use_rewrites: false }
    }
}

pub struct Retrieval {
    pub ranking: FusedRanking,
    /// No selected modality could embed its query text.
    pub unembeddable: bool,
}

/// Searches the decision's modalities and fuses their lists.
pub fn retrieve(
    indices: &IndexSet,
    decision: &RoutingDecision,
    original_text: &str,
    cfg: &SearchConfig,
) -> Result<Retrieval, EvalError> {
    let mut lists = Vec::with_capacity(decision.len());
    let mut cached: Option<UnitVector> = None;
    let mut any_embeddable = false;
    for sel in decision.selections() {
        let index = indices.require(sel.modality.into())?;
        let vector = if cfg.use_rewrites {
            indices.embedder().embed(&sel.query)
        } else {
            cached.get_or_insert_with(|| indices.embedder().embed(original_text)).clone()
        };
        any_embeddable |= !vector.is_zero();
        lists.push(index.search(&vector, cfg.depth)?);
    }
    // A single list fuses to its own order, so every path goes through fusion.
    let refs: Vec<&RankedList> = lists.iter().collect();
    let ranking = fuse_with(&cfg.fusion, &refs, cfg.depth)?;
    Ok(Retrieval { ranking, unembeddable: !any_embeddable })
}

/// Searches one non-routed field (the fused caption index) directly.
pub fn retrieve_field(
    indices: &IndexSet,
    field: IndexField,
    text: &str,
    cfg: &SearchConfig,
) -> Result<(Vec<ClipRef>, bool), EvalError> {
    let index = indices.require(field)?;
    let vector = indices.embedder().embed(text);
    let list = index.search(&vector, cfg.depth)?;
    Ok((list.items.into_iter().map(|i| i.clip).collect(), vector.is_zero()))
}
