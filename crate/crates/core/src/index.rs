//! Per-modality flat vector indices with exact top-n cosine search.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_text, ClipRef, Corpus, IndexField};
use crate::embed::{self, EmbedderSpec, UnitVector};
use crate::error::{EmbedError, IndexError};
use crate::exec::{self, Execution};

pub const DEFAULT_DEPTH: usize = 50;

const MAGIC: &[u8; 4] = b"VRIX";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub indexed: usize,
    pub skipped: usize,
    /// Set when no clip had content for the field.
    pub empty: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexEntry {
    pub clip: ClipRef,
    pub vector: UnitVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModalityIndex {
    field: IndexField,
    embedder: EmbedderSpec,
    entries: Vec<IndexEntry>,
    stats: BuildStats,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankedItem {
    pub clip: ClipRef,
    pub score: f64,
}

/// Top-n search result for one index, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedList {
    pub field: IndexField,
    pub items: Vec<RankedItem>,
    pub depth: usize,
}

impl RankedList {
    pub fn clips(&self) -> impl Iterator<Item = &ClipRef> {
        self.items.iter().map(|i| &i.clip)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Splits raw text on sentence punctuation and normalizes each piece,
/// dropping pieces that normalize to nothing.
pub fn split_sentences(raw: &str) -> Vec<String> {
    raw.split(['.', '!', '?']).map(normalize_text).filter(|s| !s.is_empty()).collect()
}

/// Mean-pools the sentence vectors of a document into one unit vector.
pub fn embed_document(embedder: &dyn embed::Embedder, raw: &str) -> UnitVector {
    let dim = embedder.spec().dim;
    let sentences: Vec<UnitVector> = split_sentences(raw).iter().map(|s| embedder.embed(s)).collect();
    UnitVector::mean_pool(dim, &sentences)
}

pub fn build_index(
    corpus: &Corpus,
    field: IndexField,
    spec: &EmbedderSpec,
    exec: Execution,
) -> Result<ModalityIndex, IndexError> {
    if corpus.is_empty() {
        return Err(IndexError::EmptyCorpus);
    }
    let embedder = embed::resolve(spec)?;
    let vectors = exec::map(exec, corpus.clips(), |clip| {
        clip.field(field).map(|text| embed_document(embedder.as_ref(), text)).filter(|v| !v.is_zero())
    });
    let entries: Vec<IndexEntry> = corpus
        .clips()
        .iter()
        .zip(vectors)
        .filter_map(|(c, v)| v.map(|vector| IndexEntry { clip: c.clip.clone(), vector }))
        .collect();
    let indexed = entries.len();
    let stats = BuildStats { indexed, skipped: corpus.len() - indexed, empty: indexed == 0 };
    if stats.empty {
        log::warn!("index for `{field}` is empty: no clip has content for this field");
    }
    Ok(ModalityIndex { field, embedder: spec.clone(), entries, stats })
}

/// Builds several field indices, one worker per field when parallel.
pub fn build_indices(
    corpus: &Corpus,
    fields: &[IndexField],
    spec: &EmbedderSpec,
    exec: Execution,
) -> Result<Vec<ModalityIndex>, IndexError> {
    exec::try_map(exec, fields, |&f| build_index(corpus, f, spec, exec))
}

fn rank_order(a: &(f64, &ClipRef), b: &(f64, &ClipRef)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.as_str().cmp(b.1.as_str()))
}

impl ModalityIndex {
    pub fn field(&self) -> IndexField {
        self.field
    }

    pub fn embedder(&self) -> &EmbedderSpec {
        &self.embedder
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn stats(&self) -> &BuildStats {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn search(&self, query: &UnitVector, n: usize) -> Result<RankedList, IndexError> {
        self.search_with(Execution::Sequential, query, n)
    }

    /// Exhaustive scan; ties broken by ascending canonical clip id.
    pub fn search_with(&self, exec: Execution, query: &UnitVector, n: usize) -> Result<RankedList, IndexError> {
        if n == 0 {
            return Err(IndexError::ZeroDepth);
        }
        if query.dim() != self.embedder.dim {
            return Err(EmbedError::DimMismatch { left: query.dim(), right: self.embedder.dim }.into());
        }
        let empty = RankedList { field: self.field, items: Vec::new(), depth: n };
        if query.is_zero() || self.entries.is_empty() {
            return Ok(empty);
        }
        let dense = query.to_dense();
        let scores = exec::map(exec, &self.entries, |e| e.vector.dot_dense(&dense));
        let mut scored: Vec<(f64, &ClipRef)> =
            scores.into_iter().zip(&self.entries).map(|(s, e)| (s, &e.clip)).collect();
        if n < scored.len() {
            scored.select_nth_unstable_by(n - 1, rank_order);
            scored.truncate(n);
        }
        scored.sort_unstable_by(rank_order);
        let items = scored.into_iter().map(|(score, clip)| RankedItem { clip: clip.clone(), score }).collect();
        Ok(RankedList { items, ..empty })
    }

    pub fn search_batch(
        &self,
        exec: Execution,
        queries: &[UnitVector],
        n: usize,
    ) -> Result<Vec<RankedList>, IndexError> {
        exec::try_map(exec, queries, |q| self.search(q, n))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = FileHeader {
            format_version: FORMAT_VERSION,
            field: self.field.wire_name().to_owned(),
            embedder: self.embedder.clone(),
            entry_count: self.entries.len(),
            dim: self.embedder.dim,
            stats: self.stats.clone(),
        };
        let header = serde_json::to_vec(&header).expect("header serialization is infallible");
        let mut out = Vec::with_capacity(16 + header.len() + self.entries.len() * 64);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for e in &self.entries {
            let id = e.clip.as_str().as_bytes();
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id);
            out.extend_from_slice(&(e.vector.entries().len() as u32).to_le_bytes());
            for &(i, w) in e.vector.entries() {
                out.extend_from_slice(&i.to_le_bytes());
                out.extend_from_slice(&w.to_bits().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(IndexError::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(IndexError::Format(format!("unsupported format version {version}")));
        }
        let header_len = r.u32()? as usize;
        let header: FileHeader = serde_json::from_slice(r.take(header_len)?)
            .map_err(|e| IndexError::Format(format!("header: {e}")))?;
        if header.format_version != FORMAT_VERSION || header.dim != header.embedder.dim {
            return Err(IndexError::Format("inconsistent header".into()));
        }
        let field = IndexField::from_wire(&header.field)
            .ok_or_else(|| IndexError::Format(format!("unknown field `{}`", header.field)))?;
        let mut entries = Vec::with_capacity(header.entry_count);
        let mut seen = HashSet::with_capacity(header.entry_count);
        for _ in 0..header.entry_count {
            let id_len = r.u32()? as usize;
            let id = std::str::from_utf8(r.take(id_len)?).map_err(|e| IndexError::Format(e.to_string()))?;
            let clip = ClipRef::parse(id).map_err(|e| IndexError::Format(e.to_string()))?;
            if !seen.insert(clip.clone()) {
                return Err(IndexError::Format(format!("duplicate entry {clip}")));
            }
            let nnz = r.u32()? as usize;
            let mut pairs = Vec::with_capacity(nnz);
            for _ in 0..nnz {
                let i = r.u32()?;
                let w = f64::from_bits(r.u64()?);
                pairs.push((i, w));
            }
            let vector = UnitVector::from_parts(header.dim, pairs).map_err(IndexError::Format)?;
            if vector.is_zero() {
                return Err(IndexError::Format(format!("zero vector stored for {clip}")));
            }
            entries.push(IndexEntry { clip, vector });
        }
        if r.pos != bytes.len() {
            return Err(IndexError::Format("trailing bytes after entries".into()));
        }
        if header.stats.indexed != entries.len() {
            return Err(IndexError::Format("build stats disagree with entry count".into()));
        }
        Ok(Self { field, embedder: header.embedder, entries, stats: header.stats })
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|source| IndexError::Io { path: path.to_owned(), source })
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self, IndexError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| IndexError::Io { path: path.to_owned(), source })?;
        Self::from_bytes(&bytes)
    }

    /// Conventional file name for a field's index inside an index directory.
    pub fn file_name(field: IndexField) -> String {
        format!("{}.idx", field.wire_name())
    }
}

#[derive(Serialize, Deserialize)]
struct FileHeader {
    format_version: u32,
    field: String,
    embedder: EmbedderSpec,
    entry_count: usize,
    dim: usize,
    stats: BuildStats,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| IndexError::Format("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
