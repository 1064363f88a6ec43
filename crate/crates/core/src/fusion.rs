//! Rank-based fusion of per-modality result lists.
//!
//! Linear fusion gives an item `n - rank` points from every list it appears
//! in (1-based ranks); items missing from a list get nothing from it. RRF
//! gives `1 / (k + rank)` instead. Only ranks are used, never similarity
//! values.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::Serialize;

use crate::corpus::{ClipRef, Modality};
use crate::error::FusionError;
use crate::index::RankedList;

pub const DEFAULT_RRF_K: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMethod {
    Linear,
    Rrf,
}

impl std::fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionMethod::Linear => "linear",
            FusionMethod::Rrf => "rrf",
        })
    }
}

impl std::str::FromStr for FusionMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(FusionMethod::Linear),
            "rrf" => Ok(FusionMethod::Rrf),
            other => Err(format!("unknown fusion method `{other}` (expected linear or rrf)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionConfig {
    pub method: FusionMethod,
    pub rrf_k: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { method: FusionMethod::Linear, rrf_k: DEFAULT_RRF_K }
    }
}

/// 1-based rank of an item in each modality's list, if present.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Provenance([Option<usize>; 3]);

impl Provenance {
    pub fn rank(&self, m: Modality) -> Option<usize> {
        self.0[m.index()]
    }

    pub fn best_rank(&self) -> usize {
        self.0.iter().flatten().copied().min().unwrap_or(usize::MAX)
    }

    pub fn contributors(&self) -> usize {
        self.0.iter().flatten().count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Modality, usize)> + '_ {
        Modality::ALL.into_iter().filter_map(|m| self.rank(m).map(|r| (m, r)))
    }
}

impl Serialize for Provenance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(3))?;
        for m in Modality::ALL {
            map.serialize_entry(m.wire_name(), &self.rank(m))?;
        }
        map.end()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FusedItem {
    pub clip_id: ClipRef,
    pub fused_score: f64,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusedRanking {
    pub items: Vec<FusedItem>,
    pub method: FusionMethod,
    pub depth: usize,
}

impl FusedRanking {
    pub fn clips(&self) -> impl Iterator<Item = &ClipRef> {
        self.items.iter().map(|i| &i.clip_id)
    }

    /// Recomputes an item's score from its provenance under this method.
    pub fn score_from_provenance(&self, p: &Provenance, rrf_k: f64) -> f64 {
        contribution_sum(self.method, self.depth, rrf_k, p)
    }
}

fn contribution(method: FusionMethod, depth: usize, rrf_k: f64, rank: usize) -> f64 {
    match method {
        FusionMethod::Linear => (depth - rank) as f64,
        FusionMethod::Rrf => 1.0 / (rrf_k + rank as f64),
    }
}

// Contributions are added in ascending rank order, so the sum depends only
// on the multiset of ranks: list order and which modality held which rank
// cannot perturb the low bits and break a true tie.
fn contribution_sum(method: FusionMethod, depth: usize, rrf_k: f64, p: &Provenance) -> f64 {
    let mut ranks = p.0;
    ranks.sort_unstable_by_key(|r| r.unwrap_or(usize::MAX));
    ranks.iter().flatten().map(|&r| contribution(method, depth, rrf_k, r)).sum()
}

/// Score descending, then best rank, then more contributing lists, then
/// canonical clip id.
pub fn fused_order(a: &FusedItem, b: &FusedItem) -> Ordering {
    b.fused_score
        .total_cmp(&a.fused_score)
        .then_with(|| a.provenance.best_rank().cmp(&b.provenance.best_rank()))
        .then_with(|| b.provenance.contributors().cmp(&a.provenance.contributors()))
        .then_with(|| a.clip_id.as_str().cmp(b.clip_id.as_str()))
}

fn collect_provenance(lists: &[&RankedList]) -> Result<Vec<(ClipRef, Provenance)>, FusionError> {
    if lists.is_empty() {
        return Err(FusionError::NoLists);
    }
    let mut seen = [false; 3];
    for l in lists {
        let m = l.field.modality().ok_or(FusionError::NotAModality(l.field.wire_name()))?;
        if std::mem::replace(&mut seen[m.index()], true) {
            return Err(FusionError::DuplicateModality(m.wire_name()));
        }
    }
    let mut slots: HashMap<&ClipRef, usize> = HashMap::new();
    let mut out: Vec<(ClipRef, Provenance)> = Vec::new();
    for l in lists {
        let m = l.field.modality().expect("checked above");
        for (pos, clip) in l.clips().enumerate() {
            let slot = *slots.entry(clip).or_insert_with(|| {
                out.push((clip.clone(), Provenance::default()));
                out.len() - 1
            });
            // keep the first occurrence if a list repeats an item
            out[slot].1 .0[m.index()].get_or_insert(pos + 1);
        }
    }
    Ok(out)
}

fn fuse(lists: &[&RankedList], method: FusionMethod, depth: usize, rrf_k: f64) -> Result<FusedRanking, FusionError> {
    let provenance = collect_provenance(lists)?;
    let mut items: Vec<FusedItem> = provenance
        .into_iter()
        .map(|(clip_id, provenance)| FusedItem {
            fused_score: contribution_sum(method, depth, rrf_k, &provenance),
            clip_id,
            provenance,
        })
        .collect();
    items.sort_by(fused_order);
    Ok(FusedRanking { items, method, depth })
}

/// Linear rank fusion at depth `n`; `n` must cover every list.
pub fn linear_fuse(lists: &[&RankedList], n: usize) -> Result<FusedRanking, FusionError> {
    if let Some(len) = lists.iter().map(|l| l.len()).max().filter(|&len| len > n) {
        return Err(FusionError::DepthTooSmall { depth: n, len });
    }
    fuse(lists, FusionMethod::Linear, n, 0.0)
}

pub fn rrf_fuse(lists: &[&RankedList], k: f64) -> Result<FusedRanking, FusionError> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(FusionError::BadRrfConstant(k));
    }
    let depth = lists.iter().map(|l| l.len()).max().unwrap_or(0);
    fuse(lists, FusionMethod::Rrf, depth, k)
}

pub fn fuse_with(config: &FusionConfig, lists: &[&RankedList], n: usize) -> Result<FusedRanking, FusionError> {
    match config.method {
        FusionMethod::Linear => linear_fuse(lists, n),
        FusionMethod::Rrf => rrf_fuse(lists, config.rrf_k).map(|mut r| {
            r.depth = n;
            r
        }),
    }
}
