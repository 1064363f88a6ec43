//! Per-query retrieval metrics with graded temporal relevance.

use crate::corpus::{ClipRef, ADJACENCY_WINDOW_S};

/// Ideal relevance sequence used to normalize DCG, independent of the corpus.
pub const IDEAL_RELEVANCE: [f64; 2] = [1.0, 0.5];

/// 1.0 for the gold clip, 0.5 for another clip of the same video whose start
/// lies within ±10 s of the gold start, else 0.
pub fn graded_relevance(candidate: &ClipRef, gold: &ClipRef) -> f64 {
    if candidate == gold {
        1.0
    } else if candidate.video_id() == gold.video_id()
        && candidate.start_s().abs_diff(gold.start_s()) <= ADJACENCY_WINDOW_S
    {
        0.5
    } else {
        0.0
    }
}

fn gain(rel: f64, position: usize) -> f64 {
    (rel.exp2() - 1.0) / ((position + 1) as f64).log2()
}

pub fn dcg_at_k<'a>(ranking: impl IntoIterator<Item = &'a ClipRef>, gold: &ClipRef, k: usize) -> f64 {
    ranking.into_iter().take(k).enumerate().map(|(i, c)| gain(graded_relevance(c, gold), i + 1)).sum()
}

pub fn ideal_dcg_at_k(k: usize) -> f64 {
    IDEAL_RELEVANCE.iter().take(k).enumerate().map(|(i, &r)| gain(r, i + 1)).sum()
}

/// DCG over the fixed ideal DCG, capped at 1. The cap only matters when more
/// than one adjacent clip ranks in the top k.
pub fn ndcg_at_k<'a>(ranking: impl IntoIterator<Item = &'a ClipRef>, gold: &ClipRef, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    (dcg_at_k(ranking, gold, k) / ideal_dcg_at_k(k)).min(1.0)
}

pub fn recall_at_k<'a>(ranking: impl IntoIterator<Item = &'a ClipRef>, gold: &ClipRef, k: usize) -> f64 {
    if ranking.into_iter().take(k).any(|c| c == gold) {
        1.0
    } else {
        0.0
    }
}

/// 1 / rank of the first exact gold hit, or 0.
pub fn reciprocal_rank<'a>(ranking: impl IntoIterator<Item = &'a ClipRef>, gold: &ClipRef) -> f64 {
    ranking.into_iter().position(|c| c == gold).map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

/// Share of index searches saved relative to searching every modality.
pub fn cost_reduction(mean_selected: f64, total_modalities: usize) -> f64 {
    1.0 - mean_selected / total_modalities as f64
}
