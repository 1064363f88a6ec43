//! Evaluation harness: per-query metrics, aggregation, and report output.

pub mod metrics;
pub mod routing;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::corpus::{ClipRef, Corpus, IndexField, Modality, QueryRecord, SourceLabel};
use crate::error::EvalError;
use crate::exec::{self, Execution};
use crate::fusion::FusionConfig;
use crate::pipeline::{retrieve, retrieve_field, IndexSet, SearchConfig};
use crate::router::{route, Router, RouterConfig, RoutingDecision, SelectAllRouter};

pub use metrics::{
    cost_reduction, dcg_at_k, graded_relevance, ideal_dcg_at_k, ndcg_at_k, recall_at_k, reciprocal_rank,
    IDEAL_RELEVANCE,
};
pub use routing::{routing_stats, RoutingStats};

pub const TOTAL_MODALITIES: usize = 3;

pub const NDCG_LEGEND: &str = "NDCG uses the fixed ideal relevance vector [1.0, 0.5, 0, ...]: gold clip = 1.0, \
same-video clip starting within 10 s of the gold start = 0.5. A ranking with only the gold clip at rank 1 \
scores NDCG@5 = 0.7928; scores are capped at 1.0.";

/// What gets searched for each query.
#[derive(Clone, Copy)]
pub enum Method<'a> {
    /// Route with the given router and search the selected indices.
    Routed(&'a dyn Router),
    /// One text index over the concatenated per-clip caption.
    AllText,
    /// All three modality indices, fused.
    LateFusionAll,
    Single(Modality),
}

impl Method<'_> {
    pub fn label(&self) -> String {
        match self {
            Method::Routed(r) => format!("routed({})", r.name()),
            Method::AllText => "all-text".into(),
            Method::LateFusionAll => "late-fusion-all".into(),
            Method::Single(m) => format!("single({})", m.wire_name()),
        }
    }

    /// Index fields this method reads.
    pub fn required_fields(&self) -> Vec<IndexField> {
        match self {
            Method::Routed(_) | Method::LateFusionAll => Modality::ALL.map(IndexField::from).to_vec(),
            Method::AllText => vec![IndexField::Fused],
            Method::Single(m) => vec![(*m).into()],
        }
    }
}

impl fmt::Debug for Method<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub depth: usize,
    pub fusion: FusionConfig,
    pub router: RouterConfig,
    pub use_rewrites: bool,
    pub exec: Execution,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            depth: crate::index::DEFAULT_DEPTH,
            fusion: FusionConfig::default(),
            router: RouterConfig::default(),
            use_rewrites: false,
            exec: Execution::default(),
        }
    }
}

impl EvalConfig {
    fn search(&self) -> SearchConfig {
        SearchConfig { depth: self.depth, fusion: self.fusion, use_rewrites: self.use_rewrites }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Breakdown {
    pub queries: usize,
    pub recall_at_5: f64,
    pub mean_selected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub method: String,
    pub queries: usize,
    #[serde(rename = "recall@1")]
    pub recall_at_1: f64,
    #[serde(rename = "recall@5")]
    pub recall_at_5: f64,
    #[serde(rename = "recall@10")]
    pub recall_at_10: f64,
    pub mrr: f64,
    #[serde(rename = "ndcg@5")]
    pub ndcg_at_5: f64,
    #[serde(rename = "ndcg@10")]
    pub ndcg_at_10: f64,
    pub mean_selected: f64,
    pub cost_reduction: f64,
    /// External router requests issued during the run; not part of the cost model.
    pub router_calls: usize,
    pub fallback_decisions: usize,
    /// Queries whose text embedded to the zero vector, scored as misses.
    pub unembeddable_queries: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub routing: Option<RoutingStats>,
    pub by_source: BTreeMap<String, Breakdown>,
    pub by_category: BTreeMap<String, Breakdown>,
}

struct Outcome {
    query_id: String,
    r1: f64,
    r5: f64,
    r10: f64,
    rr: f64,
    n5: f64,
    n10: f64,
    selected: f64,
    unembeddable: bool,
    decision: Option<RoutingDecision>,
}

impl Outcome {
    fn score(query: &QueryRecord, ranking: &[&ClipRef], selected: f64, unembeddable: bool) -> Self {
        let gold = &query.gold;
        let ranking: &[&ClipRef] = if unembeddable { &[] } else { ranking };
        let r = || ranking.iter().copied();
        Outcome {
            query_id: query.query_id.clone(),
            r1: recall_at_k(r(), gold, 1),
            r5: recall_at_k(r(), gold, 5),
            r10: recall_at_k(r(), gold, 10),
            rr: reciprocal_rank(r(), gold),
            n5: ndcg_at_k(r(), gold, 5),
            n10: ndcg_at_k(r(), gold, 10),
            selected,
            unembeddable,
            decision: None,
        }
    }
}

fn evaluate_one(
    query: &QueryRecord,
    indices: &IndexSet,
    method: Method<'_>,
    config: &EvalConfig,
) -> Result<Outcome, EvalError> {
    let search = config.search();
    if let Method::AllText = method {
        let (clips, unembeddable) = retrieve_field(indices, IndexField::Fused, &query.text, &search)?;
        let refs: Vec<&ClipRef> = clips.iter().collect();
        // One index, but it stands in for searching every modality's content.
        return Ok(Outcome::score(query, &refs, TOTAL_MODALITIES as f64, unembeddable));
    }
    let decision = match method {
        Method::Routed(router) => route(router, query, &config.router)?,
        Method::LateFusionAll => route(&SelectAllRouter, query, &RouterConfig::default())?,
        Method::Single(m) => RoutingDecision::single(m, &query.text, crate::router::Origin::Oracle),
        Method::AllText => unreachable!(),
    };
    let retrieval = retrieve(indices, &decision, &query.text, &search)?;
    let refs: Vec<&ClipRef> = retrieval.ranking.clips().collect();
    let mut out = Outcome::score(query, &refs, decision.len() as f64, retrieval.unembeddable);
    out.decision = Some(decision);
    Ok(out)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn breakdown<'a>(group: impl Iterator<Item = &'a Outcome> + Clone) -> Breakdown {
    Breakdown {
        queries: group.clone().count(),
        recall_at_5: mean(group.clone().map(|o| o.r5)),
        mean_selected: mean(group.map(|o| o.selected)),
    }
}

/// Evaluates `method` over `queries`. Per-query work may run in parallel;
/// aggregation always sums in `query_id` order, so output does not depend on
/// the execution mode.
pub fn run_evaluation(
    corpus: &Corpus,
    queries: &[QueryRecord],
    indices: &IndexSet,
    method: Method<'_>,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    for field in method.required_fields() {
        indices.require(field)?;
    }
    if let Some(q) = queries.iter().find(|q| !corpus.contains(&q.gold)) {
        return Err(EvalError::UnknownGold { query_id: q.query_id.clone(), gold: q.gold.to_string() });
    }
    let calls_before = match method {
        Method::Routed(r) => r.calls(),
        _ => 0,
    };

    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.sort_by(|&a, &b| queries[a].query_id.cmp(&queries[b].query_id));
    let sorted: Vec<&QueryRecord> = order.iter().map(|&i| &queries[i]).collect();
    let outcomes = exec::try_map(config.exec, &sorted, |q| evaluate_one(q, indices, method, config))?;

    let router_calls = match method {
        Method::Routed(r) => r.calls() - calls_before,
        _ => 0,
    };
    let mean_selected = mean(outcomes.iter().map(|o| o.selected));

    let routing = match method {
        Method::Routed(_) => {
            let decisions: Vec<RoutingDecision> = outcomes.iter().filter_map(|o| o.decision.clone()).collect();
            let gold: Vec<Option<SourceLabel>> = sorted.iter().map(|q| q.source).collect();
            routing_stats(&decisions, &gold)
        }
        _ => None,
    };
    let fallback_decisions = outcomes
        .iter()
        .filter_map(|o| o.decision.as_ref())
        .filter(|d| d.origin() == crate::router::Origin::FallbackAll)
        .count();

    let mut by_source: BTreeMap<String, Vec<&Outcome>> = BTreeMap::new();
    let mut by_category: BTreeMap<String, Vec<&Outcome>> = BTreeMap::new();
    for (q, o) in sorted.iter().zip(&outcomes) {
        let source = q.source.map_or("unlabeled", SourceLabel::wire_name);
        by_source.entry(source.to_owned()).or_default().push(o);
        if let Some(c) = &q.category {
            by_category.entry(c.clone()).or_default().push(o);
        }
    }
    let collapse = |m: BTreeMap<String, Vec<&Outcome>>| {
        m.into_iter().map(|(k, v)| (k, breakdown(v.into_iter()))).collect::<BTreeMap<_, _>>()
    };

    Ok(EvalReport {
        method: method.label(),
        queries: outcomes.len(),
        recall_at_1: mean(outcomes.iter().map(|o| o.r1)),
        recall_at_5: mean(outcomes.iter().map(|o| o.r5)),
        recall_at_10: mean(outcomes.iter().map(|o| o.r10)),
        mrr: mean(outcomes.iter().map(|o| o.rr)),
        ndcg_at_5: mean(outcomes.iter().map(|o| o.n5)),
        ndcg_at_10: mean(outcomes.iter().map(|o| o.n10)),
        mean_selected,
        cost_reduction: if outcomes.is_empty() { 0.0 } else { cost_reduction(mean_selected, TOTAL_MODALITIES) },
        router_calls,
        fallback_decisions,
        unembeddable_queries: outcomes.iter().filter(|o| o.unembeddable).map(|o| o.query_id.clone()).collect(),
        routing,
        by_source: collapse(by_source),
        by_category: collapse(by_category),
    })
}

/// Run settings recorded alongside the reports.
#[derive(Clone, Debug, Serialize)]
pub struct EvalSettings {
    pub embedder: crate::embed::EmbedderSpec,
    pub depth: usize,
    pub fusion: String,
    pub rrf_k: f64,
    pub routing_mode: String,
    pub use_rewrites: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalDocument {
    pub settings: EvalSettings,
    pub ndcg_legend: &'static str,
    pub reports: Vec<EvalReport>,
}

impl EvalDocument {
    pub fn new(settings: EvalSettings, reports: Vec<EvalReport>) -> Self {
        Self { settings, ndcg_legend: NDCG_LEGEND, reports }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| EvalError::Io { path: path.to_owned(), source })
    }

    /// Flattens the breakdown tables: one row per (method, group kind, group).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["method", "breakdown", "group", "queries", "recall@5", "mean_selected"])?;
        for r in &self.reports {
            let overall = Breakdown { queries: r.queries, recall_at_5: r.recall_at_5, mean_selected: r.mean_selected };
            let rows = std::iter::once(("overall", "all", &overall))
                .chain(r.by_source.iter().map(|(k, b)| ("source", k.as_str(), b)))
                .chain(r.by_category.iter().map(|(k, b)| ("category", k.as_str(), b)));
            for (kind, group, b) in rows {
                w.write_record([
                    r.method.as_str(),
                    kind,
                    group,
                    &b.queries.to_string(),
                    &b.recall_at_5.to_string(),
                    &b.mean_selected.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|source| EvalError::Io { path: path.to_owned(), source })
    }
}
