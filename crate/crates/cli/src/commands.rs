use std::path::Path;

use anyhow::Context;
use serde_json::{json, Value};
use vidroute::corpus::load_queries;
use vidroute::eval::{run_evaluation, EvalConfig, EvalDocument, EvalReport, EvalSettings, Method};
use vidroute::index::BuildStats;
use vidroute::router::{
    route, AuditLog, HttpChatBackend, LlmRouter, OracleRouter, ReplayBackend, Router, RoutingDecision, RuleRouter,
    SelectAllRouter,
};
use vidroute::synth::generate_synthetic_corpus;
use vidroute::{Corpus, EmbedderSpec, Execution, IndexField, IndexSet, ModalityIndex, QueryRecord, SearchConfig};

use crate::config::{MethodSpec, RouterKind, RunConfig};
use crate::Failure;

pub enum Request {
    GenCorpus,
    BuildIndex,
    Route { text: String, query_id: String },
    Query { text: String, query_id: String, top: usize },
    Evaluate,
}

pub fn run(request: Request, config: RunConfig) -> Result<(), Failure> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = config.workers {
            b = b.num_threads(n);
        }
        b.build().context("starting worker pool")?
    };
    pool.install(|| match request {
        Request::GenCorpus => gen_corpus(&config),
        Request::BuildIndex => build_index(&config),
        Request::Route { text, query_id } => cmd_route(&config, &text, &query_id),
        Request::Query { text, query_id, top } => cmd_query(&config, &text, &query_id, top),
        Request::Evaluate => evaluate(&config),
    })
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn required_out(config: &RunConfig) -> Result<&Path, Failure> {
    config.out.as_deref().ok_or_else(|| usage("no output location given (--out or config key `out`)"))
}

fn gen_corpus(config: &RunConfig) -> Result<(), Failure> {
    let out = required_out(config)?;
    if out.is_file() {
        return Err(usage(format!("output {} is a file, expected a directory", out.display())));
    }
    let synthetic = generate_synthetic_corpus(config.seed, config.videos, config.clips_per_video)
        .map_err(|e| usage(e.to_string()))?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let corpus_path = out.join("corpus.jsonl");
    let queries_path = out.join("queries.jsonl");
    synthetic.corpus.write(&corpus_path)?;
    vidroute::corpus::write_queries(&queries_path, &synthetic.queries)?;

    let cov = synthetic.corpus.coverage();
    println!("wrote {} ({} clips) and {} ({} queries), seed {}",
        corpus_path.display(), cov.clips, queries_path.display(), synthetic.queries.len(), config.seed);
    println!("coverage: asr {:.3}  ocr {:.3}  visuals {:.3}  fused {:.3}", cov.asr, cov.ocr, cov.visuals, cov.fused);
    let cats: Vec<String> = synthetic.corpus.categories().iter().map(|(c, n)| format!("{c} {n}")).collect();
    println!("categories: {}", cats.join(", "));
    Ok(())
}

fn print_stats(field: IndexField, stats: &BuildStats) {
    println!("{:<8} indexed {:>6}  skipped {:>6}", field.wire_name(), stats.indexed, stats.skipped);
    if stats.empty {
        log::warn!("index `{field}` is empty: no clip has {field} content");
        eprintln!("warning: index `{field}` is empty");
    }
}

fn build_index(config: &RunConfig) -> Result<(), Failure> {
    let corpus_path = config.require_file("corpus", &config.corpus).map_err(Failure::Usage)?;
    let out = required_out(config)?;
    if out.is_file() {
        return Err(usage(format!("output {} is a file, expected a directory", out.display())));
    }
    let corpus = Corpus::load(&corpus_path)?;
    let mut fields = IndexField::ALL[..3].to_vec();
    if config.with_fused {
        fields.push(IndexField::Fused);
    }
    let spec = EmbedderSpec { name: config.embedder.clone(), ..EmbedderSpec::reference(config.dim) };
    // everything is built in memory first so a failure leaves no partial directory
    let indices = vidroute::index::build_indices(&corpus, &fields, &spec, Execution::default())?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for idx in &indices {
        idx.write_to(out.join(ModalityIndex::file_name(idx.field())))?;
    }
    println!("built {} indices over {} clips into {} ({} dim {})",
        indices.len(), corpus.len(), out.display(), spec.name, spec.dim);
    for idx in &indices {
        print_stats(idx.field(), idx.stats());
    }
    Ok(())
}

fn make_router(config: &RunConfig) -> Result<Box<dyn Router>, Failure> {
    config.validate_router().map_err(Failure::Usage)?;
    let in_flight = config.routing.llm.max_in_flight;
    Ok(match config.router {
        RouterKind::Rule => Box::new(RuleRouter),
        RouterKind::Oracle => Box::new(OracleRouter),
        RouterKind::All => Box::new(SelectAllRouter),
        RouterKind::Replay => {
            let path = config.replay.as_ref().expect("validated");
            Box::new(LlmRouter::new(ReplayBackend::load(path)?, in_flight).labelled("replay"))
        }
        RouterKind::Llm => {
            let audit = match &config.audit_log {
                Some(p) => Some(AuditLog::open(p).with_context(|| format!("opening audit log {}", p.display()))?),
                None => None,
            };
            let backend = HttpChatBackend::new(config.routing.llm.clone(), audit).map_err(|e| usage(e.to_string()))?;
            Box::new(LlmRouter::new(backend, in_flight))
        }
    })
}

fn decision_json(d: &RoutingDecision) -> Value {
    serde_json::from_str(&d.wire_json()).expect("wire form is JSON")
}

fn adhoc_query(text: &str, query_id: &str) -> Result<QueryRecord, Failure> {
    if text.trim().is_empty() {
        return Err(usage("query text is empty"));
    }
    Ok(QueryRecord::adhoc(query_id, text))
}

fn cmd_route(config: &RunConfig, text: &str, query_id: &str) -> Result<(), Failure> {
    let query = adhoc_query(text, query_id)?;
    let router = make_router(config)?;
    let d = route(router.as_ref(), &query, &config.routing)?;
    let mut out = json!({"decision": decision_json(&d), "origin": d.origin()});
    if let Some(raw) = d.raw_response() {
        out["raw_response"] = Value::String(raw.to_owned());
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn load_indices(config: &RunConfig) -> Result<IndexSet, Failure> {
    let dir = config.require_dir("index directory", &config.index_dir).map_err(Failure::Usage)?;
    IndexSet::load_dir(&dir).map_err(|e| Failure::Runtime(anyhow::Error::new(e).context(format!("loading {}", dir.display()))))
}

fn search_config(config: &RunConfig) -> SearchConfig {
    SearchConfig { depth: config.depth, fusion: config.fusion, use_rewrites: config.use_rewrites }
}

fn cmd_query(config: &RunConfig, text: &str, query_id: &str, top: usize) -> Result<(), Failure> {
    let query = adhoc_query(text, query_id)?;
    let indices = load_indices(config)?;
    let router = make_router(config)?;
    let d = route(router.as_ref(), &query, &config.routing)?;
    for m in d.modalities() {
        if indices.get(m.into()).is_none() {
            return Err(usage(format!("missing index for selected modality `{m}` in the index directory")));
        }
    }
    let retrieval = vidroute::retrieve(&indices, &d, &query.text, &search_config(config))?;
    let results: Vec<_> = retrieval.ranking.items.iter().take(top).collect();
    let out = json!({
        "query": query.text,
        "decision": decision_json(&d),
        "origin": d.origin(),
        "fusion": retrieval.ranking.method,
        "depth": config.depth,
        "unembeddable": retrieval.unembeddable,
        "results": results,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn print_summary(reports: &[EvalReport], to_stdout: bool) {
    let mut lines = vec![format!(
        "{:<22} {:>6} {:>6} {:>6} {:>6} {:>7} {:>8} {:>9} {:>6}",
        "method", "R@1", "R@5", "R@10", "MRR", "NDCG@5", "NDCG@10", "mean mod", "cost"
    )];
    for r in reports {
        lines.push(format!(
            "{:<22} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>7.3} {:>8.3} {:>9.2} {:>5.1}%",
            r.method, r.recall_at_1, r.recall_at_5, r.recall_at_10, r.mrr, r.ndcg_at_5, r.ndcg_at_10,
            r.mean_selected, 100.0 * r.cost_reduction
        ));
        if let Some(s) = &r.routing {
            lines.push(format!(
                "{:<22} hit {:.3}  micro-F1 {:.3}  coverage {:.2}  router calls {}  fallbacks {}",
                "", s.hit_rate, s.micro_f1, s.coverage_error, r.router_calls, r.fallback_decisions
            ));
        }
    }
    for l in lines {
        if to_stdout {
            println!("{l}");
        } else {
            eprintln!("{l}");
        }
    }
}

fn evaluate(config: &RunConfig) -> Result<(), Failure> {
    let corpus_path = config.require_file("corpus", &config.corpus).map_err(Failure::Usage)?;
    let queries_path = config.require_file("queries", &config.queries).map_err(Failure::Usage)?;
    for out in config.out.iter().chain(&config.csv) {
        let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if !parent.is_dir() {
            return Err(usage(format!("output directory {} does not exist", parent.display())));
        }
    }
    let indices = load_indices(config)?;
    let router =
        if config.methods.contains(&MethodSpec::Routed) { Some(make_router(config)?) } else { None };
    let methods: Vec<Method<'_>> = config
        .methods
        .iter()
        .map(|m| match m {
            MethodSpec::Routed => Method::Routed(router.as_deref().expect("built above")),
            MethodSpec::AllText => Method::AllText,
            MethodSpec::LateFusionAll => Method::LateFusionAll,
            MethodSpec::Single(m) => Method::Single(*m),
        })
        .collect();
    for m in &methods {
        for f in m.required_fields() {
            if indices.get(f).is_none() {
                let hint = if f == IndexField::Fused { " (rebuild with --with-fused)" } else { "" };
                return Err(usage(format!("method {} needs the `{f}` index{hint}", m.label())));
            }
        }
    }
    let corpus = Corpus::load(&corpus_path)?;
    let queries = load_queries(&queries_path)?;

    let eval_config = EvalConfig {
        depth: config.depth,
        fusion: config.fusion,
        router: config.routing.clone(),
        use_rewrites: config.use_rewrites,
        exec: Execution::default(),
    };
    let reports = methods
        .iter()
        .map(|&m| run_evaluation(&corpus, &queries, &indices, m, &eval_config))
        .collect::<Result<Vec<_>, _>>()?;
    let settings = EvalSettings {
        embedder: indices.spec().clone(),
        depth: config.depth,
        fusion: config.fusion.method.to_string(),
        rrf_k: config.fusion.rrf_k,
        routing_mode: format!("{:?}", config.routing.mode).to_ascii_lowercase(),
        use_rewrites: config.use_rewrites,
        seed: config.seed_given.then_some(config.seed),
    };
    let doc = EvalDocument::new(settings, reports);
    match &config.out {
        Some(p) => doc.write_json(p)?,
        None => print!("{}", doc.to_json()),
    }
    if let Some(p) = &config.csv {
        doc.write_csv(p)?;
    }
    print_summary(&doc.reports, config.out.is_some());
    Ok(())
}
