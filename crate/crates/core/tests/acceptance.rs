//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use vidroute::eval::{
    cost_reduction, graded_relevance, ndcg_at_k, routing_stats, run_evaluation, EvalConfig, EvalReport, Method,
};
use vidroute::fusion::{linear_fuse, rrf_fuse};
use vidroute::index::RankedList;
use vidroute::router::{parse_router_response, route, Origin, OracleRouter, RouterConfig, RuleRouter};
use vidroute::synth::{generate_synthetic_corpus, SyntheticCorpus};
use vidroute::{ClipRef, EmbedderSpec, Execution, IndexField, IndexSet, Modality, QueryRecord};

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn c(video: &str, start: u64) -> ClipRef {
    ClipRef::new(video, start, start + 10).unwrap()
}

fn fusion_oracle() -> Check {
    let started = Instant::now();
    let mut rng = common::rng(1);
    for i in 0..200 {
        let inst = common::random_instance(&mut rng);
        let refs: Vec<&RankedList> = inst.lists.iter().collect();
        let lin: Vec<_> = linear_fuse(&refs, inst.depth)
            .map_err(|e| e.to_string())?
            .items
            .into_iter()
            .map(|it| (it.clip_id.to_string(), it.fused_score))
            .collect();
        ensure!(lin == common::oracle_order(&inst.lists, |r| (inst.depth - r) as f64), "linear instance {i} differs");
        let rrf: Vec<_> = rrf_fuse(&refs, 60.0)
            .map_err(|e| e.to_string())?
            .items
            .into_iter()
            .map(|it| (it.clip_id.to_string(), it.fused_score))
            .collect();
        ensure!(rrf == common::oracle_order(&inst.lists, |r| 1.0 / (60.0 + r as f64)), "rrf instance {i} differs");
    }
    ensure!(started.elapsed() < Duration::from_secs(5), "took {:?}", started.elapsed());
    Ok(())
}

fn fusion_spot_values() -> Check {
    let (a, b) = (c("a", 0), c("b", 0));
    let asr = common::list(Modality::Asr, &[a.clone(), b.clone()], 10);
    let ocr = common::list(Modality::Ocr, &[c("x", 0), c("y", 0), a.clone()], 10);
    let fused = linear_fuse(&[&asr, &ocr], 10).map_err(|e| e.to_string())?;
    let score = fused.items.iter().find(|i| i.clip_id == a).map(|i| i.fused_score);
    ensure!(score == Some(16.0), "rank 1 + rank 3 at n=10 fused to {score:?}");
    let input: Vec<ClipRef> = (0..7).map(|i| c(&format!("v{i}"), 0)).rev().collect();
    let single = common::list(Modality::Visual, &input, 10);
    for r in [linear_fuse(&[&single], 10), rrf_fuse(&[&single], 60.0)] {
        let got: Vec<ClipRef> = r.map_err(|e| e.to_string())?.clips().cloned().collect();
        ensure!(got == input, "single-list fusion reordered its input");
    }
    Ok(())
}

fn relevance_boundary() -> Check {
    let gold = c("v", 0);
    ensure!(graded_relevance(&c("v", 10), &gold) == 0.5, "10 s neighbour");
    ensure!(graded_relevance(&c("v", 11), &gold) == 0.0, "11 s neighbour");
    ensure!(graded_relevance(&gold, &gold) == 1.0, "exact match");
    Ok(())
}

struct Synthetic {
    data: SyntheticCorpus,
    indices: IndexSet,
    oracle: EvalReport,
    rule: EvalReport,
    oracle_json: String,
    elapsed: Duration,
}

fn spec() -> EmbedderSpec {
    EmbedderSpec::default()
}

fn config() -> EvalConfig {
    EvalConfig { depth: 50, ..EvalConfig::default() }
}

fn synthetic_run() -> Result<Synthetic, String> {
    let started = Instant::now();
    let data = generate_synthetic_corpus(1, 200, 5).map_err(|e| e.to_string())?;
    let indices =
        IndexSet::build(&data.corpus, &IndexField::ALL, &spec(), Execution::default()).map_err(|e| e.to_string())?;
    let cfg = config();
    let oracle = run_evaluation(&data.corpus, &data.queries, &indices, Method::Routed(&OracleRouter), &cfg)
        .map_err(|e| e.to_string())?;
    let rule = run_evaluation(&data.corpus, &data.queries, &indices, Method::Routed(&RuleRouter), &cfg)
        .map_err(|e| e.to_string())?;
    let oracle_json = serde_json::to_string_pretty(&oracle).unwrap();
    Ok(Synthetic { data, indices, oracle, rule, oracle_json, elapsed: started.elapsed() })
}

fn ndcg_oracle(run: &Synthetic, extra: &[EvalReport]) -> Check {
    let gold = c("v", 20);
    let alone = [gold.clone(), c("x", 0), c("y", 0)];
    let expected = 1.0 / (1.0 + (2f64.sqrt() - 1.0) / 3f64.log2());
    let got = ndcg_at_k(&alone, &gold, 5);
    ensure!((got - 0.79279).abs() < 1e-4 && (got - expected).abs() < 1e-12, "gold-only NDCG@5 = {got}");
    let adjacent = [gold.clone(), c("v", 30)];
    let got = ndcg_at_k(&adjacent, &gold, 5);
    ensure!((got - 1.0).abs() < 1e-9, "gold + adjacent NDCG@5 = {got}");
    for r in [&run.oracle, &run.rule].into_iter().chain(extra) {
        ensure!(
            r.recall_at_1 <= r.recall_at_5 && r.recall_at_5 <= r.recall_at_10,
            "recall chain broken in {}",
            r.method
        );
    }
    Ok(())
}

fn cost_model(late: &EvalReport, singles: &[EvalReport]) -> Check {
    let cr = cost_reduction(1.78, 3);
    ensure!((cr - 0.40667).abs() < 1e-5 && (cr - (1.0 - 1.78 / 3.0)).abs() < 1e-9, "cost_reduction(1.78, 3) = {cr}");
    ensure!(late.cost_reduction == 0.0, "late fusion cost reduction {}", late.cost_reduction);
    for s in singles {
        ensure!((s.cost_reduction - 2.0 / 3.0).abs() < 1e-12, "{} cost reduction {}", s.method, s.cost_reduction);
    }
    Ok(())
}

fn end_to_end(run: &Synthetic) -> Check {
    ensure!(run.data.corpus.len() == 1000, "{} clips", run.data.corpus.len());
    ensure!(run.data.queries.len() == 3000, "{} queries", run.data.queries.len());
    let (o, r) = (&run.oracle, &run.rule);
    ensure!(o.recall_at_1 == 1.0, "oracle R@1 = {}", o.recall_at_1);
    ensure!(o.ndcg_at_5 == 1.0, "oracle NDCG@5 = {}", o.ndcg_at_5);
    let hit = r.routing.as_ref().map(|s| s.hit_rate);
    ensure!(hit == Some(1.0), "rule hit rate {hit:?}");
    ensure!(r.mean_selected < 3.0, "rule mean_selected {}", r.mean_selected);
    ensure!(run.elapsed < Duration::from_secs(180), "took {:?}", run.elapsed);
    Ok(())
}

fn routing_fixture() -> Check {
    let f = common::routing_fixture();
    let s = routing_stats(&f.decisions, &f.gold).ok_or("no labelled queries")?;
    ensure!(s.hit_rate == 5.0 / 6.0, "hit rate {}", s.hit_rate);
    ensure!(s.micro_f1 == 0.625, "micro-F1 {}", s.micro_f1);
    ensure!(s.coverage_error == 2.0, "coverage error {}", s.coverage_error);
    ensure!(s.confusion_counts == [[1, 0, 1], [1, 0, 1], [1, 0, 1]], "confusion {:?}", s.confusion_counts);
    for (g, row) in &s.confusion {
        ensure!((row.values().sum::<f64>() - 1.0).abs() < 1e-9, "row {g} does not sum to 1");
    }
    Ok(())
}

fn parser_robustness() -> Check {
    let rows = common::jsonl("noisy_transcripts.jsonl");
    ensure!(rows.len() == 10, "{} fixture rows", rows.len());
    for row in rows {
        let raw = row["raw_response"].as_str().unwrap().to_owned();
        let d = catch_unwind(|| parse_router_response(&raw, "query")).map_err(|_| format!("panic on {raw:?}"))?;
        if row["expected_origin"] == "fallback_all" {
            ensure!(d.origin() == Origin::FallbackAll && d.len() == 3, "{raw:?} did not fall back to all");
        } else {
            ensure!(d.origin() == Origin::Llm, "{raw:?} not parsed");
        }
    }
    Ok(())
}

fn determinism(run: &Synthetic) -> Check {
    let again = run_evaluation(&run.data.corpus, &run.data.queries, &run.indices, Method::Routed(&OracleRouter), &config())
        .map_err(|e| e.to_string())?;
    ensure!(serde_json::to_string_pretty(&again).unwrap() == run.oracle_json, "report bytes differ on rerun");
    let seq_cfg = EvalConfig { exec: Execution::Sequential, ..config() };
    let seq = run_evaluation(&run.data.corpus, &run.data.queries, &run.indices, Method::Routed(&RuleRouter), &seq_cfg)
        .map_err(|e| e.to_string())?;
    ensure!(
        serde_json::to_string(&seq).unwrap() == serde_json::to_string(&run.rule).unwrap(),
        "sequential and parallel reports differ"
    );
    let regen = generate_synthetic_corpus(1, 200, 5).map_err(|e| e.to_string())?;
    let rebuilt =
        IndexSet::build(&regen.corpus, &IndexField::ALL, &spec(), Execution::Sequential).map_err(|e| e.to_string())?;
    for field in IndexField::ALL {
        let (a, b) = (run.indices.get(field).unwrap(), rebuilt.get(field).unwrap());
        ensure!(a.to_bytes() == b.to_bytes(), "index {field} bytes differ on rebuild");
    }
    Ok(())
}

fn published_examples() -> Check {
    let cases = [
        ("Who says 'I'm not going anywhere' at the end?", Modality::Asr),
        ("What phrase appears on the protest sign?", Modality::Ocr),
        ("Describe the color and shape of the vehicle", Modality::Visual),
        ("A man is walking down a street in a city", Modality::Visual),
    ];
    for (i, (text, want)) in cases.into_iter().enumerate() {
        let d = route(&RuleRouter, &QueryRecord::adhoc(format!("ex{i}"), text), &RouterConfig::default())
            .map_err(|e| e.to_string())?;
        ensure!(d.contains(want), "{text:?} routed to {}", d.wire_json());
    }
    Ok(())
}

fn run(failures: &mut usize, id: &str, what: &str, check: impl FnOnce() -> Check) {
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
    match outcome {
        Ok(()) => println!("{id} PASS  {what}"),
        Err(why) => {
            *failures += 1;
            println!("{id} FAIL  {what}: {why}");
        }
    }
}

fn main() {
    let mut failures = 0;
    run(&mut failures, "AC1", "fusion orderings match brute-force oracle on 200 instances", fusion_oracle);
    run(&mut failures, "AC2", "linear fusion spot value 16 and single-list order", fusion_spot_values);
    run(&mut failures, "AC3", "graded relevance window boundary", relevance_boundary);

    let synthetic = synthetic_run();
    let baselines: Result<(EvalReport, Vec<EvalReport>), String> = synthetic.as_ref().map_err(Clone::clone).and_then(|s| {
        let cfg = config();
        let eval = |m| run_evaluation(&s.data.corpus, &s.data.queries, &s.indices, m, &cfg).map_err(|e| e.to_string());
        let late = eval(Method::LateFusionAll)?;
        let singles = Modality::ALL.into_iter().map(|m| eval(Method::Single(m))).collect::<Result<Vec<_>, _>>()?;
        Ok((late, singles))
    });
    let need = || synthetic.as_ref().map_err(Clone::clone);

    run(&mut failures, "AC4", "NDCG oracle values and recall monotonicity", || {
        let (late, singles) = baselines.as_ref().map_err(Clone::clone)?;
        let extra: Vec<EvalReport> = std::iter::once(late).chain(singles).cloned().collect();
        ndcg_oracle(need()?, &extra)
    });
    run(&mut failures, "AC5", "cost model on fixed values and baselines", || {
        let (late, singles) = baselines.as_ref().map_err(Clone::clone)?;
        cost_model(late, singles)
    });
    run(&mut failures, "AC6", "synthetic end-to-end run (1000 clips, 3000 queries, depth 50)", || {
        let s = need()?;
        println!("    oracle: R@1 {:.4} NDCG@5 {:.4}; rule: hit {:.4} mean_selected {:.4}; {:.1?}",
            s.oracle.recall_at_1, s.oracle.ndcg_at_5,
            s.rule.routing.as_ref().map_or(f64::NAN, |r| r.hit_rate), s.rule.mean_selected, s.elapsed);
        end_to_end(s)
    });
    run(&mut failures, "AC7", "six-query routing statistics fixture", routing_fixture);
    run(&mut failures, "AC8", "noisy LLM transcript parsing", parser_robustness);
    run(&mut failures, "AC9", "byte-identical reports and index rebuilds", || determinism(need()?));
    run(&mut failures, "AC10", "published example queries include their modality", published_examples);

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
