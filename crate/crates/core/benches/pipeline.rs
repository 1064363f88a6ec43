use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vidroute::eval::{run_evaluation, EvalConfig, Method};
use vidroute::index::build_indices;
use vidroute::router::RuleRouter;
use vidroute::synth::generate_synthetic_corpus;
use vidroute::{EmbedderSpec, Execution, IndexField, IndexSet, Modality};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn benches(c: &mut Criterion) {
    let data = generate_synthetic_corpus(1, 100, 5).unwrap();
    let spec = EmbedderSpec::default();
    let indices = IndexSet::build(&data.corpus, &IndexField::ALL, &spec, Execution::default()).unwrap();

    let mut g = c.benchmark_group("build_indices");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_indices(black_box(&data.corpus), &IndexField::ALL, &spec, exec).unwrap())
        });
    }
    g.finish();

    let asr = indices.get(Modality::Asr.into()).unwrap();
    let vectors: Vec<_> = data.queries.iter().map(|q| indices.embedder().embed(&q.text)).collect();
    let mut g = c.benchmark_group("search_batch");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| asr.search_batch(exec, black_box(&vectors), 50).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("run_evaluation");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = EvalConfig { exec, ..EvalConfig::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                run_evaluation(&data.corpus, black_box(&data.queries), &indices, Method::Routed(&RuleRouter), &cfg)
                    .unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(pipeline, benches);
criterion_main!(pipeline);
