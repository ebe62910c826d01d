//! Sequential vs parallel execution for indexing, retrieval and evaluation.
//!
//! The `local` groups use the in-process providers as they are. The
//! `latency` group adds a fixed delay to every extraction call, which is
//! closer to the cost profile of a remote provider. Speedups depend on the
//! number of cores available to rayon.

#[path = "../tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use slimrag::extraction::{Decomposition, Extraction};
use slimrag::{
    build_index, load_hotpotqa, retrieve, run_eval, EntityExtractor, EvalScope, Execution, ExtractorConfig,
    LocalEmbedder, LocalExtractor, Pipeline, RetrievalParams,
};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

struct Delayed {
    inner: LocalExtractor,
    per_call: Duration,
}

impl EntityExtractor for Delayed {
    fn config(&self) -> &ExtractorConfig {
        self.inner.config()
    }

    fn extract(&self, text: &str, context: &[&str]) -> slimrag::Result<Extraction> {
        std::thread::sleep(self.per_call);
        self.inner.extract(text, context)
    }

    fn decompose(&self, query: &str) -> slimrag::Result<Decomposition> {
        self.inner.decompose(query)
    }
}

fn mode_name(m: Execution) -> &'static str {
    match m {
        Execution::Sequential => "sequential",
        Execution::Parallel => "parallel",
    }
}

fn bench_build(c: &mut Criterion) {
    let corpus = common::random_corpus(&mut ChaCha8Rng::seed_from_u64(7), 600, 40);
    let local = LocalExtractor::default();
    let delayed = Delayed {
        inner: LocalExtractor::default(),
        per_call: Duration::from_micros(200),
    };
    let e = LocalEmbedder::default();

    let mut g = c.benchmark_group("build_index");
    g.sample_size(10);
    for (label, x) in [("local", &local as &dyn EntityExtractor), ("latency", &delayed)] {
        for m in MODES {
            let p = Pipeline::new(x, &e).with_execution(m);
            g.bench_with_input(BenchmarkId::new(label, mode_name(m)), &p, |b, p| {
                b.iter(|| build_index(&corpus, p).unwrap())
            });
        }
    }
    g.finish();
}

fn bench_retrieve(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let corpus = common::random_corpus(&mut rng, 600, 40);
    let queries: Vec<String> = (0..20).map(|_| common::random_query(&mut rng)).collect();
    let x = LocalExtractor::default();
    let e = LocalEmbedder::default();
    let index = build_index(&corpus, &Pipeline::new(&x, &e)).unwrap();
    let params = RetrievalParams {
        k: 10,
        h: 20,
        ..RetrievalParams::default()
    };

    let mut g = c.benchmark_group("retrieve");
    for m in MODES {
        let p = Pipeline::new(&x, &e).with_execution(m);
        g.bench_with_input(BenchmarkId::new("local", mode_name(m)), &p, |b, p| {
            b.iter(|| {
                for q in &queries {
                    retrieve(&index, q, &params, p).unwrap();
                }
            })
        });
    }
    g.finish();
}

fn bench_eval(c: &mut Criterion) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/hotpotqa_smoke.json");
    let data = load_hotpotqa(&path).unwrap();
    let x = LocalExtractor::default();
    let e = LocalEmbedder::default();
    let params = RetrievalParams::default();

    let mut g = c.benchmark_group("run_eval");
    for scope in [EvalScope::PerExample, EvalScope::Pooled] {
        for m in MODES {
            let p = Pipeline::new(&x, &e).with_execution(m);
            g.bench_with_input(BenchmarkId::new(scope.to_string(), mode_name(m)), &p, |b, p| {
                b.iter(|| run_eval(&data.examples, p, &params, scope).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, bench_build, bench_retrieve, bench_eval);
criterion_main!(benches);
