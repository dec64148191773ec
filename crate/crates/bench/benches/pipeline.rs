use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use juris_bench::{default_engine, module_rankings, synthetic_corpus};
use juris_core::fol::{eval_formula, parse_rulebase};
use juris_core::fusion::{fuse, FusionConfig};

fn fusion(c: &mut Criterion) {
    let cfg = FusionConfig::default();
    let mut group = c.benchmark_group("fuse");
    for n in [30, 100, 1000] {
        let rankings = module_rankings(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &rankings, |b, r| b.iter(|| fuse(black_box(r), &cfg)));
    }
    group.finish();
}

fn formula(c: &mut Criterion) {
    let base = parse_rulebase(
        r#"
pred a @264 : "takes property"
pred b @264 : "secretly"
pred c @264 : "large amount"
pred d @264 : "repeatedly"
pred e @264 : "by force"
article 264 : a & (b | !e) & (c | d) -> "theft"
"#,
    )
    .unwrap();
    let rule = &base.rules()[0];
    let scores = std::collections::HashMap::from([
        ("a".to_string(), 0.9),
        ("b".to_string(), 0.7),
        ("c".to_string(), 0.4),
        ("d".to_string(), 0.6),
        ("e".to_string(), 0.1),
    ]);
    c.bench_function("eval_formula", |b| b.iter(|| eval_formula(black_box(&rule.body), &scores)));
}

fn pipeline(c: &mut Criterion) {
    let corpus = synthetic_corpus(20, 30);
    let engine = default_engine(&corpus, 1);
    let q = corpus.queries()[0].id.clone();
    c.bench_function("rank_query", |b| b.iter(|| engine.rank_query(black_box(&q)).unwrap()));
    let mut group = c.benchmark_group("rank_all");
    group.sample_size(10);
    group.bench_function("20x30", |b| b.iter(|| engine.rank_all().unwrap()));
    group.finish();
}

criterion_group!(benches, fusion, formula, pipeline);
criterion_main!(benches);
