//! Shared inputs for the criterion benches.

use std::sync::Arc;

use juris_core::corpus::Corpus;
use juris_core::fusion::{ModuleKind, ModuleRanking};
use juris_core::pipeline::{Engine, EngineConfig};
use juris_core::scorers::{Bm25Params, Bm25Relevance, EmbeddingBackend, PredicateBackend, RelevanceBackend, Tokenizer};
use juris_core::synthetic::{generate, SyntheticConfig};

pub fn synthetic_corpus(n_queries: usize, n_candidates: usize) -> Corpus {
    generate(&SyntheticConfig { n_queries, n_candidates, ..SyntheticConfig::default() })
        .corpus()
        .expect("synthetic corpus is well formed")
}

/// Engine with the built-in BM25, lexical predicate and hashed embedding
/// backends, as the CLI uses when no score files are given.
pub fn default_engine(corpus: &Corpus, threads: usize) -> Engine<'_> {
    let relevance = RelevanceBackend::Bm25(Arc::new(Bm25Relevance::from_corpus(
        corpus,
        Tokenizer::Mixed,
        Bm25Params::default(),
    )));
    Engine::new(
        corpus,
        relevance,
        PredicateBackend::Lexical(Tokenizer::Mixed),
        EmbeddingBackend::default(),
        EngineConfig { threads, ..EngineConfig::default() },
    )
    .expect("default engine config is valid")
}

/// Three module orderings over `n` candidates, shuffled by distinct strides.
pub fn module_rankings(n: usize) -> Vec<ModuleRanking> {
    let ids: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    [(ModuleKind::Neural, 1), (ModuleKind::Law, 7919), (ModuleKind::Case, 104_729)]
        .into_iter()
        .map(|(kind, stride)| {
            let mut order: Vec<String> = Vec::with_capacity(n);
            let mut seen = vec![false; n];
            for i in 0..n {
                let mut j = (i * stride) % n;
                while seen[j] {
                    j = (j + 1) % n;
                }
                seen[j] = true;
                order.push(ids[j].clone());
            }
            ModuleRanking::from_order(kind, order)
        })
        .collect()
}
