//! Pluggable scoring backends: query–case relevance, query–predicate
//! satisfaction, and sentence embeddings.
//!
//! Each has an external backend that reads precomputed files and a built-in
//! fallback (BM25, lexical overlap, hashed term frequencies) so the pipeline
//! runs with no model at hand.

mod bm25;
mod tables;
mod tokenize;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::corpus::{CandidateCase, Corpus, Query};
use crate::fol::PredicateDef;
use crate::rng::fnv1a;

pub use bm25::{Bm25Index, Bm25Params};
pub use tables::{EmbeddingTable, ScoreKind, ScoreTable};
pub use tokenize::{is_cjk, Tokenizer};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("cannot read {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("{file}:{line}: {message}")]
    Malformed { file: String, line: usize, message: String },
    #[error("{0}: missing header record")]
    MissingHeader(String),
    #[error("invalid score range [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error("score {score} for ({left}, {right}) is outside [{lo}, {hi}]")]
    OutOfRange { left: String, right: String, score: f64, lo: f64, hi: f64 },
    #[error("no score for pair ({0}, {1})")]
    MissingScore(String, String),
    #[error("no embedding for sentence `{0}`")]
    MissingEmbedding(String),
    #[error("vector dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite vector entry for `{0}`")]
    NonFinite(String),
    #[error("expected a {expected:?} score table, got {found:?}")]
    WrongKind { expected: ScoreKind, found: ScoreKind },
}

/// Id under which sentence `index` of document `doc_id` is looked up in an
/// embedding table: `"{doc_id}#{index}"`.
pub fn sentence_id(doc_id: &str, index: usize) -> String {
    format!("{doc_id}#{index}")
}

/// `dot(u, v) / (|u| |v|)`; zero if either vector is zero.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, ScoreError> {
    if u.len() != v.len() {
        return Err(ScoreError::DimensionMismatch { expected: u.len(), found: v.len() });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Built-in relevance: BM25 of the query text against the case text, with
/// statistics over the corpus case collection.
#[derive(Debug, Clone)]
pub struct Bm25Relevance {
    index: Bm25Index,
    tokenizer: Tokenizer,
    doc_tokens: HashMap<String, Vec<String>>,
}

impl Bm25Relevance {
    pub fn from_corpus(corpus: &Corpus, tokenizer: Tokenizer, params: Bm25Params) -> Self {
        let doc_tokens: HashMap<String, Vec<String>> = corpus
            .cases()
            .iter()
            .map(|c| (c.id.clone(), tokenizer.tokenize(&c.text)))
            .collect();
        let mut ids: Vec<&String> = doc_tokens.keys().collect();
        ids.sort();
        let index = Bm25Index::build(ids.iter().map(|id| doc_tokens[*id].as_slice()), params);
        Bm25Relevance { index, tokenizer, doc_tokens }
    }

    pub fn score(&self, query: &Query, case: &CandidateCase) -> f64 {
        let q = self.tokenizer.tokenize(&query.text);
        match self.doc_tokens.get(&case.id) {
            Some(d) => self.index.score(&q, d),
            None => self.index.score(&q, &self.tokenizer.tokenize(&case.text)),
        }
    }
}

#[derive(Debug, Clone)]
pub enum RelevanceBackend {
    /// Scores keyed `(query id, case id)`.
    External(Arc<ScoreTable>),
    Bm25(Arc<Bm25Relevance>),
}

impl RelevanceBackend {
    pub fn external(table: ScoreTable) -> Result<Self, ScoreError> {
        if table.kind() != ScoreKind::Relevance {
            return Err(ScoreError::WrongKind { expected: ScoreKind::Relevance, found: table.kind() });
        }
        Ok(RelevanceBackend::External(Arc::new(table)))
    }

    pub fn neural_relevance(&self, query: &Query, case: &CandidateCase) -> Result<f64, ScoreError> {
        match self {
            RelevanceBackend::External(table) => table
                .get(&query.id, &case.id)
                .ok_or_else(|| ScoreError::MissingScore(query.id.clone(), case.id.clone())),
            RelevanceBackend::Bm25(bm25) => Ok(bm25.score(query, case)),
        }
    }
}

/// Share of the predicate's unique tokens that occur in the query.
pub fn lexical_predicate_score(query_text: &str, predicate_text: &str, tokenizer: Tokenizer) -> f64 {
    let predicate: HashSet<String> = tokenizer.tokenize(predicate_text).into_iter().collect();
    if predicate.is_empty() {
        return 0.0;
    }
    let query: HashSet<String> = tokenizer.tokenize(query_text).into_iter().collect();
    predicate.iter().filter(|t| query.contains(*t)).count() as f64 / predicate.len() as f64
}

#[derive(Debug, Clone)]
pub enum PredicateBackend {
    /// Scores keyed `(query id, predicate id)`, range within `[0, 1]`.
    External(Arc<ScoreTable>),
    Lexical(Tokenizer),
}

impl PredicateBackend {
    pub fn external(table: ScoreTable) -> Result<Self, ScoreError> {
        if table.kind() != ScoreKind::Predicate {
            return Err(ScoreError::WrongKind { expected: ScoreKind::Predicate, found: table.kind() });
        }
        let (lo, hi) = table.range();
        if lo < 0.0 || hi > 1.0 {
            return Err(ScoreError::InvalidRange(lo, hi));
        }
        Ok(PredicateBackend::External(Arc::new(table)))
    }

    pub fn predicate_score(&self, query: &Query, predicate: &PredicateDef) -> Result<f64, ScoreError> {
        let score = match self {
            PredicateBackend::External(table) => table
                .get(&query.id, &predicate.id)
                .ok_or_else(|| ScoreError::MissingScore(query.id.clone(), predicate.id.clone()))?,
            PredicateBackend::Lexical(tok) => lexical_predicate_score(&query.text, &predicate.text, *tok),
        };
        if !(0.0..=1.0).contains(&score) {
            return Err(ScoreError::OutOfRange {
                left: query.id.clone(),
                right: predicate.id.clone(),
                score,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(score)
    }
}

pub const DEFAULT_EMBEDDING_DIM: usize = 512;

#[derive(Debug, Clone)]
pub enum EmbeddingBackend {
    /// Vectors keyed by [`sentence_id`].
    External(Arc<EmbeddingTable>),
    /// Token counts hashed into `dim` buckets, then L2-normalized.
    Hashed { dim: usize, tokenizer: Tokenizer },
}

impl Default for EmbeddingBackend {
    fn default() -> Self {
        EmbeddingBackend::Hashed { dim: DEFAULT_EMBEDDING_DIM, tokenizer: Tokenizer::Mixed }
    }
}

pub fn hashed_embedding(text: &str, dim: usize, tokenizer: Tokenizer) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    if dim == 0 {
        return v;
    }
    for token in tokenizer.tokenize(text) {
        v[(fnv1a(token.as_bytes()) % dim as u64) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

impl EmbeddingBackend {
    pub fn dim(&self) -> usize {
        match self {
            EmbeddingBackend::External(t) => t.dim(),
            EmbeddingBackend::Hashed { dim, .. } => *dim,
        }
    }

    pub fn embed_sentence(&self, sentence_id: &str, text: &str) -> Result<Vec<f64>, ScoreError> {
        match self {
            EmbeddingBackend::External(table) => table
                .get(sentence_id)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| ScoreError::MissingEmbedding(sentence_id.to_string())),
            EmbeddingBackend::Hashed { dim, tokenizer } => Ok(hashed_embedding(text, *dim, *tokenizer)),
        }
    }

    /// Embeds every sentence of a document, ids `"{doc_id}#{i}"`.
    pub fn embed_document(&self, doc_id: &str, sentences: &[String]) -> Result<Vec<Vec<f64>>, ScoreError> {
        sentences
            .iter()
            .enumerate()
            .map(|(i, s)| self.embed_sentence(&sentence_id(doc_id, i), s))
            .collect()
    }
}
