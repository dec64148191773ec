//! Case-level relevance: align every query sentence with its top-K most
//! similar candidate sentences and take the geometric mean of the surviving
//! cosines.
//!
//! Pairs with cosine ≤ 0 are dropped before aggregation. A geometric mean
//! keeps the score low whenever any aligned pair is weak.

use serde::{Deserialize, Serialize};

use crate::corpus::{CandidateCase, Query};
use crate::scorers::{cosine, EmbeddingBackend, ScoreError};

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedPair {
    pub query_index: usize,
    pub case_index: usize,
    pub score: f64,
}

/// Top-`k` case sentences per query sentence, cosine ≤ 0 removed.
///
/// Output is grouped by query sentence, each group in descending score with
/// ties broken by ascending case-sentence index.
pub fn align_top_k(
    query_vectors: &[Vec<f64>],
    case_vectors: &[Vec<f64>],
    k: usize,
) -> Result<Vec<AlignedPair>, ScoreError> {
    let mut pairs = Vec::new();
    if k == 0 {
        return Ok(pairs);
    }
    for (qi, qv) in query_vectors.iter().enumerate() {
        let mut row = case_vectors
            .iter()
            .enumerate()
            .map(|(ci, cv)| cosine(qv, cv).map(|s| (ci, s)))
            .collect::<Result<Vec<_>, _>>()?;
        row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        pairs.extend(
            row.into_iter()
                .take(k)
                .filter(|&(_, s)| s > 0.0)
                .map(|(case_index, score)| AlignedPair { query_index: qi, case_index, score }),
        );
    }
    Ok(pairs)
}

/// Which exponent the geometric mean uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentMode {
    /// `1 / m` with m the number of surviving pairs.
    #[default]
    Surviving,
    /// `1 / (N_q · K)` regardless of filtering.
    Nominal,
}

/// Geometric mean of the pair scores, computed in log space; 0 for no pairs.
pub fn induce_case_score(pairs: &[AlignedPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    geometric(pairs, pairs.len())
}

/// As [`induce_case_score`], with the exponent chosen by `mode`.
pub fn induce_case_score_with(pairs: &[AlignedPair], mode: ExponentMode, n_query: usize, k: usize) -> f64 {
    match mode {
        ExponentMode::Surviving => induce_case_score(pairs),
        ExponentMode::Nominal => {
            let n = n_query * k;
            if pairs.is_empty() || n == 0 {
                0.0
            } else {
                geometric(pairs, n)
            }
        }
    }
}

fn geometric(pairs: &[AlignedPair], n: usize) -> f64 {
    let log_sum: f64 = pairs.iter().map(|p| p.score.ln()).sum();
    (log_sum / n as f64).exp().min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSentences {
    pub q_idx: usize,
    pub c_idx: usize,
    pub q_text: String,
    pub c_text: String,
    pub cos: f64,
}

/// Aligned sentence pairs for one (query, case), with the induced score.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseExplanation {
    pub k: usize,
    pub n_query: usize,
    pub n_case: usize,
    pub pairs: Vec<AlignedSentences>,
    pub r_case: f64,
}

pub fn build_case_explanation(
    query: &Query,
    case: &CandidateCase,
    backend: &EmbeddingBackend,
    k: usize,
    mode: ExponentMode,
) -> Result<CaseExplanation, ScoreError> {
    let qv = backend.embed_document(&query.id, &query.sentences)?;
    let cv = backend.embed_document(&case.id, &case.sentences)?;
    explain_aligned(query, case, &qv, &cv, k, mode)
}

/// Same as [`build_case_explanation`] with precomputed sentence vectors.
pub fn explain_aligned(
    query: &Query,
    case: &CandidateCase,
    query_vectors: &[Vec<f64>],
    case_vectors: &[Vec<f64>],
    k: usize,
    mode: ExponentMode,
) -> Result<CaseExplanation, ScoreError> {
    let aligned = align_top_k(query_vectors, case_vectors, k)?;
    let r_case = induce_case_score_with(&aligned, mode, query.sentences.len(), k);
    let pairs = aligned
        .iter()
        .map(|p| AlignedSentences {
            q_idx: p.query_index,
            c_idx: p.case_index,
            q_text: query.sentences[p.query_index].clone(),
            c_text: case.sentences[p.case_index].clone(),
            cos: p.score,
        })
        .collect();
    Ok(CaseExplanation {
        k,
        n_query: query.sentences.len(),
        n_case: case.sentences.len(),
        pairs,
        r_case,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseExplanationRecord {
    pub query_id: String,
    pub case_id: String,
    pub k: usize,
    pub pairs: Vec<AlignedSentences>,
    pub r_case: f64,
}

impl CaseExplanationRecord {
    pub fn new(query_id: &str, case_id: &str, exp: &CaseExplanation) -> Self {
        CaseExplanationRecord {
            query_id: query_id.to_string(),
            case_id: case_id.to_string(),
            k: exp.k,
            pairs: exp.pairs.clone(),
            r_case: exp.r_case,
        }
    }
}
