//! Pretraining data for the predicate scorer.
//!
//! For each case: its fact text becomes a pseudo query, BM25 over predicate
//! texts picks positives among the predicates of the cited articles, and
//! negatives are drawn from uncited articles, hard from the cited chapters
//! and easy from the rest.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{write_jsonl, CandidateCase};
use crate::fol::{PredicateDef, RuleBase};
use crate::rng::substream;
use crate::scorers::{Bm25Index, Bm25Params, Tokenizer};

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("case `{0}` has empty text")]
    EmptyText(String),
    #[error("case `{0}` cites no annotated article")]
    NoCitedArticles(String),
    #[error("case `{0}`: no predicate of a cited article matches the pseudo query")]
    NoPositives(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Pos,
    Hard,
    Easy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainRecord {
    pub query: String,
    pub predicate_id: String,
    pub predicate: String,
    pub label: u8,
    pub kind: SampleKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Upper bound on positives per case.
    pub top_m: usize,
    /// Pseudo queries are cut to this many characters.
    pub max_query_chars: Option<usize>,
    /// Negatives per positive.
    pub negative_ratio: f64,
    /// Share of negatives drawn from the cited chapters, rounded up.
    pub hard_fraction: f64,
    pub tokenizer: Tokenizer,
    pub bm25: Bm25Params,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            top_m: 5,
            max_query_chars: None,
            negative_ratio: 1.0,
            hard_fraction: 0.5,
            tokenizer: Tokenizer::default(),
            bm25: Bm25Params::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.top_m == 0 {
            return Err(TrainError::Config("top_m must be at least 1".into()));
        }
        if !(self.negative_ratio >= 0.0 && self.negative_ratio.is_finite()) {
            return Err(TrainError::Config(format!("negative_ratio {} is not a non-negative number", self.negative_ratio)));
        }
        if !(0.0..=1.0).contains(&self.hard_fraction) {
            return Err(TrainError::Config(format!("hard_fraction {} is outside [0, 1]", self.hard_fraction)));
        }
        if self.max_query_chars == Some(0) {
            return Err(TrainError::Config("max_query_chars must be at least 1".into()));
        }
        Ok(())
    }
}

/// The case's fact text, optionally cut to `max_chars` characters.
pub fn make_pseudo_query(case: &CandidateCase, max_chars: Option<usize>) -> Result<String, TrainError> {
    if case.text.trim().is_empty() {
        return Err(TrainError::EmptyText(case.id.clone()));
    }
    Ok(match max_chars {
        Some(n) => case.text.chars().take(n).collect(),
        None => case.text.clone(),
    })
}

/// BM25 over the rulebase's predicate texts, one document per predicate.
#[derive(Debug, Clone)]
pub struct PredicateIndex {
    index: Bm25Index,
    tokens: Vec<Vec<String>>,
    tokenizer: Tokenizer,
}

impl PredicateIndex {
    pub fn build(base: &RuleBase, tokenizer: Tokenizer, params: Bm25Params) -> Self {
        let tokens: Vec<Vec<String>> = base.predicates().iter().map(|p| tokenizer.tokenize(&p.text)).collect();
        PredicateIndex { index: Bm25Index::build(&tokens, params), tokens, tokenizer }
    }

    /// Score of `query` against the predicate at `position` in the rulebase.
    fn score(&self, query_tokens: &[String], position: usize) -> f64 {
        self.index.score(query_tokens, &self.tokens[position])
    }
}

/// Cited articles present in `base`, citation order, no duplicates.
fn cited_articles<'a>(case: &'a CandidateCase, base: &RuleBase) -> Vec<&'a str> {
    let mut seen = HashSet::new();
    case.cited_article_ids
        .iter()
        .map(String::as_str)
        .filter(|a| base.rule(a).is_some() && seen.insert(*a))
        .collect()
}

/// Predicates of the cited articles ranked by BM25 against the pseudo query;
/// the top `top_m` with positive score. Ties keep declaration order.
pub fn select_positive_predicates<'a>(
    pseudo_query: &str,
    case: &CandidateCase,
    base: &'a RuleBase,
    index: &PredicateIndex,
    top_m: usize,
) -> Result<Vec<&'a PredicateDef>, TrainError> {
    let cited: HashSet<&str> = cited_articles(case, base).into_iter().collect();
    if cited.is_empty() {
        return Err(TrainError::NoCitedArticles(case.id.clone()));
    }
    let q = index.tokenizer.tokenize(pseudo_query);
    let mut scored: Vec<(usize, f64)> = base
        .predicates()
        .iter()
        .enumerate()
        .filter(|(_, p)| cited.contains(p.article_id.as_str()))
        .map(|(i, _)| (i, index.score(&q, i)))
        .filter(|&(_, s)| s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(top_m).map(|(i, _)| &base.predicates()[i]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSample<'a> {
    pub hard: Vec<&'a PredicateDef>,
    pub easy: Vec<&'a PredicateDef>,
    /// Hard slots filled with easy negatives.
    pub hard_shortfall: usize,
    /// Easy slots filled with hard negatives.
    pub easy_shortfall: usize,
    /// Slots neither pool could fill.
    pub unfilled: usize,
}

/// Negatives for one case from predicates of uncited articles. Hard ones
/// come from articles sharing a chapter with a cited article, easy ones from
/// all others, including articles without a chapter.
pub fn sample_negatives<'a>(
    n_positives: usize,
    case: &CandidateCase,
    base: &'a RuleBase,
    config: &TrainConfig,
    seed: u64,
) -> NegativeSample<'a> {
    let cited: HashSet<&str> = cited_articles(case, base).into_iter().collect();
    let chapters: BTreeSet<&str> = cited.iter().filter_map(|a| base.chapter(a)).collect();
    let (hard_pool, easy_pool): (Vec<&PredicateDef>, Vec<&PredicateDef>) = base
        .predicates()
        .iter()
        .filter(|p| !cited.contains(p.article_id.as_str()))
        .partition(|p| base.chapter(&p.article_id).is_some_and(|c| chapters.contains(c)));

    let total = (n_positives as f64 * config.negative_ratio).round() as usize;
    let hard_target = (total as f64 * config.hard_fraction).ceil() as usize;
    let easy_target = total - hard_target.min(total);
    let hard_shortfall = hard_target.saturating_sub(hard_pool.len());
    let easy_shortfall = easy_target.saturating_sub(easy_pool.len());
    let hard_take = (hard_target - hard_shortfall + easy_shortfall).min(hard_pool.len());
    let easy_take = (easy_target - easy_shortfall + hard_shortfall).min(easy_pool.len());

    let mut rng = substream(seed, &format!("negatives/{}", case.id));
    let pick = |pool: &[&'a PredicateDef], n: usize, rng: &mut _| -> Vec<&'a PredicateDef> {
        let mut idx = sample(rng, pool.len(), n).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| pool[i]).collect()
    };
    let hard = pick(&hard_pool, hard_take, &mut rng);
    let easy = pick(&easy_pool, easy_take, &mut rng);
    NegativeSample { unfilled: total - hard.len() - easy.len(), hard, easy, hard_shortfall, easy_shortfall }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub cases_used: usize,
    pub holdout_excluded: usize,
    /// `(case id, reason)` for every skipped case.
    pub skipped: Vec<(String, String)>,
    pub positives: usize,
    pub hard: usize,
    pub easy: usize,
    pub hard_shortfall: usize,
    pub easy_shortfall: usize,
    pub unfilled: usize,
}

impl TrainSummary {
    pub fn negatives(&self) -> usize {
        self.hard + self.easy
    }
}

enum CaseOutcome {
    Records(Vec<PretrainRecord>, [usize; 3]),
    Skipped(String, String),
}

fn case_records(
    case: &CandidateCase,
    base: &RuleBase,
    index: &PredicateIndex,
    config: &TrainConfig,
    seed: u64,
) -> CaseOutcome {
    let skip = |e: TrainError| CaseOutcome::Skipped(case.id.clone(), e.to_string());
    let query = match make_pseudo_query(case, config.max_query_chars) {
        Ok(q) => q,
        Err(e) => return skip(e),
    };
    let positives = match select_positive_predicates(&query, case, base, index, config.top_m) {
        Ok(p) if p.is_empty() => return skip(TrainError::NoPositives(case.id.clone())),
        Ok(p) => p,
        Err(e) => return skip(e),
    };
    let neg = sample_negatives(positives.len(), case, base, config, seed);
    let record = |p: &PredicateDef, label, kind| PretrainRecord {
        query: query.clone(),
        predicate_id: p.id.clone(),
        predicate: p.text.clone(),
        label,
        kind,
    };
    let mut out: Vec<PretrainRecord> = positives.iter().map(|p| record(p, 1, SampleKind::Pos)).collect();
    out.extend(neg.hard.iter().map(|p| record(p, 0, SampleKind::Hard)));
    out.extend(neg.easy.iter().map(|p| record(p, 0, SampleKind::Easy)));
    CaseOutcome::Records(out, [neg.hard_shortfall, neg.easy_shortfall, neg.unfilled])
}

/// Records for every non-holdout case, shuffled under `seed`.
pub fn build_pretraining_set(
    cases: &[CandidateCase],
    base: &RuleBase,
    config: &TrainConfig,
    holdout: &HashSet<String>,
    seed: u64,
) -> Result<(Vec<PretrainRecord>, TrainSummary), TrainError> {
    config.validate()?;
    let index = PredicateIndex::build(base, config.tokenizer, config.bm25);
    let eligible: Vec<&CandidateCase> = cases.iter().filter(|c| !holdout.contains(&c.id)).collect();
    let outcomes: Vec<CaseOutcome> = eligible
        .par_iter()
        .map(|c| case_records(c, base, &index, config, seed))
        .collect();

    let mut summary = TrainSummary { holdout_excluded: cases.len() - eligible.len(), ..TrainSummary::default() };
    let mut records = Vec::new();
    for outcome in outcomes {
        match outcome {
            CaseOutcome::Records(rs, [hs, es, un]) => {
                summary.cases_used += 1;
                summary.hard_shortfall += hs;
                summary.easy_shortfall += es;
                summary.unfilled += un;
                for r in &rs {
                    match r.kind {
                        SampleKind::Pos => summary.positives += 1,
                        SampleKind::Hard => summary.hard += 1,
                        SampleKind::Easy => summary.easy += 1,
                    }
                }
                records.extend(rs);
            }
            CaseOutcome::Skipped(id, reason) => summary.skipped.push((id, reason)),
        }
    }
    records.shuffle(&mut substream(seed, "shuffle"));
    Ok((records, summary))
}

pub fn write_pretraining_set<W: Write>(w: W, records: &[PretrainRecord]) -> std::io::Result<()> {
    write_jsonl(w, records)
}
