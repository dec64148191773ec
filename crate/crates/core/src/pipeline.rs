//! Per-query ranking: neural, law-level and case-level scores, their module
//! rankings, and the fused ranking, plus the ablation variants.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case_level::{
    explain_aligned, CaseExplanation, CaseExplanationRecord, ExponentMode, DEFAULT_K,
};
use crate::corpus::{Corpus, Qrels};
use crate::fol::{FolError, RuleBase};
use crate::fusion::{fuse, rank_candidates, FusedEntry, FusionConfig, FusionError, ModuleKind, ModuleRanking};
use crate::law_level::{build_law_explanation, induce_law_score, LawError, LawExplanation, LawExplanationRecord};
use crate::metrics::{evaluate_run, MetricConfig, MetricReport, MetricsError, Run};
use crate::scorers::{EmbeddingBackend, PredicateBackend, RelevanceBackend, ScoreError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("query `{0}` is not in the corpus")]
    UnknownQuery(String),
    #[error("query `{query}`: candidate `{case}` is not in the corpus")]
    UnknownCase { query: String, case: String },
    #[error("corpus has no rulebase attached")]
    NoRulebase,
    #[error("neural module: {0}")]
    Neural(ScoreError),
    #[error("law module: {0}")]
    Law(#[from] LawError),
    #[error("law module: {0}")]
    Logic(#[from] FolError),
    #[error("case module: {0}")]
    Case(ScoreError),
    #[error("fusion: {0}")]
    Fusion(#[from] FusionError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub k: usize,
    pub exponent_mode: ExponentMode,
    pub fusion: FusionConfig,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { k: DEFAULT_K, exponent_mode: ExponentMode::Surviving, fusion: FusionConfig::default(), threads: 0 }
    }
}

pub struct Engine<'a> {
    corpus: &'a Corpus,
    base: &'a RuleBase,
    relevance: RelevanceBackend,
    predicates: PredicateBackend,
    embeddings: EmbeddingBackend,
    config: EngineConfig,
}

/// Raw module scores for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScores {
    pub query_id: String,
    pub case_id: String,
    pub neural: f64,
    pub law: Option<f64>,
    pub case: f64,
}

#[derive(Debug, Clone)]
pub struct QueryResult {
    pub query_id: String,
    /// Candidate order as listed in the qrels.
    pub scores: Vec<CandidateScores>,
    pub neural: ModuleRanking,
    pub law: ModuleRanking,
    pub case: ModuleRanking,
    pub fused: Vec<FusedEntry>,
    pub law_explanations: Vec<(String, LawExplanation)>,
    pub case_explanations: Vec<(String, CaseExplanation)>,
}

impl QueryResult {
    pub fn law_records(&self) -> Vec<LawExplanationRecord> {
        self.law_explanations
            .iter()
            .zip(&self.scores)
            .filter_map(|((case_id, exp), s)| {
                let score = induce_law_score(exp).ok()?;
                debug_assert_eq!(score.value, s.law);
                Some(LawExplanationRecord::new(&self.query_id, case_id, exp, &score))
            })
            .collect()
    }

    pub fn case_records(&self) -> Vec<CaseExplanationRecord> {
        self.case_explanations
            .iter()
            .map(|(case_id, exp)| CaseExplanationRecord::new(&self.query_id, case_id, exp))
            .collect()
    }

    pub fn law_explanation(&self, case_id: &str) -> Option<&LawExplanation> {
        self.law_explanations.iter().find(|(c, _)| c == case_id).map(|(_, e)| e)
    }

    pub fn case_explanation(&self, case_id: &str) -> Option<&CaseExplanation> {
        self.case_explanations.iter().find(|(c, _)| c == case_id).map(|(_, e)| e)
    }
}

impl<'a> Engine<'a> {
    pub fn new(
        corpus: &'a Corpus,
        relevance: RelevanceBackend,
        predicates: PredicateBackend,
        embeddings: EmbeddingBackend,
        config: EngineConfig,
    ) -> Result<Self, PipelineError> {
        config.fusion.validate()?;
        let base = corpus.rulebase().ok_or(PipelineError::NoRulebase)?;
        Ok(Engine { corpus, base, relevance, predicates, embeddings, config })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn rank_query(&self, query_id: &str) -> Result<QueryResult, PipelineError> {
        let query = self.corpus.query(query_id).ok_or_else(|| PipelineError::UnknownQuery(query_id.to_string()))?;
        let qv = self.embeddings.embed_document(&query.id, &query.sentences).map_err(PipelineError::Case)?;
        let mut scores = Vec::new();
        let mut law_explanations = Vec::new();
        let mut case_explanations = Vec::new();
        for case_id in self.corpus.candidates(query_id) {
            let case = self.corpus.case(case_id).ok_or_else(|| PipelineError::UnknownCase {
                query: query_id.to_string(),
                case: case_id.clone(),
            })?;
            let neural = self.relevance.neural_relevance(query, case).map_err(PipelineError::Neural)?;
            let law_exp = build_law_explanation(query, case, self.base, &self.predicates)?;
            let law = induce_law_score(&law_exp)?.value;
            let cv = self.embeddings.embed_document(&case.id, &case.sentences).map_err(PipelineError::Case)?;
            let case_exp = explain_aligned(query, case, &qv, &cv, self.config.k, self.config.exponent_mode)
                .map_err(PipelineError::Case)?;
            scores.push(CandidateScores {
                query_id: query_id.to_string(),
                case_id: case_id.clone(),
                neural,
                law,
                case: case_exp.r_case,
            });
            law_explanations.push((case_id.clone(), law_exp));
            case_explanations.push((case_id.clone(), case_exp));
        }
        let column = |f: fn(&CandidateScores) -> Option<f64>| -> Vec<(String, Option<f64>)> {
            scores.iter().map(|s| (s.case_id.clone(), f(s))).collect()
        };
        let neural = rank_candidates(ModuleKind::Neural, &column(|s| Some(s.neural)))?;
        let law = rank_candidates(ModuleKind::Law, &column(|s| s.law))?;
        let case = rank_candidates(ModuleKind::Case, &column(|s| Some(s.case)))?;
        let fused = if scores.is_empty() {
            Vec::new()
        } else {
            fuse(&[neural.clone(), law.clone(), case.clone()], &self.config.fusion)?
        };
        Ok(QueryResult {
            query_id: query_id.to_string(),
            scores,
            neural,
            law,
            case,
            fused,
            law_explanations,
            case_explanations,
        })
    }

    /// Every corpus query, in corpus order regardless of thread count.
    pub fn rank_all(&self) -> Result<Vec<QueryResult>, PipelineError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.threads)
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))?;
        pool.install(|| {
            self.corpus
                .queries()
                .par_iter()
                .map(|q| self.rank_query(&q.id))
                .collect()
        })
    }
}

/// Which modules join the neural ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Base,
    Law,
    Case,
    Both,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Base, Variant::Law, Variant::Case, Variant::Both];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Law => "+law",
            Variant::Case => "+case",
            Variant::Both => "+both",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Fused ranking of one query restricted to the modules of `variant`.
pub fn fuse_variant(result: &QueryResult, variant: Variant, cfg: &FusionConfig) -> Result<Vec<FusedEntry>, FusionError> {
    if result.scores.is_empty() {
        return Ok(Vec::new());
    }
    let mut rankings = vec![result.neural.clone()];
    if matches!(variant, Variant::Law | Variant::Both) {
        rankings.push(result.law.clone());
    }
    if matches!(variant, Variant::Case | Variant::Both) {
        rankings.push(result.case.clone());
    }
    fuse(&rankings, cfg)
}

pub fn variant_run(results: &[QueryResult], variant: Variant, cfg: &FusionConfig) -> Result<Run, FusionError> {
    results
        .iter()
        .map(|r| {
            let fused = fuse_variant(r, variant, cfg)?;
            Ok((r.query_id.clone(), fused.into_iter().map(|e| e.id).collect()))
        })
        .collect()
}

/// Evaluates base, +law, +case, +both in that order.
pub fn ablate(
    results: &[QueryResult],
    qrels: &Qrels,
    fusion: &FusionConfig,
    metrics: &MetricConfig,
) -> Result<Vec<(Variant, MetricReport)>, PipelineError> {
    Variant::ALL
        .into_iter()
        .map(|v| {
            let run = variant_run(results, v, fusion)?;
            Ok((v, evaluate_run(&run, qrels, metrics)?))
        })
        .collect()
}

/// One row per variant, one column per metric mean.
pub fn ablation_table(rows: &[(Variant, MetricReport)]) -> String {
    let mut s = String::new();
    let Some((_, first)) = rows.first() else {
        return s;
    };
    s.push_str(&format!("{:<8}", "variant"));
    for name in &first.metric_names {
        s.push_str(&format!("  {name:>8}"));
    }
    s.push('\n');
    for (v, report) in rows {
        s.push_str(&format!("{:<8}", v.label()));
        for m in &report.means {
            s.push_str(&format!("  {m:>8.4}"));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CaseRecord, CorpusConfig, QrelRecord, QueryRecord};
    use crate::fol::parse_rulebase;
    use crate::scorers::{Bm25Params, Bm25Relevance, Tokenizer};
    use std::sync::Arc;

    fn tiny() -> Corpus {
        let base = parse_rulebase(
            r#"
pred P1 @1 : "alpha beta"
pred P2 @2 : "gamma delta"
article 1 : P1 -> "one"
article 2 : P2 -> "two"
"#,
        )
        .unwrap();
        let queries = vec![QueryRecord { id: "q".into(), text: "alpha beta here. gamma there.".into() }];
        let cases = vec![
            CaseRecord { id: "a".into(), text: "alpha beta here.".into(), articles: vec!["1".into()] },
            CaseRecord { id: "b".into(), text: "gamma there.".into(), articles: vec!["2".into()] },
            CaseRecord { id: "c".into(), text: "unrelated words.".into(), articles: vec![] },
        ];
        let qrels = ["a", "b", "c"]
            .iter()
            .zip([3, 1, 0])
            .map(|(c, l)| QrelRecord { query_id: "q".into(), case_id: c.to_string(), label: l })
            .collect::<Vec<_>>();
        let cfg = CorpusConfig { delimiters: vec!['.'], ..CorpusConfig::default() };
        Corpus::from_records(queries, cases, qrels, cfg).unwrap().with_rulebase(Arc::new(base))
    }

    fn engine(corpus: &Corpus, threads: usize) -> Engine<'_> {
        let rel = RelevanceBackend::Bm25(Arc::new(Bm25Relevance::from_corpus(corpus, Tokenizer::Mixed, Bm25Params::default())));
        let cfg = EngineConfig { threads, ..EngineConfig::default() };
        Engine::new(corpus, rel, PredicateBackend::Lexical(Tokenizer::Mixed), EmbeddingBackend::default(), cfg).unwrap()
    }

    #[test]
    fn module_scores_and_unscored_last() {
        let corpus = tiny();
        let r = engine(&corpus, 1).rank_query("q").unwrap();
        let by_id = |id: &str| r.scores.iter().find(|s| s.case_id == id).unwrap().clone();
        assert_eq!(by_id("a").law, Some(1.0));
        assert_eq!(by_id("b").law, Some(0.5));
        assert_eq!(by_id("c").law, None);
        assert_eq!(r.law.rank("c"), Some(3));
        assert_eq!(r.fused.len(), 3);
        assert_eq!(r.law_records().len(), 3);
        assert_eq!(r.case_records().len(), 3);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let corpus = tiny();
        let a = engine(&corpus, 1).rank_all().unwrap();
        let b = engine(&corpus, 4).rank_all().unwrap();
        assert_eq!(a[0].fused, b[0].fused);
    }

    #[test]
    fn ablation_rows_in_fixed_order() {
        let corpus = tiny();
        let results = engine(&corpus, 1).rank_all().unwrap();
        let rows = ablate(&results, corpus.qrels(), &FusionConfig::default(), &MetricConfig::default()).unwrap();
        assert_eq!(rows.iter().map(|(v, _)| *v).collect::<Vec<_>>(), Variant::ALL.to_vec());
        let table = ablation_table(&rows);
        assert!(table.lines().nth(1).unwrap().starts_with("base"));
    }

    #[test]
    fn base_variant_is_neural_order() {
        let corpus = tiny();
        let r = engine(&corpus, 1).rank_query("q").unwrap();
        let base: Vec<String> = fuse_variant(&r, Variant::Base, &FusionConfig::default()).unwrap().into_iter().map(|e| e.id).collect();
        assert_eq!(base, r.neural.order());
    }

    #[test]
    fn missing_rulebase_and_query() {
        let corpus = tiny();
        assert!(matches!(engine(&corpus, 1).rank_query("zz"), Err(PipelineError::UnknownQuery(_))));
        let bare = Corpus::from_records(corpus.query_records(), corpus.case_records(), corpus.qrels().records(), corpus.config().clone()).unwrap();
        let rel = RelevanceBackend::Bm25(Arc::new(Bm25Relevance::from_corpus(&bare, Tokenizer::Mixed, Bm25Params::default())));
        assert!(matches!(
            Engine::new(&bare, rel, PredicateBackend::Lexical(Tokenizer::Mixed), EmbeddingBackend::default(), EngineConfig::default()),
            Err(PipelineError::NoRulebase)
        ));
    }
}
