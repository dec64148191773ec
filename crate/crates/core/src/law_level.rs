//! Law-level relevance: score each predicate of every article the candidate
//! case cites against the query, evaluate the article bodies with fuzzy
//! logic, and average.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CandidateCase, Query};
use crate::fol::{eval_rule, FolError, FolRule, RuleBase};
use crate::scorers::{PredicateBackend, ScoreError};

#[derive(Debug, Error)]
pub enum LawError {
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Logic(#[from] FolError),
}

/// Rules for the cited articles found in `base`, citation order, duplicates
/// removed. Unknown article ids are returned separately.
pub fn extract_rules<'a>(case: &CandidateCase, base: &'a RuleBase) -> (Vec<&'a FolRule>, Vec<String>) {
    let mut seen = HashSet::new();
    let mut rules = Vec::new();
    let mut unknown = Vec::new();
    for id in &case.cited_article_ids {
        if !seen.insert(id.as_str()) {
            continue;
        }
        match base.rule(id) {
            Some(rule) => rules.push(rule),
            None => unknown.push(id.clone()),
        }
    }
    (rules, unknown)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPredicate {
    pub id: String,
    pub text: String,
    pub score: f64,
}

/// One cited article with every predicate of its body scored.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticleEvaluation {
    pub rule: FolRule,
    /// Body atoms in first-appearance order.
    pub predicates: Vec<ScoredPredicate>,
}

impl ArticleEvaluation {
    pub fn assignment(&self) -> BTreeMap<String, f64> {
        self.predicates.iter().map(|p| (p.id.clone(), p.score)).collect()
    }

    pub fn body_score(&self) -> Result<f64, FolError> {
        eval_rule(&self.rule, &self.assignment())
    }
}

/// The evaluated law-level rule structure for one (query, case) pair.
/// Empty `articles` means the pair cannot be scored at law level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LawExplanation {
    pub articles: Vec<ArticleEvaluation>,
    pub unknown_articles: Vec<String>,
}

impl LawExplanation {
    pub fn is_unscored(&self) -> bool {
        self.articles.is_empty()
    }
}

pub fn build_law_explanation(
    query: &Query,
    case: &CandidateCase,
    base: &RuleBase,
    backend: &PredicateBackend,
) -> Result<LawExplanation, LawError> {
    let (rules, unknown_articles) = extract_rules(case, base);
    let mut articles = Vec::with_capacity(rules.len());
    for rule in rules {
        let mut predicates = Vec::new();
        for atom in rule.body.atoms() {
            // RuleBase construction guarantees every atom is declared.
            let def = base
                .predicate(atom)
                .ok_or_else(|| FolError::UndeclaredPredicate {
                    article: rule.article_id.clone(),
                    predicate: atom.to_string(),
                })?;
            let score = backend.predicate_score(query, def)?;
            predicates.push(ScoredPredicate { id: def.id.clone(), text: def.text.clone(), score });
        }
        articles.push(ArticleEvaluation { rule: rule.clone(), predicates });
    }
    Ok(LawExplanation { articles, unknown_articles })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawScore {
    /// Mean body score, or `None` when no cited article is annotated.
    pub value: Option<f64>,
    pub per_article: Vec<f64>,
}

/// Evaluates each article body and averages over the distinct articles.
pub fn induce_law_score(exp: &LawExplanation) -> Result<LawScore, FolError> {
    let per_article = exp
        .articles
        .iter()
        .map(ArticleEvaluation::body_score)
        .collect::<Result<Vec<_>, _>>()?;
    let value = if per_article.is_empty() {
        None
    } else {
        Some(per_article.iter().sum::<f64>() / per_article.len() as f64)
    };
    Ok(LawScore { value, per_article })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub article_id: String,
    pub head: String,
    pub predicates: Vec<ScoredPredicate>,
    pub body_score: f64,
}

/// Export shape: one record per (query, case).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawExplanationRecord {
    pub query_id: String,
    pub case_id: String,
    pub articles: Vec<ArticleRecord>,
    pub r_law: Option<f64>,
}

impl LawExplanationRecord {
    pub fn new(query_id: &str, case_id: &str, exp: &LawExplanation, score: &LawScore) -> Self {
        LawExplanationRecord {
            query_id: query_id.to_string(),
            case_id: case_id.to_string(),
            articles: exp
                .articles
                .iter()
                .zip(&score.per_article)
                .map(|(a, &body_score)| ArticleRecord {
                    article_id: a.rule.article_id.clone(),
                    head: a.rule.head.clone(),
                    predicates: a.predicates.clone(),
                    body_score,
                })
                .collect(),
            r_law: score.value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::parse_rulebase;
    use crate::scorers::{ScoreKind, ScoreTable, Tokenizer};
    use proptest::prelude::*;

    const BASE: &str = r#"
pred P1 @264 : "steals a relatively large amount of private property"
pred P2 @264 : "steals a relatively large amount of public property"
pred P3 @264 : "commits theft repeatedly"
article 264 chapter 5 : (P1 | P2 | P3) -> "crime of theft"
pred Q1 @266 : "fabricates facts"
pred Q2 @266 : "conceals the truth"
pred Q3 @266 : "obtains property"
article 266 chapter 5 : ((Q1 | Q2) & Q3) -> "crime of fraud"
pred R1 @133 : "violates traffic regulations"
pred R2 @133 : "causes a serious accident"
article 133 chapter 2 : (R1 | R2) -> "crime of causing traffic casualties"
"#;

    fn base() -> RuleBase {
        parse_rulebase(BASE).unwrap()
    }

    fn case(articles: &[&str]) -> CandidateCase {
        CandidateCase {
            id: "c1".into(),
            text: "x".into(),
            sentences: vec!["x".into()],
            cited_article_ids: articles.iter().map(|a| a.to_string()).collect(),
        }
    }

    fn query(text: &str) -> Query {
        Query { id: "q1".into(), text: text.into(), sentences: vec![text.into()] }
    }

    fn table(pairs: &[(&str, f64)]) -> PredicateBackend {
        let mut t = ScoreTable::new(ScoreKind::Predicate, (0.0, 1.0)).unwrap();
        for (p, s) in pairs {
            t.insert("q1", p, *s).unwrap();
        }
        PredicateBackend::external(t).unwrap()
    }

    #[test]
    fn extract_in_citation_order_with_unknowns() {
        let b = base();
        let (rules, unknown) = extract_rules(&case(&["264"]), &b);
        assert_eq!(rules.iter().map(|r| r.article_id.as_str()).collect::<Vec<_>>(), vec!["264"]);
        assert!(unknown.is_empty());
        assert!(extract_rules(&case(&[]), &b).0.is_empty());
        let (rules, unknown) = extract_rules(&case(&["264", "999"]), &b);
        assert_eq!(rules.len(), 1);
        assert_eq!(unknown, vec!["999"]);
        let (rules, _) = extract_rules(&case(&["266", "264", "266"]), &b);
        assert_eq!(rules.iter().map(|r| r.article_id.as_str()).collect::<Vec<_>>(), vec!["266", "264"]);
    }

    #[test]
    fn theft_explanation_and_score() {
        let backend = table(&[("P1", 0.8), ("P2", 0.2), ("P3", 0.05)]);
        let exp = build_law_explanation(&query("q"), &case(&["264"]), &base(), &backend).unwrap();
        let scores: Vec<(&str, f64)> =
            exp.articles[0].predicates.iter().map(|p| (p.id.as_str(), p.score)).collect();
        assert_eq!(scores, vec![("P1", 0.8), ("P2", 0.2), ("P3", 0.05)]);
        let s = induce_law_score(&exp).unwrap();
        assert!((s.per_article[0] - 1.0).abs() < 1e-12);
        assert!((s.value.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lexical_backend_with_disjoint_query_scores_zero() {
        let backend = PredicateBackend::Lexical(Tokenizer::Mixed);
        let exp = build_law_explanation(&query("完全无关"), &case(&["264", "133"]), &base(), &backend).unwrap();
        assert_eq!(exp.articles.len(), 2);
        assert_eq!(exp.articles[0].rule.article_id, "264");
        assert_eq!(exp.articles[1].rule.article_id, "133");
        assert!(exp.articles.iter().flat_map(|a| &a.predicates).all(|p| p.score == 0.0));
    }

    #[test]
    fn mean_of_two_articles() {
        let backend = table(&[("P1", 1.0), ("P2", 0.0), ("P3", 0.0), ("R1", 0.0), ("R2", 0.0)]);
        let exp = build_law_explanation(&query("q"), &case(&["264", "133"]), &base(), &backend).unwrap();
        let s = induce_law_score(&exp).unwrap();
        assert_eq!(s.per_article, vec![1.0, 0.0]);
        assert!((s.value.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cnf_article_plus_empty_or() {
        let backend = table(&[("Q1", 0.3), ("Q2", 0.3), ("Q3", 1.0), ("R1", 0.0), ("R2", 0.0)]);
        let exp = build_law_explanation(&query("q"), &case(&["266", "133"]), &base(), &backend).unwrap();
        let s = induce_law_score(&exp).unwrap();
        assert!((s.per_article[0] - 0.6).abs() < 1e-12);
        assert_eq!(s.per_article[1], 0.0);
        assert!((s.value.unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn unannotated_citations_are_unscored() {
        let backend = table(&[]);
        let exp = build_law_explanation(&query("q"), &case(&["999"]), &base(), &backend).unwrap();
        assert!(exp.is_unscored());
        assert_eq!(induce_law_score(&exp).unwrap().value, None);
    }

    #[test]
    fn missing_external_score_propagates() {
        let backend = table(&[("P1", 0.5)]);
        let err = build_law_explanation(&query("q"), &case(&["264"]), &base(), &backend).unwrap_err();
        assert!(matches!(err, LawError::Score(ScoreError::MissingScore(..))));
    }

    #[test]
    fn export_record_shape() {
        let backend = table(&[("P1", 0.8), ("P2", 0.2), ("P3", 0.05)]);
        let exp = build_law_explanation(&query("q"), &case(&["264"]), &base(), &backend).unwrap();
        let rec = LawExplanationRecord::new("q1", "c1", &exp, &induce_law_score(&exp).unwrap());
        let json = serde_json::to_value(&rec).unwrap();
        assert_eq!(json["articles"][0]["article_id"], "264");
        assert_eq!(json["articles"][0]["predicates"][0]["text"], "steals a relatively large amount of private property");
        assert_eq!(json["r_law"], 1.0);
    }

    const ALL: [&str; 8] = ["P1", "P2", "P3", "Q1", "Q2", "Q3", "R1", "R2"];

    fn scores_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..=1.0, ALL.len())
    }

    fn r_law(scores: &[f64], articles: &[&str]) -> LawScore {
        let pairs: Vec<(&str, f64)> = ALL.iter().copied().zip(scores.iter().copied()).collect();
        let exp = build_law_explanation(&query("q"), &case(articles), &base(), &table(&pairs)).unwrap();
        induce_law_score(&exp).unwrap()
    }

    proptest! {
        #[test]
        fn bounded_and_permutation_invariant(scores in scores_strategy()) {
            let a = r_law(&scores, &["264", "266", "133"]);
            let b = r_law(&scores, &["133", "264", "266"]);
            let v = a.value.unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((v - b.value.unwrap()).abs() < 1e-12);
            let mut pa = a.per_article.clone();
            let mut pb = b.per_article.clone();
            pa.sort_by(f64::total_cmp);
            pb.sort_by(f64::total_cmp);
            prop_assert_eq!(pa, pb);
        }

        #[test]
        fn monotone_in_predicate_scores(scores in scores_strategy(), which in 0usize..8, bump in 0.0f64..=1.0) {
            let mut raised = scores.clone();
            raised[which] = (raised[which] + bump).min(1.0);
            let arts = ["264", "266", "133"];
            prop_assert!(r_law(&raised, &arts).value.unwrap() + 1e-12 >= r_law(&scores, &arts).value.unwrap());
        }

        #[test]
        fn boolean_scores_count_satisfied_rules(bits in prop::collection::vec(any::<bool>(), 8)) {
            let scores: Vec<f64> = bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let s = r_law(&scores, &["264", "266", "133"]);
            let satisfied = [
                bits[0] || bits[1] || bits[2],
                (bits[3] || bits[4]) && bits[5],
                bits[6] || bits[7],
            ]
            .iter()
            .filter(|&&b| b)
            .count();
            prop_assert!((s.value.unwrap() * 3.0 - satisfied as f64).abs() < 1e-12);
        }
    }
}
