//! Natural-language rendering of law-level and case-level explanations.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::case_level::CaseExplanation;
use crate::fol::Formula;
use crate::law_level::{ArticleEvaluation, LawExplanation};

pub const SENTINEL: &str = "no supporting predicates above threshold";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorWords {
    pub and: String,
    pub or: String,
    pub not: String,
}

impl Default for OperatorWords {
    fn default() -> Self {
        OperatorWords { and: "and".into(), or: "or".into(), not: "not".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    /// Predicates scoring below this are dropped.
    pub threshold: f64,
    pub words: OperatorWords,
    pub language: String,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { threshold: 0.5, words: OperatorWords::default(), language: "en".into() }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), ExplainError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ExplainError::BadThreshold(self.threshold));
        }
        Ok(())
    }
}

/// Drops atoms scoring below `threshold`; a connective left with one child
/// collapses to it, one left with none disappears. A negated atom is kept
/// or dropped together with its atom.
pub fn prune(formula: &Formula, scores: &HashMap<&str, f64>, threshold: f64) -> Option<Formula> {
    match formula {
        Formula::Atom(id) => {
            let keep = scores.get(id.as_str()).is_some_and(|&s| s >= threshold);
            keep.then(|| formula.clone())
        }
        Formula::Not(inner) => prune(inner, scores, threshold).map(Formula::not),
        Formula::And(children) | Formula::Or(children) => {
            let mut kept: Vec<Formula> = children.iter().filter_map(|c| prune(c, scores, threshold)).collect();
            match kept.len() {
                0 => None,
                1 => kept.pop(),
                _ => Some(match formula {
                    Formula::And(_) => Formula::And(kept),
                    _ => Formula::Or(kept),
                }),
            }
        }
    }
}

fn phrase(formula: &Formula, article: &ArticleEvaluation, words: &OperatorWords, nested: bool) -> String {
    match formula {
        Formula::Atom(id) => match article.predicates.iter().find(|p| &p.id == id) {
            Some(p) => format!("{} ({:.2})", p.text, p.score),
            None => id.clone(),
        },
        Formula::Not(inner) => format!("{} {}", words.not, phrase(inner, article, words, true)),
        Formula::And(children) | Formula::Or(children) => {
            let word = if matches!(formula, Formula::And(_)) { &words.and } else { &words.or };
            let joined = children
                .iter()
                .map(|c| phrase(c, article, words, true))
                .collect::<Vec<_>>()
                .join(&format!(" {word} "));
            if nested {
                format!("({joined})")
            } else {
                joined
            }
        }
    }
}

/// One line per article with surviving predicates, in article order.
pub fn render_law(exp: &LawExplanation, cfg: &RenderConfig) -> Vec<String> {
    exp.articles
        .iter()
        .filter_map(|a| {
            let scores: HashMap<&str, f64> = a.predicates.iter().map(|p| (p.id.as_str(), p.score)).collect();
            let body = prune(&a.rule.body, &scores, cfg.threshold)?;
            Some(format!(
                "Law article {}: {}, which leads to \"{}\"",
                a.rule.article_id,
                phrase(&body, a, &cfg.words, false),
                a.rule.head
            ))
        })
        .collect()
}

/// One line per aligned pair, in pair order.
pub fn render_case(exp: &CaseExplanation) -> Vec<String> {
    exp.pairs
        .iter()
        .map(|p| format!("query: {}; case: {} (cos {:.2})", p.q_text, p.c_text, p.cos))
        .collect()
}

/// Law lines then case lines, newline separated; the sentinel when nothing
/// survives.
pub fn render_explanation(
    law: Option<&LawExplanation>,
    case: Option<&CaseExplanation>,
    cfg: &RenderConfig,
) -> Result<String, ExplainError> {
    cfg.validate()?;
    if law.is_none() && case.is_none() {
        return Err(ExplainError::NoExplanation);
    }
    let mut lines = law.map(|l| render_law(l, cfg)).unwrap_or_default();
    lines.extend(case.map(render_case).unwrap_or_default());
    if lines.is_empty() {
        return Ok(SENTINEL.to_string());
    }
    Ok(lines.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_level::AlignedSentences;
    use crate::fol::parse_rulebase;
    use crate::law_level::ScoredPredicate;

    fn theft(scores: [f64; 3]) -> LawExplanation {
        let base = parse_rulebase(
            r#"
pred P1 @264 : "the defendant steals property"
pred P2 @264 : "the defendant steals property multiple times"
pred P3 @264 : "the defendant steals property of large value"
article 264 : P1 | P2 | P3 -> "crime of theft"
"#,
        )
        .unwrap();
        let rule = base.rule("264").unwrap().clone();
        let predicates = base
            .predicates()
            .iter()
            .zip(scores)
            .map(|(p, score)| ScoredPredicate { id: p.id.clone(), text: p.text.clone(), score })
            .collect();
        LawExplanation { articles: vec![ArticleEvaluation { rule, predicates }], unknown_articles: vec![] }
    }

    #[test]
    fn only_strong_predicates_survive() {
        let text = render_explanation(Some(&theft([0.8, 0.2, 0.05])), None, &RenderConfig::default()).unwrap();
        assert_eq!(
            text,
            "Law article 264: the defendant steals property (0.80), which leads to \"crime of theft\""
        );
    }

    #[test]
    fn disjunction_words() {
        let text = render_explanation(Some(&theft([0.8, 0.6, 0.05])), None, &RenderConfig::default()).unwrap();
        assert!(text.contains("property (0.80) or the defendant steals property multiple times (0.60), which"));
    }

    #[test]
    fn sentinel_when_nothing_survives() {
        let text = render_explanation(Some(&theft([0.1, 0.2, 0.3])), None, &RenderConfig::default()).unwrap();
        assert_eq!(text, SENTINEL);
        assert_eq!(render_explanation(None, None, &RenderConfig::default()), Err(ExplainError::NoExplanation));
    }

    #[test]
    fn case_lines_in_pair_order() {
        let pair = |q: &str, c: &str, cos| AlignedSentences { q_idx: 0, c_idx: 0, q_text: q.into(), c_text: c.into(), cos };
        let exp = CaseExplanation { k: 1, n_query: 2, n_case: 2, pairs: vec![pair("a", "b", 0.9), pair("c", "d", 0.4)], r_case: 0.6 };
        let text = render_explanation(None, Some(&exp), &RenderConfig::default()).unwrap();
        assert_eq!(text, "query: a; case: b (cos 0.90)\nquery: c; case: d (cos 0.40)");
    }

    #[test]
    fn nested_structure_and_negation() {
        let base = parse_rulebase(
            r#"
pred A @1 : "a"
pred B @1 : "b"
pred C @1 : "c"
article 1 : (A | B) & !C -> "h"
"#,
        )
        .unwrap();
        let rule = base.rule("1").unwrap().clone();
        let sp = |id: &str, score| ScoredPredicate { id: id.into(), text: id.to_lowercase(), score };
        let exp = LawExplanation {
            articles: vec![ArticleEvaluation { rule, predicates: vec![sp("A", 0.9), sp("B", 0.7), sp("C", 0.6)] }],
            unknown_articles: vec![],
        };
        let text = render_law(&exp, &RenderConfig::default());
        assert_eq!(text, vec!["Law article 1: (a (0.90) or b (0.70)) and not c (0.60), which leads to \"h\""]);
    }

    #[test]
    fn raising_threshold_never_adds_text() {
        let exp = theft([0.8, 0.6, 0.55]);
        let mut prev = usize::MAX;
        for t in [0.0, 0.5, 0.56, 0.61, 0.81, 1.0] {
            let cfg = RenderConfig { threshold: t, ..RenderConfig::default() };
            let n = render_law(&exp, &cfg).iter().map(|l| l.matches("steals").count()).sum::<usize>();
            assert!(n <= prev);
            prev = n;
        }
    }
}
