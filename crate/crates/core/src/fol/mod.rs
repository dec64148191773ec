//! Propositional rules over law-article predicates.
//!
//! A law article is represented as a body formula over its predicates
//! (key facts or circumstances) that implies a conclusion, usually a charge:
//!
//! ```text
//! pred P1 @264 : "steals a relatively large amount of private property"
//! pred P2 @264 : "steals a relatively large amount of public property"
//! pred P3 @264 : "commits theft repeatedly"
//! article 264 chapter 5 : (P1 | P2 | P3) -> "crime of theft"
//! ```
//!
//! Bodies are evaluated with Łukasiewicz fuzzy connectives, see [`eval`].

mod eval;
mod parse;
mod render;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{eval_formula, eval_rule, lukasiewicz_and, lukasiewicz_not, lukasiewicz_or, Assignment};
pub use parse::parse_rulebase;
pub use render::{render_formula, render_predicate, render_rule, render_rulebase};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FolError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate predicate id `{0}`")]
    DuplicatePredicate(String),
    #[error("duplicate rule for article `{0}`")]
    DuplicateArticle(String),
    #[error("article `{article}` references undeclared predicate `{predicate}`")]
    UndeclaredPredicate { article: String, predicate: String },
    #[error("article `{article}` references predicate `{predicate}` declared for article `{owner}`")]
    ForeignPredicate {
        article: String,
        predicate: String,
        owner: String,
    },
    #[error("predicate `{0}` has empty text")]
    EmptyPredicateText(String),
    #[error("article `{0}` has an empty conclusion")]
    EmptyHead(String),
    #[error("{0} connective needs at least two operands")]
    DegenerateConnective(&'static str),
    #[error("no score assigned to predicate `{0}`")]
    MissingAssignment(String),
    #[error("score {score} for predicate `{predicate}` is outside [0, 1]")]
    ScoreOutOfRange { predicate: String, score: f64 },
}

/// A key fact or circumstance belonging to one law article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDef {
    pub id: String,
    pub article_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    Atom(String),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn atom(id: impl Into<String>) -> Self {
        Formula::Atom(id.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Formula) -> Self {
        Formula::Not(Box::new(inner))
    }

    /// Predicate ids in order of first appearance.
    pub fn atoms(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Formula::Atom(id) => {
                if !out.contains(&id.as_str()) {
                    out.push(id);
                }
            }
            Formula::Not(inner) => inner.collect_atoms(out),
            Formula::And(children) | Formula::Or(children) => {
                for child in children {
                    child.collect_atoms(out);
                }
            }
        }
    }

    pub fn is_negation_free(&self) -> bool {
        match self {
            Formula::Atom(_) => true,
            Formula::Not(_) => false,
            Formula::And(children) | Formula::Or(children) => {
                children.iter().all(Formula::is_negation_free)
            }
        }
    }

    /// Rejects connectives with fewer than two operands.
    pub fn check_shape(&self) -> Result<(), FolError> {
        match self {
            Formula::Atom(_) => Ok(()),
            Formula::Not(inner) => inner.check_shape(),
            Formula::And(children) if children.len() < 2 => Err(FolError::DegenerateConnective("and")),
            Formula::Or(children) if children.len() < 2 => Err(FolError::DegenerateConnective("or")),
            Formula::And(children) | Formula::Or(children) => {
                children.iter().try_for_each(Formula::check_shape)
            }
        }
    }

    fn count_operators(&self, counts: &mut OperatorCounts) {
        match self {
            Formula::Atom(_) => {}
            Formula::Not(inner) => {
                counts.negations += 1;
                inner.count_operators(counts);
            }
            Formula::And(children) => {
                counts.conjunctions += children.len() - 1;
                children.iter().for_each(|c| c.count_operators(counts));
            }
            Formula::Or(children) => {
                counts.disjunctions += children.len() - 1;
                children.iter().for_each(|c| c.count_operators(counts));
            }
        }
    }
}

/// One law article: `body -> head`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FolRule {
    pub article_id: String,
    pub body: Formula,
    pub head: String,
}

/// Operator occurrences as they appear in written rules. An n-ary
/// connective counts as n - 1 binary symbols; each rule has one implication.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OperatorCounts {
    pub articles: usize,
    pub predicates: usize,
    pub negations: usize,
    pub conjunctions: usize,
    pub disjunctions: usize,
    pub implications: usize,
}

/// Predicate declarations, one rule per article, and the article → chapter map.
///
/// Declaration order is preserved so rendering is stable.
#[derive(Debug, Clone, Default)]
pub struct RuleBase {
    predicates: Vec<PredicateDef>,
    rules: Vec<FolRule>,
    chapters: BTreeMap<String, String>,
    predicate_index: HashMap<String, usize>,
    rule_index: HashMap<String, usize>,
}

impl PartialEq for RuleBase {
    fn eq(&self, other: &Self) -> bool {
        self.predicates == other.predicates
            && self.rules == other.rules
            && self.chapters == other.chapters
    }
}

impl RuleBase {
    /// Builds and validates a rule base from its parts.
    ///
    /// `chapters` maps article ids to chapter ids; articles without an entry
    /// belong to no chapter.
    pub fn new(
        predicates: Vec<PredicateDef>,
        rules: Vec<FolRule>,
        chapters: BTreeMap<String, String>,
    ) -> Result<Self, FolError> {
        let mut predicate_index = HashMap::with_capacity(predicates.len());
        for (i, p) in predicates.iter().enumerate() {
            if p.text.trim().is_empty() {
                return Err(FolError::EmptyPredicateText(p.id.clone()));
            }
            if predicate_index.insert(p.id.clone(), i).is_some() {
                return Err(FolError::DuplicatePredicate(p.id.clone()));
            }
        }
        let mut rule_index = HashMap::with_capacity(rules.len());
        for (i, rule) in rules.iter().enumerate() {
            if rule_index.insert(rule.article_id.clone(), i).is_some() {
                return Err(FolError::DuplicateArticle(rule.article_id.clone()));
            }
            if rule.head.trim().is_empty() {
                return Err(FolError::EmptyHead(rule.article_id.clone()));
            }
            rule.body.check_shape()?;
            for atom in rule.body.atoms() {
                let Some(&pi) = predicate_index.get(atom) else {
                    return Err(FolError::UndeclaredPredicate {
                        article: rule.article_id.clone(),
                        predicate: atom.to_string(),
                    });
                };
                let owner = &predicates[pi].article_id;
                if owner != &rule.article_id {
                    return Err(FolError::ForeignPredicate {
                        article: rule.article_id.clone(),
                        predicate: atom.to_string(),
                        owner: owner.clone(),
                    });
                }
            }
        }
        Ok(RuleBase {
            predicates,
            rules,
            chapters,
            predicate_index,
            rule_index,
        })
    }

    pub fn predicates(&self) -> &[PredicateDef] {
        &self.predicates
    }

    pub fn rules(&self) -> &[FolRule] {
        &self.rules
    }

    pub fn chapters(&self) -> &BTreeMap<String, String> {
        &self.chapters
    }

    pub fn predicate(&self, id: &str) -> Option<&PredicateDef> {
        self.predicate_index.get(id).map(|&i| &self.predicates[i])
    }

    pub fn rule(&self, article_id: &str) -> Option<&FolRule> {
        self.rule_index.get(article_id).map(|&i| &self.rules[i])
    }

    pub fn chapter(&self, article_id: &str) -> Option<&str> {
        self.chapters.get(article_id).map(String::as_str)
    }

    /// Predicates declared for `article_id`, in declaration order.
    pub fn predicates_of<'a>(&'a self, article_id: &'a str) -> impl Iterator<Item = &'a PredicateDef> + 'a {
        self.predicates.iter().filter(move |p| p.article_id == article_id)
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty() && self.rules.is_empty()
    }

    pub fn operator_counts(&self) -> OperatorCounts {
        let mut counts = OperatorCounts {
            articles: self.rules.len(),
            predicates: self.predicates.len(),
            implications: self.rules.len(),
            ..OperatorCounts::default()
        };
        for rule in &self.rules {
            rule.body.count_operators(&mut counts);
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theft_base() -> RuleBase {
        parse_rulebase(
            r#"
pred P1 @264 : "steals a relatively large amount of private property"
pred P2 @264 : "steals a relatively large amount of public property"
pred P3 @264 : "commits theft repeatedly"
article 264 : (P1 | P2 | P3) -> "crime of theft"
"#,
        )
        .unwrap()
    }

    #[test]
    fn atoms_in_first_appearance_order() {
        let f = Formula::And(vec![
            Formula::Or(vec![Formula::atom("b"), Formula::atom("a")]),
            Formula::not(Formula::atom("b")),
            Formula::atom("c"),
        ]);
        assert_eq!(f.atoms(), vec!["b", "a", "c"]);
    }

    #[test]
    fn operator_counts_for_theft_rule() {
        let counts = theft_base().operator_counts();
        assert_eq!(counts.articles, 1);
        assert_eq!(counts.predicates, 3);
        assert_eq!(counts.disjunctions, 2);
        assert_eq!(counts.conjunctions, 0);
        assert_eq!(counts.negations, 0);
        assert_eq!(counts.implications, 1);
    }

    #[test]
    fn foreign_predicate_rejected() {
        let err = RuleBase::new(
            vec![PredicateDef {
                id: "P1".into(),
                article_id: "1".into(),
                text: "x".into(),
            }],
            vec![FolRule {
                article_id: "2".into(),
                body: Formula::atom("P1"),
                head: "y".into(),
            }],
            BTreeMap::new(),
        )
        .unwrap_err();
        assert!(matches!(err, FolError::ForeignPredicate { .. }));
    }

    #[test]
    fn degenerate_connective_rejected() {
        let err = RuleBase::new(
            vec![PredicateDef {
                id: "P1".into(),
                article_id: "1".into(),
                text: "x".into(),
            }],
            vec![FolRule {
                article_id: "1".into(),
                body: Formula::And(vec![Formula::atom("P1")]),
                head: "y".into(),
            }],
            BTreeMap::new(),
        )
        .unwrap_err();
        assert_eq!(err, FolError::DegenerateConnective("and"));
    }
}
