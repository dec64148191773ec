//! Explanations as text, charge-prediction prompts, and LLM scoring.

mod llm;
mod prompt;
mod render;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use llm::{
    accuracy_by_kind, extract_charge, judge, judge_accuracy, normalize_charge, parse_completion, request_body,
    AttemptError, ChatTransport, Completion, EndpointConfig, HttpTransport, LlmClient, LlmJudgment,
};
pub use prompt::{build_prompt, fill, Exemplar, PromptKind, PromptSpec, TemplateSet};
pub use render::{prune, render_case, render_explanation, render_law, OperatorWords, RenderConfig, SENTINEL};

use crate::corpus::Qrels;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExplainError {
    #[error("neither a law-level nor a case-level explanation was given")]
    NoExplanation,
    #[error("render threshold {0} is outside [0, 1]")]
    BadThreshold(f64),
    #[error("missing prompt slot `{0}`")]
    MissingSlot(String),
    #[error("malformed template: {0}")]
    Template(String),
    #[error("{0}: {1}")]
    Io(String, String),
    #[error("endpoint error: {0}")]
    Endpoint(String),
    #[error("endpoint failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("no gold charge for query `{0}`")]
    MissingGold(String),
}

impl ExplainError {
    /// Failures caused by the remote endpoint rather than local input.
    pub fn is_endpoint(&self) -> bool {
        matches!(self, ExplainError::Endpoint(_) | ExplainError::RetriesExhausted { .. })
    }
}

/// The best-ranked case whose normalized label reaches `threshold`.
pub fn pick_relevant_case<'a, S: AsRef<str>>(
    query_id: &str,
    ranked: &'a [S],
    qrels: &Qrels,
    threshold: f64,
) -> Option<&'a str> {
    let relevant = qrels.relevant(query_id, threshold);
    ranked.iter().map(AsRef::as_ref).find(|c| relevant.contains(c))
}

/// One line of the prompt log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub prompt_id: String,
    pub query_id: String,
    pub case_id: String,
    pub kind: PromptKind,
    pub prompt: String,
}

/// One line of the gold-charge file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldCharge {
    pub query_id: String,
    pub charge: String,
}

pub fn gold_map(records: Vec<GoldCharge>) -> std::collections::HashMap<String, String> {
    records.into_iter().map(|g| (g.query_id, g.charge)).collect()
}

pub fn prompt_id(query_id: &str, kind: PromptKind) -> String {
    format!("{query_id}/{kind}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relevant_case_follows_ranking() {
        let mut q = Qrels::new(3);
        q.insert("q", "a", 1).unwrap();
        q.insert("q", "b", 3).unwrap();
        q.insert("q", "c", 2).unwrap();
        let ranked = ["a", "c", "b"];
        assert_eq!(pick_relevant_case("q", &ranked, &q, 2.0 / 3.0), Some("c"));
        assert_eq!(pick_relevant_case("q", &ranked, &q, 1.0), Some("b"));
        assert_eq!(pick_relevant_case("q", &["a"], &q, 1.0), None);
    }
}
