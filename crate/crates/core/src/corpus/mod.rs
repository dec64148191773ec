//! Queries, candidate cases, graded judgments and candidate pools.
//!
//! All three inputs are newline-delimited JSON:
//!
//! ```text
//! queries: {"id": "q1", "text": "..."}
//! cases:   {"id": "c1", "text": "...", "articles": ["264"]}
//! qrels:   {"query_id": "q1", "case_id": "c1", "label": 3}
//! ```
//!
//! The candidate list of a query is the set of cases judged for it, in qrels
//! file order.

mod pool;
mod split;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fol::RuleBase;

pub use pool::{build_candidate_pool, CandidatePool, PoolConfig};
pub use split::{split_sentences, DEFAULT_DELIMITERS};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: malformed record: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("{file}:{line}: reference to unknown {kind} `{id}`")]
    DanglingReference {
        file: String,
        line: usize,
        kind: &'static str,
        id: String,
    },
    #[error("label {raw} is outside [0, {max_level}]")]
    LabelOutOfRange { raw: i64, max_level: u32 },
    #[error("{kind} `{id}` has no text")]
    EmptyText { kind: &'static str, id: String },
    #[error("invalid corpus configuration: {0}")]
    Config(String),
    #[error("candidate pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    /// Highest raw relevance label (3 for a four-level scale, 2 for three levels).
    pub max_level: u32,
    pub delimiters: Vec<char>,
    /// Normalized label at or above which a candidate counts as relevant for
    /// binary metrics.
    pub binarize_threshold: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            max_level: 3,
            delimiters: DEFAULT_DELIMITERS.to_vec(),
            binarize_threshold: 2.0 / 3.0,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.max_level < 1 {
            return Err(CorpusError::Config("max_level must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.binarize_threshold) {
            return Err(CorpusError::Config("binarize_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub articles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrelRecord {
    pub query_id: String,
    pub case_id: String,
    pub label: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: String,
    pub text: String,
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateCase {
    pub id: String,
    pub text: String,
    pub sentences: Vec<String>,
    pub cited_article_ids: Vec<String>,
}

/// `raw / max_level`.
pub fn normalize_label(raw: i64, max_level: u32) -> Result<f64, CorpusError> {
    if max_level < 1 {
        return Err(CorpusError::Config("max_level must be at least 1".into()));
    }
    if raw < 0 || raw > i64::from(max_level) {
        return Err(CorpusError::LabelOutOfRange { raw, max_level });
    }
    Ok(raw as f64 / f64::from(max_level))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Judgment {
    pub raw: u32,
    pub normalized: f64,
}

/// Graded judgments keyed by query, then case. Per-query case order follows
/// the input.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Qrels {
    max_level: u32,
    judged: BTreeMap<String, Vec<(String, Judgment)>>,
}

impl Qrels {
    pub fn new(max_level: u32) -> Self {
        Qrels { max_level, judged: BTreeMap::new() }
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn insert(&mut self, query_id: &str, case_id: &str, raw: i64) -> Result<(), CorpusError> {
        let normalized = normalize_label(raw, self.max_level)?;
        let row = self.judged.entry(query_id.to_string()).or_default();
        if row.iter().any(|(c, _)| c == case_id) {
            return Err(CorpusError::DuplicateId {
                kind: "judgment",
                id: format!("{query_id}/{case_id}"),
            });
        }
        row.push((case_id.to_string(), Judgment { raw: raw as u32, normalized }));
        Ok(())
    }

    pub fn from_records(records: &[QrelRecord], max_level: u32) -> Result<Self, CorpusError> {
        let mut qrels = Qrels::new(max_level);
        for r in records {
            qrels.insert(&r.query_id, &r.case_id, r.label)?;
        }
        Ok(qrels)
    }

    pub fn load(path: &Path, max_level: u32) -> Result<Self, CorpusError> {
        let records: Vec<(usize, QrelRecord)> = read_jsonl_file(path)?;
        let mut qrels = Qrels::new(max_level);
        for (line, r) in records {
            qrels.insert(&r.query_id, &r.case_id, r.label).map_err(|e| match e {
                CorpusError::LabelOutOfRange { .. } => CorpusError::Malformed {
                    file: path.display().to_string(),
                    line,
                    message: e.to_string(),
                },
                other => other,
            })?;
        }
        Ok(qrels)
    }

    pub fn get(&self, query_id: &str, case_id: &str) -> Option<Judgment> {
        self.judged
            .get(query_id)?
            .iter()
            .find(|(c, _)| c == case_id)
            .map(|(_, j)| *j)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judged.keys().map(String::as_str)
    }

    pub fn contains_query(&self, query_id: &str) -> bool {
        self.judged.contains_key(query_id)
    }

    /// Judged cases for `query_id` in input order.
    pub fn judged(&self, query_id: &str) -> &[(String, Judgment)] {
        self.judged.get(query_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Case id → normalized label.
    pub fn gains(&self, query_id: &str) -> HashMap<&str, f64> {
        self.judged(query_id)
            .iter()
            .map(|(c, j)| (c.as_str(), j.normalized))
            .collect()
    }

    pub fn relevant(&self, query_id: &str, threshold: f64) -> HashSet<&str> {
        self.judged(query_id)
            .iter()
            .filter(|(_, j)| j.normalized >= threshold)
            .map(|(c, _)| c.as_str())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.judged.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> Vec<QrelRecord> {
        self.judged
            .iter()
            .flat_map(|(q, row)| {
                row.iter().map(move |(c, j)| QrelRecord {
                    query_id: q.clone(),
                    case_id: c.clone(),
                    label: i64::from(j.raw),
                })
            })
            .collect()
    }
}

/// A cross-validated collection. Immutable once built.
#[derive(Debug, Clone)]
pub struct Corpus {
    config: CorpusConfig,
    queries: Vec<Query>,
    cases: Vec<CandidateCase>,
    query_index: HashMap<String, usize>,
    case_index: HashMap<String, usize>,
    candidates: BTreeMap<String, Vec<String>>,
    qrels: Qrels,
    rulebase: Option<Arc<RuleBase>>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.queries == other.queries
            && self.cases == other.cases
            && self.candidates == other.candidates
            && self.qrels == other.qrels
    }
}

impl Corpus {
    pub fn from_records(
        queries: Vec<QueryRecord>,
        cases: Vec<CaseRecord>,
        qrels: Vec<QrelRecord>,
        config: CorpusConfig,
    ) -> Result<Self, CorpusError> {
        let numbered = |n: usize| (1..=n).collect::<Vec<_>>();
        let (ql, cl, rl) = (numbered(queries.len()), numbered(cases.len()), numbered(qrels.len()));
        Self::assemble(
            ql.into_iter().zip(queries).collect(),
            cl.into_iter().zip(cases).collect(),
            rl.into_iter().zip(qrels).collect(),
            ["queries", "cases", "qrels"],
            config,
        )
    }

    fn assemble(
        queries: Vec<(usize, QueryRecord)>,
        cases: Vec<(usize, CaseRecord)>,
        qrels: Vec<(usize, QrelRecord)>,
        files: [&str; 3],
        config: CorpusConfig,
    ) -> Result<Self, CorpusError> {
        config.validate()?;
        let mut query_index = HashMap::new();
        let mut out_queries = Vec::with_capacity(queries.len());
        for (_, q) in queries {
            let sentences = split_sentences(&q.text, &config.delimiters);
            if sentences.is_empty() {
                return Err(CorpusError::EmptyText { kind: "query", id: q.id });
            }
            if query_index.insert(q.id.clone(), out_queries.len()).is_some() {
                return Err(CorpusError::DuplicateId { kind: "query", id: q.id });
            }
            out_queries.push(Query { id: q.id, text: q.text, sentences });
        }
        let mut case_index = HashMap::new();
        let mut out_cases = Vec::with_capacity(cases.len());
        for (_, c) in cases {
            let sentences = split_sentences(&c.text, &config.delimiters);
            if sentences.is_empty() {
                return Err(CorpusError::EmptyText { kind: "case", id: c.id });
            }
            if case_index.insert(c.id.clone(), out_cases.len()).is_some() {
                return Err(CorpusError::DuplicateId { kind: "case", id: c.id });
            }
            out_cases.push(CandidateCase {
                id: c.id,
                text: c.text,
                sentences,
                cited_article_ids: c.articles,
            });
        }
        let mut judged = Qrels::new(config.max_level);
        let mut candidates: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (line, r) in qrels {
            if !query_index.contains_key(&r.query_id) {
                return Err(CorpusError::DanglingReference {
                    file: files[2].to_string(),
                    line,
                    kind: "query",
                    id: r.query_id,
                });
            }
            if !case_index.contains_key(&r.case_id) {
                return Err(CorpusError::DanglingReference {
                    file: files[2].to_string(),
                    line,
                    kind: "case",
                    id: r.case_id,
                });
            }
            judged.insert(&r.query_id, &r.case_id, r.label).map_err(|e| match e {
                CorpusError::LabelOutOfRange { .. } => CorpusError::Malformed {
                    file: files[2].to_string(),
                    line,
                    message: e.to_string(),
                },
                other => other,
            })?;
            candidates.entry(r.query_id).or_default().push(r.case_id);
        }
        Ok(Corpus {
            config,
            queries: out_queries,
            cases: out_cases,
            query_index,
            case_index,
            candidates,
            qrels: judged,
            rulebase: None,
        })
    }

    pub fn with_rulebase(mut self, base: Arc<RuleBase>) -> Self {
        self.rulebase = Some(base);
        self
    }

    pub fn rulebase(&self) -> Option<&RuleBase> {
        self.rulebase.as_deref()
    }

    pub fn config(&self) -> &CorpusConfig {
        &self.config
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn cases(&self) -> &[CandidateCase] {
        &self.cases
    }

    pub fn query(&self, id: &str) -> Option<&Query> {
        self.query_index.get(id).map(|&i| &self.queries[i])
    }

    pub fn case(&self, id: &str) -> Option<&CandidateCase> {
        self.case_index.get(id).map(|&i| &self.cases[i])
    }

    /// Candidate case ids for `query_id`, in qrels order.
    pub fn candidates(&self, query_id: &str) -> &[String] {
        self.candidates.get(query_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `(query id, number of candidates)` for every query, in query order.
    pub fn candidate_counts(&self) -> Vec<(&str, usize)> {
        self.queries
            .iter()
            .map(|q| (q.id.as_str(), self.candidates(&q.id).len()))
            .collect()
    }

    pub fn qrels(&self) -> &Qrels {
        &self.qrels
    }

    /// Cases with no cited article; they can never receive a law-level score.
    pub fn uncited_cases(&self) -> Vec<&str> {
        self.cases
            .iter()
            .filter(|c| c.cited_article_ids.is_empty())
            .map(|c| c.id.as_str())
            .collect()
    }

    pub fn query_records(&self) -> Vec<QueryRecord> {
        self.queries
            .iter()
            .map(|q| QueryRecord { id: q.id.clone(), text: q.text.clone() })
            .collect()
    }

    pub fn case_records(&self) -> Vec<CaseRecord> {
        self.cases
            .iter()
            .map(|c| CaseRecord {
                id: c.id.clone(),
                text: c.text.clone(),
                articles: c.cited_article_ids.clone(),
            })
            .collect()
    }
}

/// Reads and cross-validates the three corpus files.
pub fn load_corpus(
    query_path: &Path,
    case_path: &Path,
    qrels_path: &Path,
    config: CorpusConfig,
) -> Result<Corpus, CorpusError> {
    let queries = read_jsonl_file(query_path)?;
    let cases = read_jsonl_file(case_path)?;
    let qrels = read_jsonl_file(qrels_path)?;
    let names = [query_path, case_path, qrels_path].map(|p| p.display().to_string());
    Corpus::assemble(
        queries,
        cases,
        qrels,
        [&names[0], &names[1], &names[2]],
        config,
    )
}

/// Parses newline-delimited JSON, skipping blank lines. Each record carries
/// its 1-based line number.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(
    reader: R,
    file: &str,
) -> Result<Vec<(usize, T)>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Malformed {
            file: file.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            file: file.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, record));
    }
    Ok(out)
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_jsonl(BufReader::new(file), &path.display().to_string())
}

pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
