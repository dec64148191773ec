//! The contract an external exporter fills: which sentence vectors and score
//! pairs the engine will ask for, and a manifest describing what was written.
//!
//! ```text
//! {"models": {"embeddings": "m1"}, "corpus_hash": "…",
//!  "outputs": [{"path": "emb.jsonl", "kind": "embeddings", "dim": 768}]}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::law_level::extract_rules;
use crate::scorers::{sentence_id, EmbeddingTable, ScoreError, ScoreKind, ScoreTable};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot read manifest {0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("malformed manifest {0}: {1}")]
    Malformed(PathBuf, String),
    #[error("corpus hash mismatch: manifest {manifest}, corpus {corpus}")]
    CorpusHash { manifest: String, corpus: String },
    #[error("{path}: {source}")]
    Table { path: String, source: ScoreError },
    #[error("{path}: manifest declares {declared}, file header says {found}")]
    HeaderMismatch { path: String, declared: String, found: String },
    #[error("{path}: {kind} output needs a `{field}` entry")]
    MissingField { path: String, kind: ExportKind, field: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportKind {
    Embeddings,
    Relevance,
    Predicate,
}

impl std::fmt::Display for ExportKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExportKind::Embeddings => "embeddings",
            ExportKind::Relevance => "relevance",
            ExportKind::Predicate => "predicate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedFile {
    /// Relative to the manifest's directory.
    pub path: String,
    pub kind: ExportKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    /// Role (`embeddings`, `predicate`, `relevance`) to model identifier.
    pub models: BTreeMap<String, String>,
    pub corpus_hash: String,
    pub outputs: Vec<ExportedFile>,
}

/// SHA-256 over the corpus records in file order, hex encoded.
pub fn corpus_hash(corpus: &Corpus) -> String {
    let mut h = Sha256::new();
    let mut feed = |v: &serde_json::Value| {
        h.update(v.to_string().as_bytes());
        h.update(b"\n");
    };
    for q in corpus.query_records() {
        feed(&serde_json::json!(q));
    }
    for c in corpus.case_records() {
        feed(&serde_json::json!(c));
    }
    for r in corpus.qrels().records() {
        feed(&serde_json::json!(r));
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// `(sentence id, text)` for every query and case sentence the case-level
/// module embeds.
pub fn sentence_inventory(corpus: &Corpus) -> Vec<(String, String)> {
    let queries = corpus.queries().iter().map(|q| (&q.id, &q.sentences));
    let cases = corpus.cases().iter().map(|c| (&c.id, &c.sentences));
    queries
        .chain(cases)
        .flat_map(|(id, sentences)| sentences.iter().enumerate().map(move |(i, s)| (sentence_id(id, i), s.clone())))
        .collect()
}

/// `(query id, predicate id)` pairs the law-level module scores: predicates
/// in the bodies of rules cited by each query's candidates.
pub fn required_predicate_pairs(corpus: &Corpus) -> Vec<(String, String)> {
    let Some(base) = corpus.rulebase() else {
        return Vec::new();
    };
    let mut pairs = BTreeSet::new();
    for q in corpus.queries() {
        for case in corpus.candidates(&q.id).iter().filter_map(|id| corpus.case(id)) {
            for rule in extract_rules(case, base).0 {
                for atom in rule.body.atoms() {
                    pairs.insert((q.id.clone(), atom.to_string()));
                }
            }
        }
    }
    pairs.into_iter().collect()
}

/// `(query id, case id)` for every judged candidate.
pub fn required_relevance_pairs(corpus: &Corpus) -> Vec<(String, String)> {
    corpus
        .queries()
        .iter()
        .flat_map(|q| corpus.candidates(&q.id).iter().map(|c| (q.id.clone(), c.clone())))
        .collect()
}

/// What an exporter run left uncovered.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageReport {
    pub missing_sentences: Vec<String>,
    pub missing_predicate_pairs: Vec<(String, String)>,
    pub missing_relevance_pairs: Vec<(String, String)>,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.missing_sentences.is_empty()
            && self.missing_predicate_pairs.is_empty()
            && self.missing_relevance_pairs.is_empty()
    }
}

impl ExportManifest {
    pub fn load(path: &Path) -> Result<Self, ExportError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExportError::Io(path.to_path_buf(), e))?;
        serde_json::from_str(&text).map_err(|e| ExportError::Malformed(path.to_path_buf(), e.to_string()))
    }

    /// Checks the corpus hash, that every listed file loads with the declared
    /// dimension or range, and which required entries the files lack.
    pub fn verify(&self, dir: &Path, corpus: &Corpus) -> Result<CoverageReport, ExportError> {
        let hash = corpus_hash(corpus);
        if hash != self.corpus_hash {
            return Err(ExportError::CorpusHash { manifest: self.corpus_hash.clone(), corpus: hash });
        }
        let mut report = CoverageReport::default();
        for out in &self.outputs {
            let path = dir.join(&out.path);
            let table_err = |source| ExportError::Table { path: out.path.clone(), source };
            match out.kind {
                ExportKind::Embeddings => {
                    let declared = out.dim.ok_or_else(|| ExportError::MissingField {
                        path: out.path.clone(),
                        kind: out.kind,
                        field: "dim",
                    })?;
                    let table = EmbeddingTable::load(&path).map_err(table_err)?;
                    if table.dim() != declared {
                        return Err(ExportError::HeaderMismatch {
                            path: out.path.clone(),
                            declared: format!("dim {declared}"),
                            found: format!("dim {}", table.dim()),
                        });
                    }
                    report.missing_sentences.extend(
                        sentence_inventory(corpus).into_iter().map(|(id, _)| id).filter(|id| table.get(id).is_none()),
                    );
                }
                ExportKind::Relevance | ExportKind::Predicate => {
                    let [lo, hi] = out.range.ok_or_else(|| ExportError::MissingField {
                        path: out.path.clone(),
                        kind: out.kind,
                        field: "range",
                    })?;
                    let table = ScoreTable::load(&path).map_err(table_err)?;
                    let expected = if out.kind == ExportKind::Relevance { ScoreKind::Relevance } else { ScoreKind::Predicate };
                    if table.kind() != expected || table.range() != (lo, hi) {
                        return Err(ExportError::HeaderMismatch {
                            path: out.path.clone(),
                            declared: format!("{} [{lo}, {hi}]", out.kind),
                            found: format!("{:?} [{}, {}]", table.kind(), table.range().0, table.range().1),
                        });
                    }
                    let (required, missing) = if out.kind == ExportKind::Relevance {
                        (required_relevance_pairs(corpus), &mut report.missing_relevance_pairs)
                    } else {
                        (required_predicate_pairs(corpus), &mut report.missing_predicate_pairs)
                    };
                    missing.extend(required.into_iter().filter(|(l, r)| table.get(l, r).is_none()));
                }
            }
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, SyntheticConfig};
    use std::fs;

    fn small() -> Corpus {
        generate(&SyntheticConfig { n_queries: 2, n_candidates: 20, ..SyntheticConfig::default() }).corpus().unwrap()
    }

    #[test]
    fn hash_tracks_content() {
        let a = small();
        assert_eq!(corpus_hash(&a), corpus_hash(&small()));
        let b = generate(&SyntheticConfig { n_queries: 2, n_candidates: 20, seed: 1, ..SyntheticConfig::default() })
            .corpus()
            .unwrap();
        assert_ne!(corpus_hash(&a), corpus_hash(&b));
        assert_eq!(corpus_hash(&a).len(), 64);
    }

    #[test]
    fn inventory_covers_every_sentence() {
        let c = small();
        let n: usize = c.queries().iter().map(|q| q.sentences.len()).sum::<usize>()
            + c.cases().iter().map(|x| x.sentences.len()).sum::<usize>();
        assert_eq!(sentence_inventory(&c).len(), n);
        assert_eq!(required_relevance_pairs(&c).len(), 40);
        let pairs = required_predicate_pairs(&c);
        assert!(!pairs.is_empty());
        let base = c.rulebase().unwrap();
        assert!(pairs.iter().all(|(_, p)| base.predicate(p).is_some()));
    }

    #[test]
    fn verify_round_trip_and_mismatches() {
        let c = small();
        let dir = tempfile::tempdir().unwrap();
        let mut emb = EmbeddingTable::new(2);
        for (id, _) in sentence_inventory(&c).into_iter().skip(1) {
            emb.insert(&id, vec![1.0, 0.0]).unwrap();
        }
        emb.write(fs::File::create(dir.path().join("emb.jsonl")).unwrap()).unwrap();
        let mut pred = ScoreTable::new(ScoreKind::Predicate, (0.0, 1.0)).unwrap();
        for (q, p) in required_predicate_pairs(&c) {
            pred.insert(&q, &p, 0.5).unwrap();
        }
        pred.write(fs::File::create(dir.path().join("pred.jsonl")).unwrap()).unwrap();

        let mut manifest = ExportManifest {
            models: BTreeMap::from([("embeddings".to_string(), "stub".to_string())]),
            corpus_hash: corpus_hash(&c),
            outputs: vec![
                ExportedFile { path: "emb.jsonl".into(), kind: ExportKind::Embeddings, dim: Some(2), range: None },
                ExportedFile { path: "pred.jsonl".into(), kind: ExportKind::Predicate, dim: None, range: Some([0.0, 1.0]) },
            ],
        };
        let text = serde_json::to_string(&manifest).unwrap();
        fs::write(dir.path().join("manifest.json"), &text).unwrap();
        assert_eq!(ExportManifest::load(&dir.path().join("manifest.json")).unwrap(), manifest);

        let report = manifest.verify(dir.path(), &c).unwrap();
        assert_eq!(report.missing_sentences, vec![sentence_inventory(&c)[0].0.clone()]);
        assert!(report.missing_predicate_pairs.is_empty());
        assert!(!report.is_complete());

        manifest.outputs[0].dim = Some(3);
        assert!(matches!(manifest.verify(dir.path(), &c), Err(ExportError::HeaderMismatch { .. })));
        manifest.outputs[0].dim = Some(2);
        manifest.corpus_hash = "00".into();
        assert!(matches!(manifest.verify(dir.path(), &c), Err(ExportError::CorpusHash { .. })));
    }
}
