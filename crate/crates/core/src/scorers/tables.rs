//! Externally produced score and embedding files.
//!
//! ```text
//! {"kind": "predicate", "range": [0.0, 1.0]}
//! {"left": "q1", "right": "P1", "score": 0.8}
//!
//! {"dim": 3}
//! {"id": "q1#0", "vector": [0.1, 0.2, 0.3]}
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Relevance,
    Predicate,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreHeader {
    kind: ScoreKind,
    range: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreRow {
    left: String,
    right: String,
    score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingHeader {
    dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingRow {
    id: String,
    vector: Vec<f64>,
}

/// `(left, right) → score`, with every score inside the declared range.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    kind: ScoreKind,
    range: (f64, f64),
    scores: HashMap<(String, String), f64>,
}

impl ScoreTable {
    pub fn new(kind: ScoreKind, range: (f64, f64)) -> Result<Self, ScoreError> {
        if !(range.0.is_finite() && range.1.is_finite()) || range.0 > range.1 {
            return Err(ScoreError::InvalidRange(range.0, range.1));
        }
        Ok(ScoreTable { kind, range, scores: HashMap::new() })
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn insert(&mut self, left: &str, right: &str, score: f64) -> Result<(), ScoreError> {
        if !score.is_finite() || score < self.range.0 || score > self.range.1 {
            return Err(ScoreError::OutOfRange {
                left: left.to_string(),
                right: right.to_string(),
                score,
                lo: self.range.0,
                hi: self.range.1,
            });
        }
        self.scores.insert((left.to_string(), right.to_string()), score);
        Ok(())
    }

    /// `None` for an absent pair, never a silent zero.
    pub fn get(&self, left: &str, right: &str) -> Option<f64> {
        self.scores.get(&(left.to_string(), right.to_string())).copied()
    }

    pub fn read<R: BufRead>(reader: R, file: &str) -> Result<Self, ScoreError> {
        let mut table: Option<ScoreTable> = None;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let malformed = |message: String| ScoreError::Malformed {
                file: file.to_string(),
                line: line_no,
                message,
            };
            let line = line.map_err(|e| malformed(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            match table.as_mut() {
                None => {
                    let header: ScoreHeader =
                        serde_json::from_str(&line).map_err(|e| malformed(format!("bad header: {e}")))?;
                    table = Some(ScoreTable::new(header.kind, (header.range[0], header.range[1]))?);
                }
                Some(t) => {
                    let row: ScoreRow = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
                    t.insert(&row.left, &row.right, row.score)
                        .map_err(|e| malformed(e.to_string()))?;
                }
            }
        }
        table.ok_or_else(|| ScoreError::MissingHeader(file.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ScoreError> {
        let file = File::open(path).map_err(|e| ScoreError::Io(path.display().to_string(), e))?;
        Self::read(BufReader::new(file), &path.display().to_string())
    }

    /// Header first, then rows sorted by `(left, right)`.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = ScoreHeader { kind: self.kind, range: [self.range.0, self.range.1] };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        let mut keys: Vec<_> = self.scores.keys().collect();
        keys.sort();
        for (left, right) in keys {
            let row = ScoreRow {
                left: left.clone(),
                right: right.clone(),
                score: self.scores[&(left.clone(), right.clone())],
            };
            serde_json::to_writer(&mut w, &row)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Sentence id → vector, all of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable { dim, vectors: HashMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, id: &str, vector: Vec<f64>) -> Result<(), ScoreError> {
        if vector.len() != self.dim {
            return Err(ScoreError::DimensionMismatch { expected: self.dim, found: vector.len() });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(ScoreError::NonFinite(id.to_string()));
        }
        self.vectors.insert(id.to_string(), vector);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn read<R: BufRead>(reader: R, file: &str) -> Result<Self, ScoreError> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let malformed = |message: String| ScoreError::Malformed {
                file: file.to_string(),
                line: line_no,
                message,
            };
            let line = line.map_err(|e| malformed(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            match table.as_mut() {
                None => {
                    let header: EmbeddingHeader =
                        serde_json::from_str(&line).map_err(|e| malformed(format!("bad header: {e}")))?;
                    table = Some(EmbeddingTable::new(header.dim));
                }
                Some(t) => {
                    let row: EmbeddingRow = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
                    t.insert(&row.id, row.vector).map_err(|e| malformed(e.to_string()))?;
                }
            }
        }
        table.ok_or_else(|| ScoreError::MissingHeader(file.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ScoreError> {
        let file = File::open(path).map_err(|e| ScoreError::Io(path.display().to_string(), e))?;
        Self::read(BufReader::new(file), &path.display().to_string())
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &EmbeddingHeader { dim: self.dim })?;
        w.write_all(b"\n")?;
        let mut ids: Vec<_> = self.vectors.keys().collect();
        ids.sort();
        for id in ids {
            let row = EmbeddingRow { id: id.clone(), vector: self.vectors[id].clone() };
            serde_json::to_writer(&mut w, &row)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_file_round_trip() {
        let src = "{\"kind\": \"relevance\", \"range\": [0, 1]}\n{\"left\": \"q1\", \"right\": \"c1\", \"score\": 0.91}\n";
        let table = ScoreTable::read(src.as_bytes(), "scores").unwrap();
        assert_eq!(table.kind(), ScoreKind::Relevance);
        assert_eq!(table.get("q1", "c1"), Some(0.91));
        assert_eq!(table.get("q1", "c2"), None);
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        assert_eq!(ScoreTable::read(buf.as_slice(), "again").unwrap(), table);
    }

    #[test]
    fn out_of_range_row_rejected_with_line() {
        let src = "{\"kind\": \"predicate\", \"range\": [0, 1]}\n{\"left\": \"q1\", \"right\": \"P1\", \"score\": 1.2}\n";
        match ScoreTable::read(src.as_bytes(), "p").unwrap_err() {
            ScoreError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_header() {
        assert!(matches!(ScoreTable::read("".as_bytes(), "x"), Err(ScoreError::MissingHeader(_))));
    }

    #[test]
    fn embedding_dimension_enforced() {
        let src = "{\"dim\": 2}\n{\"id\": \"a\", \"vector\": [1.0, 0.0]}\n{\"id\": \"b\", \"vector\": [1.0]}\n";
        assert!(matches!(
            EmbeddingTable::read(src.as_bytes(), "e").unwrap_err(),
            ScoreError::Malformed { line: 3, .. }
        ));
    }
}
