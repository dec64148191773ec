//! Weighted reciprocal rank fusion.
//!
//! Each module's scores become a 1-based ranking π. A candidate's fused
//! score is
//!
//! ```text
//! r(c) = Σ_modules  w(π) / (ε + π)
//! w(π) = 1                                   neural module
//!      = sin(min(π / γ, 1) · π/2)            law and case modules, γ > 0
//!      = 1                                   γ = 0
//! ```
//!
//! so the neural module dominates near the top of the list and the symbolic
//! modules gain weight further down. With γ = 0 this is plain RRF.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("no module rankings to fuse")]
    Empty,
    #[error("{module} ranks a different candidate set than {reference}")]
    CandidateMismatch { module: ModuleKind, reference: ModuleKind },
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("gamma must be non-negative, got {0}")]
    BadGamma(f64),
    #[error("non-finite score for candidate `{0}`")]
    NonFinite(String),
    #[error("run line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    Neural,
    Law,
    Case,
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModuleKind::Neural => "neural",
            ModuleKind::Law => "law",
            ModuleKind::Case => "case",
        })
    }
}

/// Candidates of one module in rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleRanking {
    pub kind: ModuleKind,
    order: Vec<String>,
    ranks: HashMap<String, usize>,
}

impl ModuleRanking {
    /// Ids in rank order, best first.
    pub fn order(&self) -> &[String] {
        &self.order
    }

    /// 1-based rank.
    pub fn rank(&self, id: &str) -> Option<usize> {
        self.ranks.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Builds a ranking from an explicit order.
    pub fn from_order(kind: ModuleKind, order: Vec<String>) -> Self {
        let ranks = order.iter().enumerate().map(|(i, id)| (id.clone(), i + 1)).collect();
        ModuleRanking { kind, order, ranks }
    }
}

/// Sorts by descending score, ties by ascending id. `None` (unscored)
/// candidates follow every scored one, by ascending id.
pub fn rank_candidates(kind: ModuleKind, scores: &[(String, Option<f64>)]) -> Result<ModuleRanking, FusionError> {
    if let Some((id, _)) = scores.iter().find(|(_, s)| s.is_some_and(|v| !v.is_finite())) {
        return Err(FusionError::NonFinite(id.clone()));
    }
    let mut sorted: Vec<&(String, Option<f64>)> = scores.iter().collect();
    sorted.sort_by(|(ia, sa), (ib, sb)| match (sa, sb) {
        (Some(a), Some(b)) => b.total_cmp(a).then_with(|| ia.cmp(ib)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => ia.cmp(ib),
    });
    Ok(ModuleRanking::from_order(kind, sorted.into_iter().map(|(id, _)| id.clone()).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// The sine argument saturates at π/2, so weights never decrease.
    #[default]
    Clamped,
    /// `sin(π/γ · π/2)` as written; oscillates for ranks beyond γ.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub epsilon: f64,
    pub gamma: f64,
    pub weight_mode: WeightMode,
}

pub const DEFAULT_EPSILON: f64 = 60.0;
pub const DEFAULT_GAMMA: f64 = 2.0;

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { epsilon: DEFAULT_EPSILON, gamma: DEFAULT_GAMMA, weight_mode: WeightMode::Clamped }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(FusionError::BadEpsilon(self.epsilon));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(FusionError::BadGamma(self.gamma));
        }
        Ok(())
    }
}

pub fn wrrf_weight(rank: usize, gamma: f64, kind: ModuleKind, mode: WeightMode) -> f64 {
    if kind == ModuleKind::Neural || gamma == 0.0 {
        return 1.0;
    }
    let ratio = rank as f64 / gamma;
    let ratio = match mode {
        WeightMode::Clamped => ratio.min(1.0),
        WeightMode::Literal => ratio,
    };
    (ratio * std::f64::consts::FRAC_PI_2).sin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedEntry {
    pub id: String,
    pub score: f64,
}

/// Fuses rankings over the same candidate set. Output is in descending fused
/// score, ties by ascending id.
pub fn fuse(rankings: &[ModuleRanking], cfg: &FusionConfig) -> Result<Vec<FusedEntry>, FusionError> {
    cfg.validate()?;
    let first = rankings.first().ok_or(FusionError::Empty)?;
    let reference: BTreeSet<&str> = first.order.iter().map(String::as_str).collect();
    for r in &rankings[1..] {
        let set: BTreeSet<&str> = r.order.iter().map(String::as_str).collect();
        if set != reference {
            return Err(FusionError::CandidateMismatch { module: r.kind, reference: first.kind });
        }
    }
    let mut fused: Vec<FusedEntry> = reference
        .iter()
        .map(|&id| {
            let score = rankings
                .iter()
                .map(|r| {
                    let rank = r.ranks[id];
                    wrrf_weight(rank, cfg.gamma, r.kind, cfg.weight_mode) / (cfg.epsilon + rank as f64)
                })
                .sum();
            FusedEntry { id: id.to_string(), score }
        })
        .collect();
    fused.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
    Ok(fused)
}

/// One line of a run file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLine {
    pub query_id: String,
    pub case_id: String,
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

/// `query_id \t case_id \t rank \t score \t tag`, one line per candidate.
pub fn write_run<W: Write>(mut w: W, query_id: &str, entries: &[FusedEntry], tag: &str) -> std::io::Result<()> {
    for (i, e) in entries.iter().enumerate() {
        writeln!(w, "{}\t{}\t{}\t{:.12}\t{}", query_id, e.id, i + 1, e.score, tag)?;
    }
    Ok(())
}

/// Parses a run file, accepting tabs or runs of spaces between fields.
pub fn read_run<R: BufRead>(reader: R) -> Result<Vec<RunLine>, FusionError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let malformed = |message: String| FusionError::Malformed { line: i + 1, message };
        let line = line.map_err(|e| malformed(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(malformed(format!("expected 5 fields, found {}", fields.len())));
        }
        let rank = fields[2].parse().map_err(|_| malformed(format!("bad rank `{}`", fields[2])))?;
        let score = fields[3].parse().map_err(|_| malformed(format!("bad score `{}`", fields[3])))?;
        out.push(RunLine {
            query_id: fields[0].to_string(),
            case_id: fields[1].to_string(),
            rank,
            score,
            tag: fields[4].to_string(),
        });
    }
    Ok(out)
}
