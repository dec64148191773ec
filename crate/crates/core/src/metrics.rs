//! P@k, MAP and NDCG@k over ranked runs and graded qrels.
//!
//! Binary metrics treat a case as relevant when its normalized label reaches
//! the threshold. NDCG uses normalized labels as gains with a `log2(p + 1)`
//! discount and the ideal ordering taken over every judged case.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Qrels;
use crate::fusion::RunLine;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("query `{0}` appears in the run but has no judgments")]
    UnknownQuery(String),
    #[error("cutoff must be at least 1")]
    ZeroCutoff,
    #[error("case `{case}` ranked twice for query `{query}`")]
    DuplicateCase { query: String, case: String },
    #[error("binarization threshold must lie in (0, 1], got {0}")]
    BadThreshold(f64),
}

/// Ranked case ids per query, best first.
pub type Run = BTreeMap<String, Vec<String>>;

/// Groups run lines by query and orders each group by rank.
pub fn run_from_lines(lines: &[RunLine]) -> Result<Run, MetricsError> {
    let mut grouped: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
    for l in lines {
        grouped.entry(l.query_id.clone()).or_default().push((l.rank, l.case_id.clone()));
    }
    grouped
        .into_iter()
        .map(|(q, mut rows)| {
            rows.sort();
            let ids: Vec<String> = rows.into_iter().map(|(_, c)| c).collect();
            check_unique(&q, &ids)?;
            Ok((q, ids))
        })
        .collect()
}

/// Orders each query's candidates by descending score, ties by ascending id.
pub fn run_from_scores(scores: &BTreeMap<String, Vec<(String, f64)>>) -> Result<Run, MetricsError> {
    scores
        .iter()
        .map(|(q, rows)| {
            let mut rows = rows.clone();
            rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            let ids: Vec<String> = rows.into_iter().map(|(c, _)| c).collect();
            check_unique(q, &ids)?;
            Ok((q.clone(), ids))
        })
        .collect()
}

fn check_unique(query: &str, ids: &[String]) -> Result<(), MetricsError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(MetricsError::DuplicateCase { query: query.to_string(), case: id.clone() });
        }
    }
    Ok(())
}

/// `|top-k ∩ relevant| / k`, dividing by `k` even when fewer are ranked.
pub fn precision_at_k<S: AsRef<str>>(ranked: &[S], relevant: &HashSet<&str>, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = ranked.iter().take(k).filter(|id| relevant.contains(id.as_ref())).count();
    hits as f64 / k as f64
}

/// Average precision over the full ranking; `None` when nothing is relevant.
pub fn average_precision<S: AsRef<str>>(ranked: &[S], relevant: &HashSet<&str>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in ranked.iter().enumerate() {
        if relevant.contains(id.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / relevant.len() as f64)
}

/// Mean AP over the run, plus the queries skipped for having no relevant case.
pub fn mean_average_precision(run: &Run, qrels: &Qrels, threshold: f64) -> (f64, Vec<String>) {
    let mut skipped = Vec::new();
    let mut values = Vec::new();
    for (q, ranked) in run {
        match average_precision(ranked, &qrels.relevant(q, threshold)) {
            Some(ap) => values.push(ap),
            None => skipped.push(q.clone()),
        }
    }
    (mean(&values), skipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    /// gain = label
    #[default]
    Linear,
    /// gain = 2^label − 1
    Exponential,
}

impl GainMode {
    fn apply(self, label: f64) -> f64 {
        match self {
            GainMode::Linear => label,
            GainMode::Exponential => label.exp2() - 1.0,
        }
    }
}

fn dcg<I: IntoIterator<Item = f64>>(gains: I, k: usize) -> f64 {
    gains
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| g / ((i + 2) as f64).log2())
        .sum()
}

/// `DCG_k / IDCG_k`; unjudged cases gain 0 and an all-zero ideal gives 0.
pub fn ndcg_at_k<S: AsRef<str>>(ranked: &[S], labels: &HashMap<&str, f64>, k: usize, mode: GainMode) -> f64 {
    let mut ideal: Vec<f64> = labels.values().map(|&l| mode.apply(l)).collect();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(ideal, k);
    if idcg <= 0.0 {
        return 0.0;
    }
    let actual = ranked
        .iter()
        .map(|id| labels.get(id.as_ref()).map_or(0.0, |&l| mode.apply(l)));
    (dcg(actual, k) / idcg).min(1.0)
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub precision_cutoffs: Vec<usize>,
    pub ndcg_cutoffs: Vec<usize>,
    pub threshold: f64,
    pub gain_mode: GainMode,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            precision_cutoffs: vec![5, 10],
            ndcg_cutoffs: vec![10, 20, 30],
            threshold: 2.0 / 3.0,
            gain_mode: GainMode::Linear,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.precision_cutoffs.iter().chain(&self.ndcg_cutoffs).any(|&k| k == 0) {
            return Err(MetricsError::ZeroCutoff);
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(MetricsError::BadThreshold(self.threshold));
        }
        Ok(())
    }

    pub fn metric_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.precision_cutoffs.iter().map(|k| format!("P@{k}")).collect();
        names.push("MAP".to_string());
        names.extend(self.ndcg_cutoffs.iter().map(|k| format!("NDCG@{k}")));
        names
    }
}

/// One line of the structured report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_id: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub mean: bool,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub config: MetricConfig,
    pub metric_names: Vec<String>,
    /// Per query, values aligned with `metric_names`; `None` where the query
    /// has no relevant case and the binary metric is undefined.
    pub per_query: BTreeMap<String, Vec<Option<f64>>>,
    pub means: Vec<f64>,
    /// Queries excluded from the P@k and MAP means.
    pub no_relevant: Vec<String>,
}

impl MetricReport {
    fn index(&self, metric: &str) -> Option<usize> {
        self.metric_names.iter().position(|m| m == metric)
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.index(metric).map(|i| self.means[i])
    }

    pub fn value(&self, query_id: &str, metric: &str) -> Option<f64> {
        let i = self.index(metric)?;
        self.per_query.get(query_id)?[i]
    }

    pub fn records(&self) -> Vec<MetricRecord> {
        let mut out = Vec::new();
        for (q, values) in &self.per_query {
            for (name, v) in self.metric_names.iter().zip(values) {
                if let Some(value) = v {
                    out.push(MetricRecord { metric: name.clone(), query_id: Some(q.clone()), mean: false, value: *value });
                }
            }
        }
        for (name, &value) in self.metric_names.iter().zip(&self.means) {
            out.push(MetricRecord { metric: name.clone(), query_id: None, mean: true, value });
        }
        out
    }

    /// Aligned text table, one row per query then the mean row.
    pub fn table(&self) -> String {
        let label_width = self.per_query.keys().map(String::len).chain([5]).max().unwrap_or(5);
        let mut s = String::new();
        let _ = write!(s, "{:<label_width$}", "query");
        for name in &self.metric_names {
            let _ = write!(s, "  {name:>8}");
        }
        s.push('\n');
        for (q, values) in &self.per_query {
            let _ = write!(s, "{q:<label_width$}");
            for v in values {
                match v {
                    Some(v) => {
                        let _ = write!(s, "  {v:>8.4}");
                    }
                    None => {
                        let _ = write!(s, "  {:>8}", "-");
                    }
                }
            }
            s.push('\n');
        }
        let _ = write!(s, "{:<label_width$}", "mean");
        for v in &self.means {
            let _ = write!(s, "  {v:>8.4}");
        }
        s.push('\n');
        let _ = writeln!(
            s,
            "threshold {:.4}, gain {:?}, {} queries without relevant cases",
            self.config.threshold,
            self.config.gain_mode,
            self.no_relevant.len()
        );
        s
    }
}

/// Evaluates every query of the run. NDCG means cover all run queries; P@k
/// and MAP means cover those with at least one relevant case.
pub fn evaluate_run(run: &Run, qrels: &Qrels, config: &MetricConfig) -> Result<MetricReport, MetricsError> {
    config.validate()?;
    if let Some(q) = run.keys().find(|q| !qrels.contains_query(q)) {
        return Err(MetricsError::UnknownQuery(q.clone()));
    }
    let names = config.metric_names();
    let n_binary = config.precision_cutoffs.len() + 1;
    let mut per_query = BTreeMap::new();
    let mut no_relevant = Vec::new();
    for (q, ranked) in run {
        check_unique(q, ranked)?;
        let relevant = qrels.relevant(q, config.threshold);
        let labels = qrels.gains(q);
        let mut values: Vec<Option<f64>> = Vec::with_capacity(names.len());
        if relevant.is_empty() {
            no_relevant.push(q.clone());
            values.extend(std::iter::repeat_n(None, n_binary));
        } else {
            values.extend(config.precision_cutoffs.iter().map(|&k| Some(precision_at_k(ranked, &relevant, k))));
            values.push(average_precision(ranked, &relevant));
        }
        values.extend(config.ndcg_cutoffs.iter().map(|&k| Some(ndcg_at_k(ranked, &labels, k, config.gain_mode))));
        per_query.insert(q.clone(), values);
    }
    let means = (0..names.len())
        .map(|i| {
            let vals: Vec<f64> = per_query.values().filter_map(|v: &Vec<Option<f64>>| v[i]).collect();
            mean(&vals)
        })
        .collect();
    Ok(MetricReport { config: config.clone(), metric_names: names, per_query, means, no_relevant })
}
