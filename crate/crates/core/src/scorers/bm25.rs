//! Okapi BM25 over a fixed document collection.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Collection statistics. Built once, read-only afterwards.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    n_docs: usize,
    avg_len: f64,
    doc_freq: HashMap<String, usize>,
}

impl Bm25Index {
    pub fn build<I, D, S>(docs: I, params: Bm25Params) -> Self
    where
        I: IntoIterator<Item = D>,
        D: AsRef<[S]>,
        S: AsRef<str>,
    {
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        let mut n_docs = 0usize;
        let mut total_len = 0usize;
        for doc in docs {
            let doc = doc.as_ref();
            n_docs += 1;
            total_len += doc.len();
            let unique: HashSet<&str> = doc.iter().map(AsRef::as_ref).collect();
            for term in unique {
                *doc_freq.entry(term.to_string()).or_default() += 1;
            }
        }
        let avg_len = if n_docs == 0 { 0.0 } else { total_len as f64 / n_docs as f64 };
        Bm25Index { params, n_docs, avg_len, doc_freq }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    /// `ln((N - df + 0.5) / (df + 0.5) + 1)`, always positive.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.doc_freq.get(term).copied().unwrap_or(0) as f64;
        let n = self.n_docs as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Sum over query terms (repeats included) of
    /// `idf · tf · (k1 + 1) / (tf + k1 · (1 - b + b · len / avg_len))`.
    pub fn score<S: AsRef<str>, T: AsRef<str>>(&self, query: &[S], doc: &[T]) -> f64 {
        if query.is_empty() || doc.is_empty() {
            return 0.0;
        }
        let mut tf: HashMap<&str, usize> = HashMap::new();
        for t in doc {
            *tf.entry(t.as_ref()).or_default() += 1;
        }
        let Bm25Params { k1, b } = self.params;
        let len_ratio = if self.avg_len > 0.0 { doc.len() as f64 / self.avg_len } else { 1.0 };
        let norm = k1 * (1.0 - b + b * len_ratio);
        query
            .iter()
            .filter_map(|q| tf.get(q.as_ref()).map(|&f| (q, f as f64)))
            .map(|(q, f)| self.idf(q.as_ref()) * f * (k1 + 1.0) / (f + norm))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_doc_single_token() {
        let index = Bm25Index::build([vec!["x"]], Bm25Params::default());
        // N = 1, df = 1: ln((1 - 1 + 0.5) / (1 + 0.5) + 1) = ln(4/3)
        let expected_idf = (4.0f64 / 3.0).ln();
        assert!((index.idf("x") - expected_idf).abs() < 1e-12);
        assert!((index.idf("x") - 0.287_682_072_451_780_9).abs() < 1e-12);
        // tf factor = 1 · 2.2 / (1 + 1.2 · 1) = 1
        assert!((index.score(&["x"], &["x"]) - expected_idf).abs() < 1e-12);
    }

    #[test]
    fn absent_terms_contribute_nothing() {
        let index = Bm25Index::build([vec!["a", "b"], vec!["c"]], Bm25Params::default());
        assert_eq!(index.score(&["z", "y"], &["a", "b"]), 0.0);
        assert_eq!(index.score::<&str, &str>(&[], &["a"]), 0.0);
    }

    proptest! {
        #[test]
        fn monotone_in_term_frequency(tf in 0usize..20, filler in 1usize..10) {
            let index = Bm25Index::build([vec!["a"; 5], vec!["b"; 5]], Bm25Params::default());
            let doc = |tf: usize, filler: usize| {
                let mut d = vec!["a"; tf];
                d.extend(vec!["c"; filler]);
                d
            };
            let base = index.score(&["a"], &doc(tf, filler));
            // one filler token becomes the query term; length unchanged
            let raised = index.score(&["a"], &doc(tf + 1, filler - 1));
            prop_assert!(base >= 0.0);
            prop_assert!(raised >= base);
        }

        #[test]
        fn disjoint_vocabulary_scores_zero(q in prop::collection::vec("[a-e]", 0..6), d in prop::collection::vec("[f-j]", 0..6)) {
            let index = Bm25Index::build([d.clone()], Bm25Params::default());
            prop_assert_eq!(index.score(&q, &d), 0.0);
        }
    }
}
