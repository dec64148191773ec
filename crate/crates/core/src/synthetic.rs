//! Generated corpora with planted relevance.
//!
//! Every query targets one article and tells a short story. Its graded
//! candidates are built so that citing the target article and repeating the
//! story sentences track the label, while short distractor cases repeat the
//! query's words scattered across unrelated sentences. Bag-of-words BM25 is
//! drawn to the distractors; rule satisfaction and sentence alignment are not.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{write_jsonl, CaseRecord, Corpus, CorpusConfig, CorpusError, QrelRecord, QueryRecord};
use crate::explain::GoldCharge;
use crate::fol::{parse_rulebase, FolError, RuleBase};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_queries: usize,
    pub n_candidates: usize,
    pub n_chapters: usize,
    pub articles_per_chapter: usize,
    /// Cases per query at labels 3, 2 and 1.
    pub graded: [usize; 3],
    /// Label-0 cases per query that echo the query's words.
    pub distractors: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_queries: 20,
            n_candidates: 30,
            n_chapters: 4,
            articles_per_chapter: 3,
            graded: [3, 3, 4],
            distractors: 6,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub rules: String,
    pub queries: Vec<QueryRecord>,
    pub cases: Vec<CaseRecord>,
    pub qrels: Vec<QrelRecord>,
    /// Head of each query's target article.
    pub gold: Vec<GoldCharge>,
}

const PREDICATES_PER_ARTICLE: usize = 3;
const SENTENCE_LEN: usize = 5;

struct Article {
    id: String,
    chapter: usize,
    predicates: Vec<Vec<String>>,
    /// Predicate indices whose truth satisfies the body.
    witness: Vec<usize>,
}

struct Vocab {
    next: usize,
}

impl Vocab {
    fn word(&mut self) -> String {
        self.next += 1;
        format!("w{:05}", self.next)
    }

    fn words(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.word()).collect()
    }
}

fn sentence(words: &[String]) -> String {
    format!("{}。", words.join(" "))
}

fn text(sentences: &[String]) -> String {
    sentences.concat()
}

fn fresh_id(rng: &mut ChaCha8Rng, prefix: &str, used: &mut HashSet<String>) -> String {
    loop {
        let id = format!("{prefix}{:08x}", rng.random::<u32>());
        if used.insert(id.clone()) {
            return id;
        }
    }
}

fn build_articles(cfg: &SyntheticConfig, vocab: &mut Vocab) -> (Vec<Article>, String) {
    let mut articles = Vec::new();
    let mut preds = String::new();
    let mut rules = String::new();
    for ch in 0..cfg.n_chapters {
        for j in 0..cfg.articles_per_chapter {
            let id = format!("{}", 100 + ch * 10 + j);
            let predicates: Vec<Vec<String>> = (0..PREDICATES_PER_ARTICLE).map(|_| vocab.words(3)).collect();
            for (k, p) in predicates.iter().enumerate() {
                preds.push_str(&format!("pred P{id}_{k} @{id} : \"{}\"\n", p.join(" ")));
            }
            let (body, witness) = match j % 3 {
                0 => (format!("P{id}_0 | P{id}_1 | P{id}_2"), vec![0]),
                1 => (format!("(P{id}_0 & P{id}_1) | P{id}_2"), vec![0, 1]),
                _ => (format!("P{id}_0 & (P{id}_1 | P{id}_2)"), vec![0, 2]),
            };
            rules.push_str(&format!("article {id} chapter ch{ch} : {body} -> \"charge {id}\"\n"));
            articles.push(Article { id, chapter: ch, predicates, witness });
        }
    }
    (articles, format!("{preds}{rules}"))
}

/// `n` sentences of shared filler words.
fn filler(rng: &mut ChaCha8Rng, pool: &[String], n: usize) -> Vec<String> {
    (0..n)
        .map(|_| {
            let words: Vec<String> = pool.choose_multiple(rng, SENTENCE_LEN + 3).cloned().collect();
            sentence(&words)
        })
        .collect()
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticCorpus {
    let mut rng = substream(cfg.seed, "synthetic");
    let mut vocab = Vocab { next: 0 };
    let (articles, rules) = build_articles(cfg, &mut vocab);
    let filler_pool = vocab.words(2000);
    let mut used = HashSet::new();
    let mut queries = Vec::new();
    let mut cases = Vec::new();
    let mut qrels = Vec::new();
    let mut gold = Vec::new();

    for qi in 0..cfg.n_queries {
        let target = &articles[rng.random_range(0..articles.len())];
        let siblings: Vec<&Article> = articles.iter().filter(|a| a.chapter == target.chapter && a.id != target.id).collect();
        let strangers: Vec<&Article> = articles.iter().filter(|a| a.chapter != target.chapter).collect();

        let story: Vec<Vec<String>> = (0..2).map(|_| vocab.words(SENTENCE_LEN)).collect();
        let topic: Vec<Vec<String>> = (0..2).map(|_| vocab.words(SENTENCE_LEN)).collect();
        let mut q_sentences: Vec<String> = target.witness.iter().map(|&k| sentence(&target.predicates[k])).collect();
        q_sentences.extend(story.iter().map(|s| sentence(s)));
        q_sentences.extend(topic.iter().map(|s| sentence(s)));
        let query_id = format!("q{qi:02}");
        queries.push(QueryRecord { id: query_id.clone(), text: text(&q_sentences) });
        gold.push(GoldCharge { query_id: query_id.clone(), charge: format!("charge {}", target.id) });

        let mut pending: Vec<(CaseRecord, i64)> = Vec::new();
        let mut add = |rng: &mut ChaCha8Rng, sentences: Vec<String>, cited: Vec<String>, label: i64| {
            let id = fresh_id(rng, "c", &mut used);
            pending.push((CaseRecord { id, text: text(&sentences), articles: cited }, label));
        };

        // near-copies keep top-K alignment on strong pairs even when the
        // hashed fallback has bucket collisions with filler
        let variant = |rng: &mut ChaCha8Rng, words: &[String], replaced: usize| {
            let mut words = words.to_vec();
            for i in rand::seq::index::sample(rng, words.len(), replaced) {
                words[i] = filler_pool.choose(rng).expect("filler pool").clone();
            }
            sentence(&words)
        };
        for (level, &count) in cfg.graded.iter().enumerate() {
            let label = 3 - level as i64;
            for _ in 0..count {
                let n = rng.random_range(6..12);
                let mut s = filler(&mut rng, &filler_pool, n);
                let cited = match label {
                    3 => {
                        for w in &story {
                            s.push(sentence(w));
                            s.push(variant(&mut rng, w, 1));
                            s.push(variant(&mut rng, w, 1));
                        }
                        s.extend(target.witness.iter().map(|&k| sentence(&target.predicates[k])));
                        target.id.clone()
                    }
                    2 => {
                        let w = story.choose(&mut rng).expect("two story sentences").clone();
                        s.push(sentence(&w));
                        s.push(variant(&mut rng, &w, 1));
                        s.push(variant(&mut rng, &w, 2));
                        target.id.clone()
                    }
                    _ => {
                        let w = story.choose(&mut rng).expect("two story sentences").clone();
                        s.push(variant(&mut rng, &w, 2));
                        s.push(variant(&mut rng, &w, 3));
                        siblings.choose(&mut rng).map_or_else(|| target.id.clone(), |a| a.id.clone())
                    }
                };
                s.shuffle(&mut rng);
                add(&mut rng, s, vec![cited], label);
            }
        }

        let echo: Vec<&String> = story
            .iter()
            .chain(&topic)
            .flatten()
            .chain(target.witness.iter().flat_map(|&k| &target.predicates[k]))
            .collect();
        let n_distractors = rng.random_range(cfg.distractors.saturating_sub(2)..=cfg.distractors + 2);
        for _ in 0..n_distractors {
            let keep = rng.random_range(echo.len() / 2..=echo.len());
            let mut s: Vec<String> = echo
                .choose_multiple(&mut rng, keep)
                .map(|&w| {
                    let mut words: Vec<String> = filler_pool.choose_multiple(&mut rng, 3).cloned().collect();
                    words.push(w.clone());
                    words.push(w.clone());
                    sentence(&words)
                })
                .collect::<Vec<_>>();
            s.shuffle(&mut rng);
            let cited = strangers.choose(&mut rng).map(|a| a.id.clone()).into_iter().collect();
            add(&mut rng, s, cited, 0);
        }

        let graded_total: usize = cfg.graded.iter().sum::<usize>() + n_distractors;
        for _ in graded_total..cfg.n_candidates {
            let n = rng.random_range(4..14);
            let s = filler(&mut rng, &filler_pool, n);
            let cited = if rng.random_bool(0.2) {
                Vec::new()
            } else {
                strangers.choose(&mut rng).map(|a| a.id.clone()).into_iter().collect()
            };
            add(&mut rng, s, cited, 0);
        }

        pending.shuffle(&mut rng);
        for (case, label) in pending {
            qrels.push(QrelRecord { query_id: query_id.clone(), case_id: case.id.clone(), label });
            cases.push(case);
        }
    }
    SyntheticCorpus { rules, queries, cases, qrels, gold }
}

#[derive(Debug, thiserror::Error)]
pub enum SyntheticError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Rules(#[from] FolError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl SyntheticCorpus {
    pub fn rulebase(&self) -> Result<RuleBase, FolError> {
        parse_rulebase(&self.rules)
    }

    pub fn corpus(&self) -> Result<Corpus, SyntheticError> {
        let base = self.rulebase()?;
        let corpus = Corpus::from_records(self.queries.clone(), self.cases.clone(), self.qrels.clone(), CorpusConfig::default())?;
        Ok(corpus.with_rulebase(Arc::new(base)))
    }

    /// Writes `queries.jsonl`, `cases.jsonl`, `qrels.jsonl`, `gold.jsonl` and `rules.fol`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), SyntheticError> {
        std::fs::create_dir_all(dir)?;
        let open = |name: &str| File::create(dir.join(name)).map(BufWriter::new);
        let mut w = open("queries.jsonl")?;
        write_jsonl(&mut w, &self.queries)?;
        w.flush()?;
        let mut w = open("cases.jsonl")?;
        write_jsonl(&mut w, &self.cases)?;
        w.flush()?;
        let mut w = open("qrels.jsonl")?;
        write_jsonl(&mut w, &self.qrels)?;
        w.flush()?;
        let mut w = open("gold.jsonl")?;
        write_jsonl(&mut w, &self.gold)?;
        w.flush()?;
        std::fs::write(dir.join("rules.fol"), &self.rules)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let cfg = SyntheticConfig::default();
        let a = generate(&cfg);
        assert_eq!(a.queries.len(), 20);
        assert_eq!(a.cases.len(), 600);
        assert_eq!(a.qrels.len(), 600);
        assert_eq!(a, generate(&cfg));
        let c = a.corpus().unwrap();
        assert!(c.queries().iter().all(|q| c.candidates(&q.id).len() == 30));
        assert_ne!(a, generate(&SyntheticConfig { seed: 7, ..cfg }));
    }
}
