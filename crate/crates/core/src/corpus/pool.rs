use std::collections::HashSet;

use rand::seq::index;

use super::CorpusError;
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq)]
pub struct PoolConfig {
    pub pool_size: usize,
    /// Hard : soft negative proportion, 1 : 4 by default.
    pub hard_parts: usize,
    pub soft_parts: usize,
    /// Depth of each retriever run that makes a case a hard negative.
    pub top_n: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig { pool_size: 50, hard_parts: 1, soft_parts: 4, top_n: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidatePool {
    pub positives: Vec<String>,
    pub hard: Vec<String>,
    pub soft: Vec<String>,
    /// Soft slots that had to be filled with hard negatives.
    pub soft_shortfall: usize,
    /// Hard slots that had to be filled with soft negatives.
    pub hard_shortfall: usize,
}

impl CandidatePool {
    pub fn ids(&self) -> Vec<String> {
        self.positives
            .iter()
            .chain(&self.hard)
            .chain(&self.soft)
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.hard.len() + self.soft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn sample(pool: &[&String], n: usize, rng: &mut impl rand::Rng) -> Vec<String> {
    let mut picked = index::sample(rng, pool.len(), n.min(pool.len())).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i].clone()).collect()
}

/// Builds one query's candidate pool from known positives plus negatives
/// mined from lexical retriever runs.
///
/// A case inside the top `top_n` of at least one run is a hard negative;
/// a case outside every run's top `top_n` is a soft negative. Slots left
/// after the positives are split hard : soft, rounding toward hard.
/// Sampling is deterministic under `seed`.
pub fn build_candidate_pool(
    positives: &[String],
    corpus_cases: &[String],
    runs: &[Vec<String>],
    config: &PoolConfig,
    seed: u64,
) -> Result<CandidatePool, CorpusError> {
    if runs.is_empty() {
        return Err(CorpusError::Pool("at least one retriever run is required".into()));
    }
    if config.hard_parts + config.soft_parts == 0 {
        return Err(CorpusError::Pool("hard and soft proportions are both zero".into()));
    }
    if positives.len() > config.pool_size {
        return Err(CorpusError::Pool(format!(
            "{} positives exceed pool size {}",
            positives.len(),
            config.pool_size
        )));
    }
    let positive_set: HashSet<&str> = positives.iter().map(String::as_str).collect();
    let top: HashSet<&str> = runs
        .iter()
        .flat_map(|run| run.iter().take(config.top_n).map(String::as_str))
        .collect();

    let mut hard_pool = Vec::new();
    let mut soft_pool = Vec::new();
    let mut seen = HashSet::new();
    for id in corpus_cases {
        if positive_set.contains(id.as_str()) || !seen.insert(id.as_str()) {
            continue;
        }
        if top.contains(id.as_str()) {
            hard_pool.push(id);
        } else {
            soft_pool.push(id);
        }
    }

    let remaining = config.pool_size - positives.len();
    let parts = config.hard_parts + config.soft_parts;
    let hard_target = (remaining * config.hard_parts).div_ceil(parts);
    let soft_target = remaining - hard_target;

    if hard_pool.len() + soft_pool.len() < remaining {
        return Err(CorpusError::Pool(format!(
            "need {remaining} negatives but only {} cases are available",
            hard_pool.len() + soft_pool.len()
        )));
    }

    let soft_shortfall = soft_target.saturating_sub(soft_pool.len());
    let hard_shortfall = hard_target.saturating_sub(hard_pool.len());
    let hard_take = hard_target - hard_shortfall + soft_shortfall;
    let soft_take = soft_target - soft_shortfall + hard_shortfall;

    let mut rng = substream(seed, "pool");
    let hard = sample(&hard_pool, hard_take, &mut rng);
    let soft = sample(&soft_pool, soft_take, &mut rng);

    Ok(CandidatePool {
        positives: positives.to_vec(),
        hard,
        soft,
        soft_shortfall,
        hard_shortfall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i:03}")).collect()
    }

    #[test]
    fn fifty_with_ten_positives() {
        let positives = ids("pos", 10);
        let mut corpus = positives.clone();
        corpus.extend(ids("c", 400));
        let run_a: Vec<String> = corpus[5..105].to_vec();
        let run_b: Vec<String> = corpus[300..400].to_vec();
        let pool = build_candidate_pool(&positives, &corpus, &[run_a.clone(), run_b.clone()], &PoolConfig::default(), 7)
            .unwrap();
        assert_eq!((pool.positives.len(), pool.hard.len(), pool.soft.len()), (10, 8, 32));
        assert_eq!(pool.soft_shortfall, 0);
        let top: HashSet<&String> = run_a.iter().chain(&run_b).collect();
        assert!(pool.hard.iter().all(|h| top.contains(h)));
        assert!(pool.soft.iter().all(|s| !top.contains(s)));
        assert!(pool.hard.iter().chain(&pool.soft).all(|c| !positives.contains(c)));
    }

    #[test]
    fn soft_shortfall_filled_with_hard() {
        let corpus = ids("c", 60);
        let run = corpus.clone();
        let pool = build_candidate_pool(&[], &corpus, &[run], &PoolConfig::default(), 1).unwrap();
        assert_eq!(pool.soft.len(), 0);
        assert_eq!(pool.hard.len(), 50);
        assert_eq!(pool.soft_shortfall, 40);
    }

    #[test]
    fn deterministic_under_seed() {
        let corpus = ids("c", 500);
        let run = corpus[..100].to_vec();
        let cfg = PoolConfig::default();
        let a = build_candidate_pool(&[], &corpus, &[run.clone()], &cfg, 42).unwrap();
        let b = build_candidate_pool(&[], &corpus, &[run.clone()], &cfg, 42).unwrap();
        let c = build_candidate_pool(&[], &corpus, &[run], &cfg, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn too_many_positives() {
        let corpus = ids("c", 10);
        let cfg = PoolConfig { pool_size: 2, ..PoolConfig::default() };
        assert!(build_candidate_pool(&corpus[..3], &corpus, &[corpus.clone()], &cfg, 0).is_err());
    }
}
