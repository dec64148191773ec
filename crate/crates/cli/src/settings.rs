//! Flat key-value settings. Every key can come from the TOML file named by
//! `--config` or from the flag of the same name; flags win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::Deserialize;

use juris_core::case_level::ExponentMode;
use juris_core::corpus::CorpusConfig;
use juris_core::explain::{EndpointConfig, RenderConfig};
use juris_core::fusion::{FusionConfig, WeightMode};
use juris_core::metrics::{GainMode, MetricConfig};
use juris_core::pipeline::EngineConfig;
use juris_core::scorers::{Bm25Params, Tokenizer};
use juris_core::traindata::TrainConfig;

macro_rules! settings {
    ($( $(#[doc = $doc:literal])* $name:ident : $ty:ty ),* $(,)?) => {
        #[derive(Debug, Clone, Default, Args, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct Settings {
            $(
                $(#[doc = $doc])*
                #[arg(long, global = true, help_heading = "Settings (flags or config keys)")]
                #[serde(default)]
                pub $name: Option<$ty>,
            )*
        }

        impl Settings {
            /// Values from `self`, falling back to `file`.
            pub fn over(self, file: Settings) -> Settings {
                Settings { $( $name: self.$name.or(file.$name), )* }
            }
        }
    };
}

settings! {
    /// Queries file, one `{"id", "text"}` per line
    queries: PathBuf,
    /// Candidate cases file, one `{"id", "text", "articles"}` per line
    cases: PathBuf,
    /// Judgments file, one `{"query_id", "case_id", "label"}` per line
    qrels: PathBuf,
    /// Rulebase in the rule DSL
    rules: PathBuf,
    /// External query-case relevance scores; BM25 over case texts when unset
    relevance_scores: PathBuf,
    /// External query-predicate scores; lexical overlap when unset
    predicate_scores: PathBuf,
    /// External sentence embeddings; hashed term counts when unset
    embeddings: PathBuf,
    /// Output directory [default: out]
    out_dir: PathBuf,
    /// Run file to evaluate [default: <out_dir>/run.tsv]
    run: PathBuf,
    /// Where `eval` writes its metric records as JSON lines
    metrics_out: PathBuf,
    /// Gold charges, one `{"query_id", "charge"}` per line
    gold: PathBuf,
    /// Case ids excluded from pretraining data, one per line
    holdout: PathBuf,
    /// Directory with instruction.txt, zero_shot.txt, few_shot.txt, evidence_with.txt
    templates_dir: PathBuf,
    /// Prompt log read by `llm-eval` [default: <out_dir>/prompts.jsonl]
    prompts: PathBuf,
    /// Query whose relevant case and gold charge serve as the few-shot example
    exemplar_query: String,
    /// mixed, whitespace or chars [default: mixed]
    tokenizer: Tokenizer,
    /// BM25 k1 [default: 1.2]
    bm25_k1: f64,
    /// BM25 b [default: 0.75]
    bm25_b: f64,
    /// Hashed embedding dimension [default: 512]
    embedding_dim: usize,
    /// Case sentences aligned per query sentence [default: 3]
    k: usize,
    /// surviving or nominal [default: surviving]
    exponent_mode: String,
    /// Fusion smoothing constant [default: 60]
    epsilon: f64,
    /// Rank at which symbolic weights saturate; 0 gives equal weights [default: 2]
    gamma: f64,
    /// clamped or literal [default: clamped]
    weight_mode: String,
    /// Highest raw relevance label [default: 3]
    max_level: u32,
    /// Normalized label counted as relevant [default: 0.6667]
    threshold: f64,
    /// linear or exponential [default: linear]
    gain_mode: String,
    /// Seed for every sampled quantity [default: 0]
    seed: u64,
    /// Worker threads, 0 for automatic [default: 0]
    threads: usize,
    /// Tag written in the last run-file column [default: wrrf]
    run_tag: String,
    /// Predicates below this score are left out of explanations [default: 0.5]
    render_threshold: f64,
    /// Positives per case for pretraining [default: 5]
    top_m: usize,
    /// Negatives per positive [default: 1]
    negative_ratio: f64,
    /// Share of negatives from the cited chapters [default: 0.5]
    hard_fraction: f64,
    /// Pseudo queries are cut to this many characters
    max_query_chars: usize,
    /// Chat endpoint base URL; requests go to <url>/chat/completions
    llm_base_url: String,
    /// Model name sent to the endpoint
    llm_model: String,
    /// Environment variable holding the bearer token [default: JURIS_LLM_TOKEN]
    llm_token_env: String,
    /// Per-request timeout in milliseconds [default: 60000]
    llm_timeout_ms: u64,
    /// Retries after a transient failure [default: 3]
    llm_max_retries: u32,
    /// First retry delay in milliseconds, doubled per retry [default: 500]
    llm_backoff_ms: u64,
    /// Requests in flight at once [default: 4]
    llm_concurrency: usize,
    /// Synthetic corpus: number of queries [default: 20]
    n_queries: usize,
    /// Synthetic corpus: candidates per query [default: 30]
    n_candidates: usize,
}

pub fn load_file(path: &Path) -> anyhow::Result<Settings> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

pub fn require<'a, T>(value: &'a Option<T>, key: &str) -> anyhow::Result<&'a T> {
    match value {
        Some(v) => Ok(v),
        None => bail!("missing required setting `{key}` (flag --{} or config key)", key.replace('_', "-")),
    }
}

impl Settings {
    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn tokenizer(&self) -> Tokenizer {
        self.tokenizer.unwrap_or_default()
    }

    pub fn bm25(&self) -> Bm25Params {
        let d = Bm25Params::default();
        Bm25Params { k1: self.bm25_k1.unwrap_or(d.k1), b: self.bm25_b.unwrap_or(d.b) }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn corpus_config(&self) -> CorpusConfig {
        let d = CorpusConfig::default();
        CorpusConfig {
            max_level: self.max_level.unwrap_or(d.max_level),
            binarize_threshold: self.threshold.unwrap_or(d.binarize_threshold),
            ..d
        }
    }

    pub fn fusion(&self) -> anyhow::Result<FusionConfig> {
        let d = FusionConfig::default();
        let weight_mode = match self.weight_mode.as_deref() {
            None | Some("clamped") => WeightMode::Clamped,
            Some("literal") => WeightMode::Literal,
            Some(other) => bail!("unknown weight_mode `{other}` (expected clamped or literal)"),
        };
        let cfg = FusionConfig {
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            gamma: self.gamma.unwrap_or(d.gamma),
            weight_mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn engine(&self) -> anyhow::Result<EngineConfig> {
        let exponent_mode = match self.exponent_mode.as_deref() {
            None | Some("surviving") => ExponentMode::Surviving,
            Some("nominal") => ExponentMode::Nominal,
            Some(other) => bail!("unknown exponent_mode `{other}` (expected surviving or nominal)"),
        };
        let d = EngineConfig::default();
        let k = self.k.unwrap_or(d.k);
        if k == 0 {
            bail!("k must be at least 1");
        }
        Ok(EngineConfig { k, exponent_mode, fusion: self.fusion()?, threads: self.threads.unwrap_or(0) })
    }

    pub fn metrics(&self) -> anyhow::Result<MetricConfig> {
        let gain_mode = match self.gain_mode.as_deref() {
            None | Some("linear") => GainMode::Linear,
            Some("exponential") => GainMode::Exponential,
            Some(other) => bail!("unknown gain_mode `{other}` (expected linear or exponential)"),
        };
        let cfg = MetricConfig { threshold: self.corpus_config().binarize_threshold, gain_mode, ..MetricConfig::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn render(&self) -> anyhow::Result<RenderConfig> {
        let cfg = RenderConfig { threshold: self.render_threshold.unwrap_or(0.5), ..RenderConfig::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train(&self) -> anyhow::Result<TrainConfig> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            top_m: self.top_m.unwrap_or(d.top_m),
            max_query_chars: self.max_query_chars,
            negative_ratio: self.negative_ratio.unwrap_or(d.negative_ratio),
            hard_fraction: self.hard_fraction.unwrap_or(d.hard_fraction),
            tokenizer: self.tokenizer(),
            bm25: self.bm25(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn endpoint(&self) -> EndpointConfig {
        let d = EndpointConfig::default();
        EndpointConfig {
            base_url: self.llm_base_url.clone().unwrap_or(d.base_url),
            model: self.llm_model.clone().unwrap_or(d.model),
            token_env: Some(self.llm_token_env.clone().unwrap_or_else(|| d.token_env.clone().unwrap_or_default())),
            timeout_ms: self.llm_timeout_ms.unwrap_or(d.timeout_ms),
            max_retries: self.llm_max_retries.unwrap_or(d.max_retries),
            backoff_ms: self.llm_backoff_ms.unwrap_or(d.backoff_ms),
            concurrency: self.llm_concurrency.unwrap_or(d.concurrency),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: Settings = toml::from_str("gamma = 50.0\nk = 2\nout_dir = \"a\"\n").unwrap();
        let flags = Settings { gamma: Some(0.0), ..Settings::default() };
        let merged = flags.over(file);
        assert_eq!(merged.gamma, Some(0.0));
        assert_eq!(merged.k, Some(2));
        assert_eq!(merged.out_dir(), PathBuf::from("a"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Settings>("gama = 1.0\n").is_err());
    }

    #[test]
    fn bad_enum_values() {
        let s = Settings { weight_mode: Some("wobbly".into()), ..Settings::default() };
        assert!(s.fusion().is_err());
        let s = Settings { epsilon: Some(0.0), ..Settings::default() };
        assert!(s.fusion().is_err());
    }
}
