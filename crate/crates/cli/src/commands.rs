use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use serde::Serialize;

use juris_core::corpus::{load_corpus, read_jsonl_file, write_jsonl, Corpus, CorpusConfig, Qrels};
use juris_core::explain::{
    accuracy_by_kind, build_prompt, gold_map, judge_accuracy, pick_relevant_case, prompt_id, render_explanation, Completion,
    Exemplar, GoldCharge, LlmClient, PromptKind, PromptRecord, PromptSpec, TemplateSet,
};
use juris_core::fol::{parse_rulebase, RuleBase};
use juris_core::fusion::{read_run, write_run};
use juris_core::metrics::{evaluate_run, run_from_lines};
use juris_core::pipeline::{ablate, ablation_table, Engine, QueryResult};
use juris_core::scorers::{
    Bm25Relevance, EmbeddingBackend, EmbeddingTable, PredicateBackend, RelevanceBackend, ScoreTable,
    DEFAULT_EMBEDDING_DIM,
};
use juris_core::synthetic::{generate, SyntheticConfig};
use juris_core::traindata::{build_pretraining_set, write_pretraining_set};

use crate::settings::{require, Settings};

/// Error carrying the process exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const USAGE: u8 = 1;
pub const DATA: u8 = 2;
pub const ENDPOINT: u8 = 3;

pub type Outcome = Result<(), Failure>;

pub trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn data(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: USAGE, error: e.into() })
    }

    fn data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: DATA, error: e.into() })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).data()?;
    }
    File::create(path).map(BufWriter::new).with_context(|| format!("creating {}", path.display())).data()
}

fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Outcome {
    let mut w = create(path)?;
    write_jsonl(&mut w, records).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display())).data()
}

fn load_rules(path: &Path) -> Result<RuleBase, Failure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).data()?;
    parse_rulebase(&text).with_context(|| format!("in {}", path.display())).data()
}

fn corpus(s: &Settings) -> Result<Corpus, Failure> {
    let queries = require(&s.queries, "queries").usage()?;
    let cases = require(&s.cases, "cases").usage()?;
    let qrels = require(&s.qrels, "qrels").usage()?;
    let cfg = s.corpus_config();
    cfg.validate().usage()?;
    load_corpus(queries, cases, qrels, cfg).data()
}

fn corpus_with_rules(s: &Settings) -> Result<Corpus, Failure> {
    let rules = require(&s.rules, "rules").usage()?;
    let corpus = corpus(s)?;
    Ok(corpus.with_rulebase(Arc::new(load_rules(rules)?)))
}

fn engine<'a>(s: &Settings, corpus: &'a Corpus) -> Result<Engine<'a>, Failure> {
    let cfg = s.engine().usage()?;
    let tokenizer = s.tokenizer();
    let relevance = match &s.relevance_scores {
        Some(p) => RelevanceBackend::external(ScoreTable::load(p).data()?).data()?,
        None => RelevanceBackend::Bm25(Arc::new(Bm25Relevance::from_corpus(corpus, tokenizer, s.bm25()))),
    };
    let predicates = match &s.predicate_scores {
        Some(p) => PredicateBackend::external(ScoreTable::load(p).data()?).data()?,
        None => PredicateBackend::Lexical(tokenizer),
    };
    let embeddings = match &s.embeddings {
        Some(p) => EmbeddingBackend::External(Arc::new(EmbeddingTable::load(p).data()?)),
        None => EmbeddingBackend::Hashed { dim: s.embedding_dim.unwrap_or(DEFAULT_EMBEDDING_DIM), tokenizer },
    };
    if embeddings.dim() == 0 {
        return Err(anyhow!("embedding_dim must be at least 1")).usage();
    }
    Engine::new(corpus, relevance, predicates, embeddings, cfg).data()
}

fn rank_all(engine: &Engine) -> Result<Vec<QueryResult>, Failure> {
    engine.rank_all().data()
}

pub fn ingest(s: &Settings) -> Outcome {
    let corpus = corpus(s)?;
    let counts = corpus.candidate_counts();
    let sizes: Vec<usize> = counts.iter().map(|(_, n)| *n).collect();
    println!("queries\t{}", corpus.queries().len());
    println!("cases\t{}", corpus.cases().len());
    println!("judgments\t{}", corpus.qrels().len());
    println!("candidates per query\tmin {}\tmax {}", sizes.iter().min().unwrap_or(&0), sizes.iter().max().unwrap_or(&0));
    let threshold = corpus.config().binarize_threshold;
    let without: Vec<&str> =
        corpus.queries().iter().map(|q| q.id.as_str()).filter(|q| corpus.qrels().relevant(q, threshold).is_empty()).collect();
    println!("queries without a relevant case\t{}", without.len());
    println!("cases citing no article\t{}", corpus.uncited_cases().len());
    if let Some(path) = &s.rules {
        let base = load_rules(path)?;
        let known: HashSet<&str> = base.rules().iter().map(|r| r.article_id.as_str()).collect();
        let unknown: HashSet<&str> = corpus
            .cases()
            .iter()
            .flat_map(|c| &c.cited_article_ids)
            .map(String::as_str)
            .filter(|a| !known.contains(a))
            .collect();
        println!("articles with rules\t{}", known.len());
        println!("cited articles without a rule\t{}", unknown.len());
    }
    Ok(())
}

pub fn rank(s: &Settings) -> Outcome {
    let corpus = corpus_with_rules(s)?;
    let engine = engine(s, &corpus)?;
    let results = rank_all(&engine)?;
    let out = s.out_dir();
    let tag = s.run_tag.as_deref().unwrap_or("wrrf");

    let path = out.join("run.tsv");
    let mut w = create(&path)?;
    for r in &results {
        write_run(&mut w, &r.query_id, &r.fused, tag).with_context(|| format!("writing {}", path.display())).data()?;
    }
    w.flush().data()?;
    let scores: Vec<_> = results.iter().flat_map(|r| r.scores.iter().cloned()).collect();
    write_records(&out.join("scores.jsonl"), &scores)?;
    let law: Vec<_> = results.iter().flat_map(QueryResult::law_records).collect();
    write_records(&out.join("law_explanations.jsonl"), &law)?;
    let case: Vec<_> = results.iter().flat_map(QueryResult::case_records).collect();
    write_records(&out.join("case_explanations.jsonl"), &case)?;
    println!("ranked {} queries into {}", results.len(), path.display());
    Ok(())
}

pub fn eval(s: &Settings) -> Outcome {
    let run_path = s.run.clone().unwrap_or_else(|| s.out_dir().join("run.tsv"));
    let qrels_path = require(&s.qrels, "qrels").usage()?;
    let metric_cfg = s.metrics().usage()?;
    let cfg = s.corpus_config();
    cfg.validate().usage()?;
    let file = File::open(&run_path).with_context(|| format!("opening {}", run_path.display())).data()?;
    let lines = read_run(BufReader::new(file)).with_context(|| format!("in {}", run_path.display())).data()?;
    let run = run_from_lines(&lines).data()?;
    let qrels = Qrels::load(qrels_path, cfg.max_level).data()?;
    let report = evaluate_run(&run, &qrels, &metric_cfg).data()?;
    print!("{}", report.table());
    if let Some(path) = &s.metrics_out {
        write_records(path, &report.records())?;
    }
    Ok(())
}

pub fn ablate_cmd(s: &Settings) -> Outcome {
    let corpus = corpus_with_rules(s)?;
    let engine = engine(s, &corpus)?;
    let metric_cfg = s.metrics().usage()?;
    let results = rank_all(&engine)?;
    let rows = ablate(&results, corpus.qrels(), &engine.config().fusion, &metric_cfg).data()?;
    print!("{}", ablation_table(&rows));
    Ok(())
}

fn read_holdout(path: &Path) -> Result<HashSet<String>, Failure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).data()?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

pub fn prep_train(s: &Settings) -> Outcome {
    let cases_path = require(&s.cases, "cases").usage()?;
    let rules = load_rules(require(&s.rules, "rules").usage()?)?;
    let cfg = s.train().usage()?;
    let holdout = match &s.holdout {
        Some(p) => read_holdout(p)?,
        None => HashSet::new(),
    };
    let cases = read_jsonl_file(cases_path).data()?.into_iter().map(|(_, c)| c).collect();
    let corpus = Corpus::from_records(Vec::new(), cases, Vec::new(), CorpusConfig::default()).data()?;
    let (records, summary) = build_pretraining_set(corpus.cases(), &rules, &cfg, &holdout, s.seed()).data()?;

    let out = s.out_dir();
    let path = out.join("pretrain.jsonl");
    let mut w = create(&path)?;
    write_pretraining_set(&mut w, &records).and_then(|_| w.flush()).data()?;
    let mut w = create(&out.join("pretrain_summary.json"))?;
    serde_json::to_writer_pretty(&mut w, &summary).map_err(anyhow::Error::from).data()?;
    writeln!(w).and_then(|_| w.flush()).data()?;

    println!("cases used\t{}", summary.cases_used);
    println!("holdout excluded\t{}", summary.holdout_excluded);
    println!("skipped\t{}", summary.skipped.len());
    println!("positives\t{}", summary.positives);
    println!("hard negatives\t{}", summary.hard);
    println!("easy negatives\t{}", summary.easy);
    if summary.hard_shortfall + summary.easy_shortfall + summary.unfilled > 0 {
        println!(
            "shortfall\thard {}\teasy {}\tunfilled {}",
            summary.hard_shortfall, summary.easy_shortfall, summary.unfilled
        );
    }
    Ok(())
}

fn read_gold(path: &Path) -> Result<HashMap<String, String>, Failure> {
    Ok(gold_map(read_jsonl_file::<GoldCharge>(path).data()?.into_iter().map(|(_, g)| g).collect()))
}

/// Relevant case and its rendered explanation for one query.
struct Evidence {
    case_id: String,
    case_text: String,
    explanation: String,
}

fn evidence(corpus: &Corpus, result: &QueryResult, s: &Settings) -> Result<Option<Evidence>, Failure> {
    let ranked: Vec<&str> = result.fused.iter().map(|e| e.id.as_str()).collect();
    let Some(case_id) = pick_relevant_case(&result.query_id, &ranked, corpus.qrels(), corpus.config().binarize_threshold)
    else {
        return Ok(None);
    };
    let render = s.render().usage()?;
    let explanation =
        render_explanation(result.law_explanation(case_id), result.case_explanation(case_id), &render).data()?;
    let case = corpus.case(case_id).ok_or_else(|| anyhow!("case `{case_id}` is not in the corpus")).data()?;
    Ok(Some(Evidence { case_id: case_id.to_string(), case_text: case.text.clone(), explanation }))
}

pub fn prompts(s: &Settings) -> Outcome {
    let corpus = corpus_with_rules(s)?;
    let gold = read_gold(require(&s.gold, "gold").usage()?)?;
    let templates = match &s.templates_dir {
        Some(dir) => TemplateSet::from_dir(dir).usage()?,
        None => TemplateSet::default(),
    };
    let engine = engine(s, &corpus)?;
    let results = rank_all(&engine)?;
    let mut evidences = Vec::with_capacity(results.len());
    for r in &results {
        evidences.push(evidence(&corpus, r, s)?);
    }
    if let Some(q) = &s.exemplar_query {
        if corpus.query(q).is_none() {
            return Err(anyhow!("exemplar query `{q}` is not in the corpus")).usage();
        }
    }
    let exemplar_for = |i: usize| -> Option<Exemplar> {
        let usable = |j: usize| {
            let ev = evidences[j].as_ref()?;
            let answer = gold.get(&results[j].query_id)?;
            let query = corpus.query(&results[j].query_id)?;
            Some(Exemplar {
                query: query.text.clone(),
                case: ev.case_text.clone(),
                explanation: Some(ev.explanation.clone()),
                answer: answer.clone(),
            })
        };
        match &s.exemplar_query {
            Some(q) => results.iter().position(|r| &r.query_id == q).filter(|&j| j != i).and_then(usable),
            None => (0..results.len()).filter(|&j| j != i).find_map(usable),
        }
    };

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let Some(ev) = &evidences[i] else {
            skipped.push(format!("{}: no relevant case", r.query_id));
            continue;
        };
        let query = corpus.query(&r.query_id).expect("ranked queries come from the corpus");
        let exemplar = exemplar_for(i);
        for kind in PromptKind::ALL {
            if kind.few_shot() && exemplar.is_none() {
                skipped.push(format!("{}: no exemplar for {kind}", r.query_id));
                continue;
            }
            let spec = PromptSpec {
                kind,
                query: query.text.clone(),
                case: ev.case_text.clone(),
                explanation: kind.with_explanation().then(|| ev.explanation.clone()),
                exemplar: if kind.few_shot() { exemplar.clone() } else { None },
            };
            let prompt = build_prompt(&spec, &templates).data()?;
            records.push(PromptRecord {
                prompt_id: prompt_id(&r.query_id, kind),
                query_id: r.query_id.clone(),
                case_id: ev.case_id.clone(),
                kind,
                prompt,
            });
        }
    }
    let path = s.out_dir().join("prompts.jsonl");
    write_records(&path, &records)?;
    for line in &skipped {
        eprintln!("skipped {line}");
    }
    println!("wrote {} prompts to {}", records.len(), path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct FailureRecord {
    prompt_id: String,
    error: String,
}

pub fn llm_eval(s: &Settings) -> Outcome {
    let prompts_path = s.prompts.clone().unwrap_or_else(|| s.out_dir().join("prompts.jsonl"));
    let gold = read_gold(require(&s.gold, "gold").usage()?)?;
    let prompts: Vec<PromptRecord> = read_jsonl_file(&prompts_path).data()?.into_iter().map(|(_, p)| p).collect();
    if let Some(p) = prompts.iter().find(|p| !gold.contains_key(&p.query_id)) {
        return Err(anyhow!("no gold charge for query `{}`", p.query_id)).data();
    }
    let cfg = s.endpoint();
    if cfg.concurrency == 0 {
        return Err(anyhow!("llm_concurrency must be at least 1")).usage();
    }
    let client = LlmClient::http(&cfg);
    let texts: Vec<String> = prompts.iter().map(|p| p.prompt.clone()).collect();
    let replies = client.complete_all(&texts);

    let mut completions = Vec::new();
    let mut failures = Vec::new();
    for (p, reply) in prompts.iter().zip(replies) {
        match reply {
            Ok(text) => completions.push(Completion {
                prompt_id: p.prompt_id.clone(),
                query_id: p.query_id.clone(),
                kind: p.kind,
                text,
            }),
            Err(e) => failures.push((e.is_endpoint(), FailureRecord { prompt_id: p.prompt_id.clone(), error: e.to_string() })),
        }
    }
    let (judgments, accuracy) = judge_accuracy(&completions, &gold).data()?;
    let out = s.out_dir();
    write_records(&out.join("judgments.jsonl"), &judgments)?;
    let failure_log: Vec<&FailureRecord> = failures.iter().map(|(_, f)| f).collect();
    write_records(&out.join("llm_failures.jsonl"), &failure_log)?;

    for (kind, n, acc) in accuracy_by_kind(&judgments) {
        println!("{kind}\t{n}\t{acc:.4}");
    }
    println!("all\t{}\t{accuracy:.4}", judgments.len());
    if failures.is_empty() {
        return Ok(());
    }
    let code = if failures.iter().any(|(endpoint, _)| *endpoint) { ENDPOINT } else { DATA };
    Err(Failure { code, error: anyhow!("{} of {} prompts failed; see llm_failures.jsonl", failures.len(), prompts.len()) })
}

pub fn rules_stats(s: &Settings) -> Outcome {
    let base = load_rules(require(&s.rules, "rules").usage()?)?;
    let c = base.operator_counts();
    println!("articles\t{}", c.articles);
    println!("predicates\t{}", c.predicates);
    println!("negation\t{}", c.negations);
    println!("conjunction\t{}", c.conjunctions);
    println!("disjunction\t{}", c.disjunctions);
    println!("implication\t{}", c.implications);
    Ok(())
}

pub fn synth(s: &Settings) -> Outcome {
    let d = SyntheticConfig::default();
    let cfg = SyntheticConfig {
        n_queries: s.n_queries.unwrap_or(d.n_queries),
        n_candidates: s.n_candidates.unwrap_or(d.n_candidates),
        seed: s.seed.unwrap_or(d.seed),
        ..d
    };
    let graded: usize = cfg.graded.iter().sum::<usize>() + cfg.distractors + 2;
    if cfg.n_candidates < graded {
        return Err(anyhow!("n_candidates must be at least {graded}")).usage();
    }
    let out: PathBuf = s.out_dir();
    generate(&cfg).write_to_dir(&out).data()?;
    println!("wrote {} queries x {} candidates to {}", cfg.n_queries, cfg.n_candidates, out.display());
    Ok(())
}
