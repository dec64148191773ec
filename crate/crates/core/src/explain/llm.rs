//! Chat-completion client with retries and a concurrency cap, plus
//! charge-match scoring of completions.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::ExplainError;
use super::prompt::PromptKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth.
    pub token_env: Option<String>,
    pub timeout_ms: u64,
    pub max_retries: u32,
    /// First retry delay; doubled on every further retry.
    pub backoff_ms: u64,
    pub concurrency: usize,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "gpt-3.5-turbo".into(),
            token_env: Some("JURIS_LLM_TOKEN".into()),
            timeout_ms: 60_000,
            max_retries: 3,
            backoff_ms: 500,
            concurrency: 4,
        }
    }
}

/// Outcome classes for one request attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum AttemptError {
    /// Worth retrying: connection failure, timeout, 429 or 5xx.
    Transient(String),
    /// Not worth retrying: other statuses, malformed responses.
    Permanent(String),
}

/// One request, no retries. Sampling temperature is always 0.
pub trait ChatTransport: Sync {
    fn send(&self, prompt: &str) -> Result<String, AttemptError>;
}

/// The request body sent for `prompt`.
pub fn request_body(model: &str, prompt: &str) -> Value {
    json!({
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0,
    })
}

/// Extracts `choices[0].message.content`.
pub fn parse_completion(body: &Value) -> Result<String, AttemptError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| AttemptError::Permanent("response lacks choices[0].message.content".into()))
}

pub struct HttpTransport {
    agent: ureq::Agent,
    url: String,
    model: String,
    token: Option<String>,
}

impl HttpTransport {
    pub fn new(cfg: &EndpointConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let token = cfg.token_env.as_deref().and_then(|v| std::env::var(v).ok());
        HttpTransport {
            agent,
            url: format!("{}/chat/completions", cfg.base_url.trim_end_matches('/')),
            model: cfg.model.clone(),
            token,
        }
    }
}

impl ChatTransport for HttpTransport {
    fn send(&self, prompt: &str) -> Result<String, AttemptError> {
        let mut req = self.agent.post(&self.url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send_json(request_body(&self.model, prompt)).map_err(|e| match e {
            ureq::Error::Json(e) => AttemptError::Permanent(e.to_string()),
            ureq::Error::BadUri(u) => AttemptError::Permanent(format!("bad url {u}")),
            other => AttemptError::Transient(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(AttemptError::Transient(format!("status {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(AttemptError::Permanent(format!("status {status}")));
        }
        let body: Value = resp.body_mut().read_json().map_err(|e| AttemptError::Permanent(e.to_string()))?;
        parse_completion(&body)
    }
}

pub struct LlmClient<T: ChatTransport> {
    transport: T,
    max_retries: u32,
    backoff: Duration,
    concurrency: usize,
}

impl LlmClient<HttpTransport> {
    pub fn http(cfg: &EndpointConfig) -> Self {
        LlmClient::new(HttpTransport::new(cfg), cfg)
    }
}

impl<T: ChatTransport> LlmClient<T> {
    pub fn new(transport: T, cfg: &EndpointConfig) -> Self {
        LlmClient {
            transport,
            max_retries: cfg.max_retries,
            backoff: Duration::from_millis(cfg.backoff_ms),
            concurrency: cfg.concurrency.max(1),
        }
    }

    /// Up to `1 + max_retries` attempts; transient failures back off
    /// exponentially.
    pub fn complete(&self, prompt: &str) -> Result<String, ExplainError> {
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.transport.send(prompt) {
                Ok(text) => return Ok(text),
                Err(AttemptError::Permanent(msg)) => return Err(ExplainError::Endpoint(msg)),
                Err(AttemptError::Transient(msg)) => {
                    if attempt > self.max_retries {
                        return Err(ExplainError::RetriesExhausted { attempts: attempt, last: msg });
                    }
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }

    /// Completes every prompt with at most `concurrency` requests in flight.
    /// Results follow input order.
    pub fn complete_all(&self, prompts: &[String]) -> Vec<Result<String, ExplainError>> {
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<Result<String, ExplainError>>>> = Mutex::new(vec![None; prompts.len()]);
        std::thread::scope(|s| {
            for _ in 0..self.concurrency.min(prompts.len()) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(p) = prompts.get(i) else { break };
                    let r = self.complete(p);
                    results.lock().expect("result lock poisoned")[i] = Some(r);
                });
            }
        });
        results
            .into_inner()
            .expect("result lock poisoned")
            .into_iter()
            .map(|r| r.expect("every prompt is processed"))
            .collect()
    }
}

/// Lowercased with whitespace and ASCII or CJK punctuation removed.
pub fn normalize_charge(s: &str) -> String {
    const CJK_PUNCT: &str = "，。！？；：、“”‘’（）《》【】「」『』〈〉…—·～﹏";
    s.chars()
        .filter(|c| !c.is_whitespace() && !c.is_ascii_punctuation() && !CJK_PUNCT.contains(*c))
        .flat_map(char::to_lowercase)
        .collect()
}

/// The first non-empty completion line with surrounding punctuation trimmed.
pub fn extract_charge(completion: &str) -> String {
    completion
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("")
        .trim_matches(|c: char| c.is_ascii_punctuation() || "，。！？；：、“”".contains(c))
        .trim()
        .to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub prompt_id: String,
    pub query_id: String,
    pub kind: PromptKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmJudgment {
    pub prompt_id: String,
    pub query_id: String,
    pub kind: PromptKind,
    pub completion: String,
    pub extracted: String,
    pub gold: String,
    pub matched: bool,
}

/// Match iff the normalized gold charge occurs in the normalized completion.
pub fn judge(c: &Completion, gold: &str) -> LlmJudgment {
    let g = normalize_charge(gold);
    LlmJudgment {
        prompt_id: c.prompt_id.clone(),
        query_id: c.query_id.clone(),
        kind: c.kind,
        completion: c.text.clone(),
        extracted: extract_charge(&c.text),
        gold: gold.to_string(),
        matched: !g.is_empty() && normalize_charge(&c.text).contains(&g),
    }
}

/// Judgments plus matches / total; 0 for no completions.
pub fn judge_accuracy(
    completions: &[Completion],
    gold: &HashMap<String, String>,
) -> Result<(Vec<LlmJudgment>, f64), ExplainError> {
    let judgments = completions
        .iter()
        .map(|c| {
            gold.get(&c.query_id)
                .map(|g| judge(c, g))
                .ok_or_else(|| ExplainError::MissingGold(c.query_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let acc = if judgments.is_empty() {
        0.0
    } else {
        judgments.iter().filter(|j| j.matched).count() as f64 / judgments.len() as f64
    };
    Ok((judgments, acc))
}

/// Accuracy per prompt kind, in kind order.
pub fn accuracy_by_kind(judgments: &[LlmJudgment]) -> Vec<(PromptKind, usize, f64)> {
    PromptKind::ALL
        .into_iter()
        .filter_map(|k| {
            let of_kind: Vec<&LlmJudgment> = judgments.iter().filter(|j| j.kind == k).collect();
            if of_kind.is_empty() {
                return None;
            }
            let hits = of_kind.iter().filter(|j| j.matched).count();
            Some((k, of_kind.len(), hits as f64 / of_kind.len() as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    struct Scripted {
        replies: Mutex<Vec<Result<String, AttemptError>>>,
        calls: AtomicUsize,
    }

    impl ChatTransport for Scripted {
        fn send(&self, _: &str) -> Result<String, AttemptError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.replies.lock().unwrap().remove(0)
        }
    }

    fn quick(max_retries: u32) -> EndpointConfig {
        EndpointConfig { max_retries, backoff_ms: 1, ..EndpointConfig::default() }
    }

    fn scripted(replies: Vec<Result<String, AttemptError>>) -> Scripted {
        Scripted { replies: Mutex::new(replies), calls: AtomicUsize::new(0) }
    }

    #[test]
    fn retries_then_gives_up() {
        let t = scripted(vec![Err(AttemptError::Transient("500".into())); 3]);
        let client = LlmClient::new(t, &quick(2));
        assert!(matches!(client.complete("p"), Err(ExplainError::RetriesExhausted { attempts: 3, .. })));
        assert_eq!(client.transport.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn retry_recovers_and_permanent_stops() {
        let t = scripted(vec![Err(AttemptError::Transient("t".into())), Ok("盗窃罪".into())]);
        assert_eq!(LlmClient::new(t, &quick(2)).complete("p").unwrap(), "盗窃罪");
        let t = scripted(vec![Err(AttemptError::Permanent("400".into())), Ok("x".into())]);
        let client = LlmClient::new(t, &quick(5));
        assert!(matches!(client.complete("p"), Err(ExplainError::Endpoint(_))));
        assert_eq!(client.transport.calls.load(Ordering::SeqCst), 1);
    }

    struct Echo;
    impl ChatTransport for Echo {
        fn send(&self, prompt: &str) -> Result<String, AttemptError> {
            Ok(prompt.to_uppercase())
        }
    }

    #[test]
    fn complete_all_keeps_order() {
        let prompts: Vec<String> = (0..20).map(|i| format!("p{i}")).collect();
        let out = LlmClient::new(Echo, &EndpointConfig { concurrency: 3, ..quick(0) }).complete_all(&prompts);
        let got: Vec<String> = out.into_iter().map(Result::unwrap).collect();
        let want: Vec<String> = (0..20).map(|i| format!("P{i}")).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn charge_matching() {
        let c = |q: &str, t: &str| Completion { prompt_id: q.into(), query_id: q.into(), kind: PromptKind::ZeroShotWith, text: t.into() };
        let gold: HashMap<String, String> =
            [("a", "盗窃罪"), ("b", "盗窃罪"), ("c", "Theft"), ("d", "诈骗罪")].map(|(k, v)| (k.to_string(), v.to_string())).into();
        let (js, acc) = judge_accuracy(
            &[c("a", "被告构成盗窃罪。"), c("b", "诈骗罪"), c("c", "The answer is: theft."), c("d", "诈 骗 罪")],
            &gold,
        )
        .unwrap();
        assert_eq!(js.iter().map(|j| j.matched).collect::<Vec<_>>(), vec![true, false, true, true]);
        assert_eq!(acc, 0.75);
        assert_eq!(js[0].extracted, "被告构成盗窃罪");
        assert!(matches!(judge_accuracy(&[c("zz", "x")], &gold), Err(ExplainError::MissingGold(_))));
    }

    /// Serves one canned HTTP response per connection and records bodies.
    fn stub_server(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut bodies = Vec::new();
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0u8; len];
                reader.read_exact(&mut buf).unwrap();
                bodies.push(String::from_utf8(buf).unwrap());
                let mut stream = reader.into_inner();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            bodies
        });
        (format!("http://{addr}/v1"), handle)
    }

    #[test]
    fn http_round_trip_with_temperature_zero() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"盗窃罪"}}]}"#.to_string();
        let (url, handle) = stub_server(vec![(503, "{}".into()), (200, ok)]);
        let cfg = EndpointConfig { base_url: url, token_env: None, ..quick(2) };
        assert_eq!(LlmClient::http(&cfg).complete("prompt text").unwrap(), "盗窃罪");
        let bodies = handle.join().unwrap();
        assert_eq!(bodies.len(), 2);
        let body: Value = serde_json::from_str(&bodies[1]).unwrap();
        assert_eq!(body["temperature"], json!(0));
        assert_eq!(body["messages"][0]["content"], json!("prompt text"));
    }

    #[test]
    fn http_client_error_is_permanent() {
        let (url, handle) = stub_server(vec![(401, "{}".into())]);
        let cfg = EndpointConfig { base_url: url, token_env: None, ..quick(3) };
        assert!(matches!(LlmClient::http(&cfg).complete("p"), Err(ExplainError::Endpoint(_))));
        assert_eq!(handle.join().unwrap().len(), 1);
    }
}
