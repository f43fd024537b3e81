//! Stance classification backends and the batch driver.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use super::lexicon::Lexicon;
use super::{ClassifiedMessage, RawMessage, Source, Stance};

pub const SYSTEM_PROMPT: &str = include_str!("system_prompt.txt");
const USER_PROMPT: &str = include_str!("user_prompt.txt");

pub const CLASSIFIER_URL_ENV: &str = "NML_CLASSIFIER_URL";

/// User prompt with the message body interpolated.
pub fn user_prompt(body: &str) -> String {
    USER_PROMPT.replacen("{}", body, 1)
}

/// Parses a category string. Case-insensitive, whitespace-tolerant, and
/// ignores wrapping quotes and trailing punctuation.
pub fn parse_label(raw: &str) -> Option<Stance> {
    let trimmed = raw.trim().trim_matches(|c: char| c == '"' || c == '\'' || c == '.' || c == ',' || c.is_whitespace());
    let norm = trimmed.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    match norm.as_str() {
        "very hawkish" => Some(Stance::VeryHawkish),
        "hawkish" => Some(Stance::Hawkish),
        "neutral" => Some(Stance::Neutral),
        "dovish" => Some(Stance::Dovish),
        "very dovish" => Some(Stance::VeryDovish),
        _ => None,
    }
}

#[derive(Debug, Error, Clone)]
#[error("{0}")]
pub struct TransportError(pub String);

/// A source of raw category strings for a message body.
pub trait StanceClassifier: Sync {
    fn source(&self) -> Source;

    /// One classification attempt. Transport retries are the backend's
    /// concern; an `Err` means it gave up.
    fn respond(&self, body: &str) -> Result<String, TransportError>;
}

#[derive(Debug, Clone, Default)]
pub struct LexiconClassifier {
    lexicon: Lexicon,
}

impl LexiconClassifier {
    pub fn new() -> Self {
        Self::default()
    }
}

impl StanceClassifier for LexiconClassifier {
    fn source(&self) -> Source {
        Source::Lexicon
    }

    fn respond(&self, body: &str) -> Result<String, TransportError> {
        Ok(self.lexicon.score(body).label().to_string())
    }
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub url: String,
    pub timeout: Duration,
    /// Transport-level retries per request.
    pub retries: usize,
    pub backoff: Duration,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into(), timeout: Duration::from_secs(30), retries: 3, backoff: Duration::from_millis(200) }
    }

    /// Reads the endpoint from `NML_CLASSIFIER_URL`.
    pub fn from_env() -> Option<Self> {
        std::env::var(CLASSIFIER_URL_ENV).ok().filter(|u| !u.is_empty()).map(Self::new)
    }
}

/// HTTP classifier: POSTs `{"system", "user"}` JSON and expects
/// `{"category": ...}` back.
pub struct RemoteClassifier {
    cfg: RemoteConfig,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct CategoryReply {
    category: String,
}

impl RemoteClassifier {
    pub fn new(cfg: RemoteConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(cfg.timeout).build();
        Self { cfg, agent }
    }

    fn attempt(&self, body: &str) -> Result<String, TransportError> {
        let payload = serde_json::json!({ "system": SYSTEM_PROMPT, "user": user_prompt(body) });
        let resp = self.agent.post(&self.cfg.url).send_json(payload).map_err(|e| TransportError(e.to_string()))?;
        let reply: CategoryReply = resp.into_json().map_err(|e| TransportError(format!("bad reply: {e}")))?;
        Ok(reply.category)
    }
}

impl StanceClassifier for RemoteClassifier {
    fn source(&self) -> Source {
        Source::Remote
    }

    fn respond(&self, body: &str) -> Result<String, TransportError> {
        let mut last = TransportError("no attempt made".into());
        for attempt in 0..=self.cfg.retries {
            match self.attempt(body) {
                Ok(c) => return Ok(c),
                Err(e) => {
                    log::debug!("classifier request failed (attempt {}): {e}", attempt + 1);
                    last = e;
                    if attempt < self.cfg.retries {
                        std::thread::sleep(self.cfg.backoff * 2u32.pow(attempt as u32));
                    }
                }
            }
        }
        Err(last)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BatchOptions {
    /// Re-asks after an unparseable category before defaulting to Neutral.
    pub label_retries: usize,
    pub concurrency: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self { label_retries: 2, concurrency: 4 }
    }
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub classified: Vec<ClassifiedMessage>,
    /// Messages that defaulted to Neutral after unparseable replies.
    pub fallbacks: usize,
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("classifier unreachable: {unclassified} message(s) unclassified; last error: {last_error}")]
    Unreachable { unclassified: usize, last_error: String },
}

enum One {
    Done(Stance, bool),
    Failed(TransportError),
}

fn classify_one(backend: &dyn StanceClassifier, body: &str, label_retries: usize) -> One {
    if body.trim().is_empty() {
        return One::Done(Stance::Neutral, false);
    }
    for _ in 0..=label_retries {
        match backend.respond(body) {
            Ok(raw) => {
                if let Some(s) = parse_label(&raw) {
                    return One::Done(s, false);
                }
                log::debug!("unparseable category {raw:?}");
            }
            Err(e) => return One::Failed(e),
        }
    }
    log::warn!("defaulting to Neutral after {} unparseable replies", label_retries + 1);
    One::Done(Stance::Neutral, true)
}

/// Classifies every message, preserving input order.
pub fn classify_batch(messages: &[RawMessage], backend: &dyn StanceClassifier, opts: BatchOptions) -> Result<BatchOutcome, ClassifyError> {
    let n = messages.len();
    let slots: Vec<Mutex<Option<One>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = opts.concurrency.clamp(1, n.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = classify_one(backend, &messages[i].body, opts.label_retries);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    let mut classified = Vec::with_capacity(n);
    let mut fallbacks = 0;
    let mut failed = 0;
    let mut last_error = String::new();
    for (m, slot) in messages.iter().zip(slots) {
        match slot.into_inner().unwrap().expect("every slot visited") {
            One::Done(stance, fell_back) => {
                fallbacks += fell_back as usize;
                classified.push(ClassifiedMessage { message: m.clone(), stance, source: backend.source() });
            }
            One::Failed(e) => {
                failed += 1;
                last_error = e.0;
            }
        }
    }
    if failed > 0 {
        return Err(ClassifyError::Unreachable { unclassified: failed, last_error });
    }
    Ok(BatchOutcome { classified, fallbacks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use std::sync::atomic::AtomicUsize;

    fn msg(id: &str, body: &str) -> RawMessage {
        RawMessage {
            id: id.into(),
            created_at: NaiveDate::from_ymd_opt(2024, 1, 3).unwrap().and_hms_opt(9, 0, 0).unwrap(),
            body: body.into(),
            likes: 0,
            reshares: 0,
        }
    }

    struct Scripted {
        replies: Vec<&'static str>,
        calls: AtomicUsize,
    }

    impl StanceClassifier for Scripted {
        fn source(&self) -> Source {
            Source::Remote
        }
        fn respond(&self, _body: &str) -> Result<String, TransportError> {
            let i = self.calls.fetch_add(1, Ordering::SeqCst);
            match self.replies.get(i).or(self.replies.last()) {
                Some(&"DOWN") => Err(TransportError("connection refused".into())),
                Some(r) => Ok(r.to_string()),
                None => Err(TransportError("no script".into())),
            }
        }
    }

    #[test]
    fn label_variants() {
        assert_eq!(parse_label("  Very hawkish\n"), Some(Stance::VeryHawkish));
        assert_eq!(parse_label("\"Very Dovish.\""), Some(Stance::VeryDovish));
        assert_eq!(parse_label("NEUTRAL"), Some(Stance::Neutral));
        assert_eq!(parse_label("Somewhat hawkish"), None);
        assert_eq!(parse_label("Hawkish, because rates"), None);
    }

    #[test]
    fn prompt_interpolates_body() {
        let p = user_prompt("rates up");
        assert!(p.contains("Analyze the tweet: \"rates up\""));
        assert!(!p.contains("{}"));
        assert!(SYSTEM_PROMPT.contains("your response should only be a category"));
    }

    #[test]
    fn lexicon_batch_preserves_order() {
        let msgs = vec![msg("1", "Fed must hike aggressively, 100bps now"), msg("2", ""), msg("3", "rate hike")];
        let out = classify_batch(&msgs, &LexiconClassifier::new(), BatchOptions::default()).unwrap();
        let stances: Vec<i8> = out.classified.iter().map(|c| c.stance.value()).collect();
        assert_eq!(stances, vec![-2, 0, -1]);
        assert_eq!(out.classified[2].message.id, "3");
        assert_eq!(out.fallbacks, 0);
    }

    #[test]
    fn garbage_replies_retry_then_fall_back() {
        let backend = Scripted { replies: vec!["maybe?", "I think hawkish", "???"], calls: AtomicUsize::new(0) };
        let opts = BatchOptions { label_retries: 2, concurrency: 1 };
        let out = classify_batch(&[msg("1", "something")], &backend, opts).unwrap();
        assert_eq!(out.classified[0].stance, Stance::Neutral);
        assert_eq!(out.fallbacks, 1);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 3);

        let backend = Scripted { replies: vec!["nope", " Dovish "], calls: AtomicUsize::new(0) };
        let out = classify_batch(&[msg("1", "something")], &backend, opts).unwrap();
        assert_eq!(out.classified[0].stance, Stance::Dovish);
        assert_eq!(out.fallbacks, 0);
    }

    #[test]
    fn unreachable_backend_reports_count() {
        let backend = Scripted { replies: vec!["DOWN"], calls: AtomicUsize::new(0) };
        let msgs = vec![msg("1", "a"), msg("2", "b"), msg("3", "")];
        match classify_batch(&msgs, &backend, BatchOptions::default()) {
            Err(ClassifyError::Unreachable { unclassified, .. }) => assert_eq!(unclassified, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
