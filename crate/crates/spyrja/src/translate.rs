//! Machine-translation orchestration: a pluggable batch client, a persistent
//! content-addressed cache, and the dataset builder that produces
//! questions-only or fully translated QA datasets.
//!
//! Questions, contexts and answers are translated independently; in full
//! mode the answer spans are recovered with the alignment cascade and
//! records whose answers cannot be located are dropped and counted.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::align::{align_dataset, AlignmentConfig, AlignmentStats};
use crate::corpus::{Document, QARecord};

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("service returned status {status}: {message}")]
    Service { status: u16, message: String },
    #[error("protocol: {0}")]
    Protocol(String),
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache line {line} is corrupt: {message}")]
    Corrupt { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{failed} of {total} translation units failed; refusing to emit a mostly-empty dataset")]
    SystemicFailure { failed: usize, total: usize },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitStatus {
    Pending,
    Done,
    Failed,
}

/// The unit of independent translation, keyed by a content hash so identical
/// text is never translated twice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationUnit {
    pub key: String,
    pub source_text: String,
    pub source_lang: String,
    pub target_lang: String,
    pub engine_id: String,
    pub translated_text: Option<String>,
    pub status: UnitStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Content hash of `(source_text, source_lang, target_lang, engine_id)`,
/// length-prefixed so field boundaries cannot collide.
pub fn unit_key(source_text: &str, source_lang: &str, target_lang: &str, engine_id: &str) -> String {
    let mut hasher = Sha256::new();
    for field in [source_text, source_lang, target_lang, engine_id] {
        hasher.update((field.len() as u64).to_le_bytes());
        hasher.update(field.as_bytes());
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

impl TranslationUnit {
    pub fn pending(source_text: &str, source_lang: &str, target_lang: &str, engine_id: &str) -> Self {
        TranslationUnit {
            key: unit_key(source_text, source_lang, target_lang, engine_id),
            source_text: source_text.to_string(),
            source_lang: source_lang.to_string(),
            target_lang: target_lang.to_string(),
            engine_id: engine_id.to_string(),
            translated_text: None,
            status: UnitStatus::Pending,
            error: None,
        }
    }
}

/// A batch translation backend. Implementations return one result per input
/// text, in order.
pub trait TranslationClient: Send + Sync {
    fn engine_id(&self) -> &str;
    fn translate(
        &self,
        texts: &[String],
        source_lang: &str,
        target_lang: &str,
    ) -> Vec<Result<String, ClientError>>;
}

/// Deterministic in-process client for tests and demos. Counts every
/// `translate` call so cache-idempotence can be asserted.
pub struct StubClient {
    engine: String,
    /// Explicit translations; texts not found fall back to `fallback`.
    map: HashMap<String, String>,
    fallback: StubFallback,
    fail_texts: Vec<String>,
    calls: AtomicUsize,
    texts_translated: AtomicUsize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StubFallback {
    /// Return the text unchanged.
    Echo,
    /// Uppercase the text; preserves substring relations, so exact alignment
    /// still succeeds on fully translated records.
    Uppercase,
}

impl StubClient {
    pub fn new(fallback: StubFallback) -> Self {
        StubClient {
            engine: "stub".into(),
            map: HashMap::new(),
            fallback,
            fail_texts: Vec::new(),
            calls: AtomicUsize::new(0),
            texts_translated: AtomicUsize::new(0),
        }
    }

    pub fn with_mapping(mut self, from: &str, to: &str) -> Self {
        self.map.insert(from.to_string(), to.to_string());
        self
    }

    /// Make the client fail any text equal to `text`.
    pub fn failing_on(mut self, text: &str) -> Self {
        self.fail_texts.push(text.to_string());
        self
    }

    /// Number of `translate` invocations so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn texts_translated(&self) -> usize {
        self.texts_translated.load(Ordering::SeqCst)
    }
}

impl TranslationClient for StubClient {
    fn engine_id(&self) -> &str {
        &self.engine
    }

    fn translate(
        &self,
        texts: &[String],
        _source_lang: &str,
        _target_lang: &str,
    ) -> Vec<Result<String, ClientError>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.texts_translated.fetch_add(texts.len(), Ordering::SeqCst);
        texts
            .iter()
            .map(|t| {
                if self.fail_texts.iter().any(|f| f == t) {
                    return Err(ClientError::Service {
                        status: 500,
                        message: "stub failure".into(),
                    });
                }
                if let Some(mapped) = self.map.get(t) {
                    return Ok(mapped.clone());
                }
                Ok(match self.fallback {
                    StubFallback::Echo => t.clone(),
                    StubFallback::Uppercase => t.to_uppercase(),
                })
            })
            .collect()
    }
}

/// JSON-over-HTTP client. Request shape:
/// `{"texts": [...], "source": "en", "target": "is"}`; response shape:
/// `{"translations": [...]}` with one entry per input text.
pub struct HttpClient {
    endpoint: String,
    api_key: Option<String>,
    engine: String,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct HttpRequest<'a> {
    texts: &'a [String],
    source: &'a str,
    target: &'a str,
}

#[derive(Deserialize)]
struct HttpResponse {
    translations: Vec<String>,
}

impl HttpClient {
    pub fn new(endpoint: &str, api_key: Option<String>) -> Self {
        HttpClient {
            endpoint: endpoint.to_string(),
            api_key,
            engine: format!("http:{endpoint}"),
            agent: ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(120)))
                .build()
                .into(),
        }
    }

    /// Read `MT_ENDPOINT` and `MT_API_KEY` from the environment.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var("MT_ENDPOINT").ok()?;
        let api_key = std::env::var("MT_API_KEY").ok();
        Some(HttpClient::new(&endpoint, api_key))
    }
}

impl TranslationClient for HttpClient {
    fn engine_id(&self) -> &str {
        &self.engine
    }

    fn translate(
        &self,
        texts: &[String],
        source_lang: &str,
        target_lang: &str,
    ) -> Vec<Result<String, ClientError>> {
        let body = HttpRequest {
            texts,
            source: source_lang,
            target: target_lang,
        };
        let mut request = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let outcome = request.send_json(&body).map_err(|e| match e {
            ureq::Error::StatusCode(code) => ClientError::Service {
                status: code,
                message: format!("http status {code}"),
            },
            other => ClientError::Transport(other.to_string()),
        });
        let parsed: Result<HttpResponse, ClientError> = outcome.and_then(|mut resp| {
            resp.body_mut()
                .read_json()
                .map_err(|e| ClientError::Protocol(e.to_string()))
        });
        match parsed {
            Ok(resp) if resp.translations.len() == texts.len() => {
                resp.translations.into_iter().map(Ok).collect()
            }
            Ok(resp) => {
                let err = ClientError::Protocol(format!(
                    "service returned {} translations for {} texts",
                    resp.translations.len(),
                    texts.len()
                ));
                texts.iter().map(|_| Err(err.clone())).collect()
            }
            Err(e) => texts.iter().map(|_| Err(e.clone())).collect(),
        }
    }
}

/// Retry behaviour for [`translate_batch`].
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    /// Additional attempts after the first.
    pub max_retries: usize,
    /// Backoff before retry `n` is `base_delay * 2^n`.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

/// Split the texts into up to `concurrency` chunks and run them on scoped
/// threads; result order matches input order regardless of completion order.
fn translate_texts(
    client: &dyn TranslationClient,
    texts: &[String],
    source_lang: &str,
    target_lang: &str,
    concurrency: usize,
) -> Vec<Result<String, ClientError>> {
    if concurrency <= 1 || texts.len() <= 1 {
        return client.translate(texts, source_lang, target_lang);
    }
    let chunk_size = texts.len().div_ceil(concurrency);
    let mut collected = Vec::with_capacity(texts.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = texts
            .chunks(chunk_size)
            .map(|chunk| scope.spawn(move || client.translate(chunk, source_lang, target_lang)))
            .collect();
        for handle in handles {
            collected.extend(handle.join().expect("translation worker panicked"));
        }
    });
    collected
}

/// Translate pending units in order. Failed units are retried with
/// exponential backoff and end up `Failed` with the last error; the call
/// itself always succeeds with per-unit outcomes. `concurrency` bounds the
/// number of parallel client requests.
pub fn translate_batch(
    client: &dyn TranslationClient,
    mut units: Vec<TranslationUnit>,
    policy: &RetryPolicy,
    concurrency: usize,
) -> Vec<TranslationUnit> {
    let mut pending: Vec<usize> = units
        .iter()
        .enumerate()
        .filter(|(_, u)| u.status == UnitStatus::Pending)
        .map(|(i, _)| i)
        .collect();
    if pending.is_empty() {
        return units;
    }
    let (source_lang, target_lang) = (
        units[pending[0]].source_lang.clone(),
        units[pending[0]].target_lang.clone(),
    );
    for attempt in 0..=policy.max_retries {
        if pending.is_empty() {
            break;
        }
        if attempt > 0 {
            let delay = policy.base_delay * 2u32.pow(attempt as u32 - 1);
            if !delay.is_zero() {
                std::thread::sleep(delay);
            }
        }
        let texts: Vec<String> = pending.iter().map(|&i| units[i].source_text.clone()).collect();
        let results = translate_texts(client, &texts, &source_lang, &target_lang, concurrency);
        let mut still_pending = Vec::new();
        for (&i, result) in pending.iter().zip(results) {
            match result {
                Ok(text) => {
                    units[i].translated_text = Some(text);
                    units[i].status = UnitStatus::Done;
                    units[i].error = None;
                }
                Err(e) => {
                    units[i].error = Some(e.to_string());
                    still_pending.push(i);
                }
            }
        }
        pending = still_pending;
    }
    for i in pending {
        units[i].status = UnitStatus::Failed;
    }
    units
}

/// Append-only single-file key-value store for translation units. Each line
/// is one JSON unit; on open the whole file is replayed into memory and a
/// later entry for the same key wins.
pub struct TranslationCache {
    entries: HashMap<String, TranslationUnit>,
    file: File,
}

impl TranslationCache {
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        let file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(path)?;
        let mut entries = HashMap::new();
        let reader = BufReader::new(&file);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let unit: TranslationUnit =
                serde_json::from_str(&line).map_err(|e| CacheError::Corrupt {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            entries.insert(unit.key.clone(), unit);
        }
        Ok(TranslationCache { entries, file })
    }

    pub fn get(&self, key: &str) -> Option<&TranslationUnit> {
        self.entries.get(key)
    }

    pub fn put(&mut self, unit: TranslationUnit) -> Result<(), CacheError> {
        let line = serde_json::to_string(&unit).expect("unit serializes");
        writeln!(self.file, "{line}")?;
        self.file.flush()?;
        self.entries.insert(unit.key.clone(), unit);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Which parts of a dataset get translated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetMode {
    /// Only questions are translated; contexts and answer spans stay put.
    QuestionsOnly,
    /// Questions, contexts and answers translated independently, answers
    /// re-anchored by the alignment cascade.
    Full,
}

#[derive(Debug, Clone)]
pub struct TranslateOptions {
    pub source_lang: String,
    pub target_lang: String,
    pub retry: RetryPolicy,
    /// Parallel client requests; the MT_CONCURRENCY environment variable
    /// feeds this from the CLI.
    pub concurrency: usize,
    /// Fraction of failed units (0..=1) above which the run aborts.
    pub systemic_failure_threshold: f64,
}

impl Default for TranslateOptions {
    fn default() -> Self {
        TranslateOptions {
            source_lang: "en".into(),
            target_lang: "is".into(),
            retry: RetryPolicy::default(),
            concurrency: 1,
            systemic_failure_threshold: 0.5,
        }
    }
}

/// Translate the texts behind `needed`, consulting the cache first and
/// persisting fresh results. Returns key -> translated text for every unit
/// that ended `Done` plus the number of failures.
fn translate_through_cache(
    client: &dyn TranslationClient,
    cache: &mut TranslationCache,
    needed: &[String],
    opts: &TranslateOptions,
) -> Result<(HashMap<String, String>, usize), PipelineError> {
    let engine = client.engine_id().to_string();
    let mut resolved: HashMap<String, String> = HashMap::new();
    let mut to_translate: Vec<TranslationUnit> = Vec::new();
    let mut queued: std::collections::HashSet<String> = std::collections::HashSet::new();
    for text in needed {
        let key = unit_key(text, &opts.source_lang, &opts.target_lang, &engine);
        if resolved.contains_key(&key) || queued.contains(&key) {
            continue;
        }
        match cache.get(&key) {
            Some(unit) if unit.status == UnitStatus::Done => {
                resolved.insert(key, unit.translated_text.clone().unwrap());
            }
            _ => {
                queued.insert(key);
                to_translate.push(TranslationUnit::pending(
                    text,
                    &opts.source_lang,
                    &opts.target_lang,
                    &engine,
                ));
            }
        }
    }
    let requested = to_translate.len();
    let mut failed = 0usize;
    if requested > 0 {
        let done = translate_batch(client, to_translate, &opts.retry, opts.concurrency);
        for unit in done {
            match unit.status {
                UnitStatus::Done => {
                    resolved.insert(unit.key.clone(), unit.translated_text.clone().unwrap());
                    cache.put(unit)?;
                }
                _ => failed += 1,
            }
        }
        if requested > 0
            && failed as f64 / requested as f64 > opts.systemic_failure_threshold
        {
            return Err(PipelineError::SystemicFailure {
                failed,
                total: requested,
            });
        }
    }
    Ok((resolved, failed))
}

fn lookup<'m>(
    map: &'m HashMap<String, String>,
    text: &str,
    opts: &TranslateOptions,
    engine: &str,
) -> Option<&'m String> {
    map.get(&unit_key(text, &opts.source_lang, &opts.target_lang, engine))
}

/// Build a translated dataset. Output documents keep their input order;
/// records are emitted sorted by record id so the result is deterministic
/// regardless of completion order.
pub fn build_translated_dataset(
    documents: &[Document],
    records: &[QARecord],
    client: &dyn TranslationClient,
    cache: &mut TranslationCache,
    mode: DatasetMode,
    align_config: &AlignmentConfig,
    opts: &TranslateOptions,
) -> Result<(Vec<Document>, Vec<QARecord>, AlignmentStats), PipelineError> {
    let engine = client.engine_id().to_string();

    let mut needed: Vec<String> = records.iter().map(|r| r.question.clone()).collect();
    if mode == DatasetMode::Full {
        needed.extend(documents.iter().map(|d| d.text.clone()));
        needed.extend(
            records
                .iter()
                .flat_map(|r| r.answers.iter().map(|a| a.text.clone())),
        );
    }
    let (resolved, _failed) = translate_through_cache(client, cache, &needed, opts)?;

    match mode {
        DatasetMode::QuestionsOnly => {
            let mut stats = AlignmentStats {
                total: records.len(),
                ..Default::default()
            };
            let mut out_records = Vec::new();
            for record in records {
                match lookup(&resolved, &record.question, opts, &engine) {
                    Some(question) => out_records.push(QARecord {
                        question: question.clone(),
                        ..record.clone()
                    }),
                    None => stats.missing += 1,
                }
            }
            out_records.sort_by(|a, b| a.id.cmp(&b.id));
            Ok((documents.to_vec(), out_records, stats))
        }
        DatasetMode::Full => {
            let mut out_documents = Vec::new();
            for doc in documents {
                if let Some(text) = lookup(&resolved, &doc.text, opts, &engine) {
                    out_documents.push(Document {
                        id: doc.id.clone(),
                        title: doc.title.clone(),
                        text: text.clone(),
                        lang: opts.target_lang.clone(),
                    });
                }
            }
            let doc_text: HashMap<&str, &str> = out_documents
                .iter()
                .map(|d| (d.id.as_str(), d.text.as_str()))
                .collect();

            let mut pre_missing = 0usize;
            let mut viable: Vec<QARecord> = Vec::new();
            let mut contexts: HashMap<String, String> = HashMap::new();
            let mut answers: HashMap<String, Vec<String>> = HashMap::new();
            for record in records {
                let Some(question) = lookup(&resolved, &record.question, opts, &engine) else {
                    pre_missing += 1;
                    continue;
                };
                let Some(&context) = doc_text.get(record.context_ref.as_str()) else {
                    pre_missing += 1;
                    continue;
                };
                let mut answer_translations = Vec::with_capacity(record.answers.len());
                let mut all_answers_ok = true;
                for answer in &record.answers {
                    match lookup(&resolved, &answer.text, opts, &engine) {
                        Some(t) => answer_translations.push(t.clone()),
                        None => {
                            all_answers_ok = false;
                            break;
                        }
                    }
                }
                if !all_answers_ok {
                    pre_missing += 1;
                    continue;
                }
                contexts.insert(record.id.clone(), context.to_string());
                answers.insert(record.id.clone(), answer_translations);
                viable.push(QARecord {
                    question: question.clone(),
                    ..record.clone()
                });
            }

            let (mut aligned, mut stats) = align_dataset(&viable, &contexts, &answers, align_config);
            stats.total = records.len();
            stats.missing += pre_missing;
            aligned.sort_by(|a, b| a.id.cmp(&b.id));
            Ok((out_documents, aligned, stats))
        }
    }
}
