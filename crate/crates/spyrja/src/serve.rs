//! Query answering over a built phrase index, plus the HTTP service.
//!
//! The service accepts pre-embedded question vectors as the primary
//! interface and falls back to the built-in hash embedder for plain-text
//! questions, so everything stays hermetically testable. The index and
//! projection are loaded once and never mutate; every response is a pure
//! function of the loaded state and the request body.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::HashEmbedder;
use crate::eval::{normalize_answer, PredictedAnswer};
use crate::phrase_index::{load_index, mips_search_flat, IndexError, PhraseIndex};
use crate::qtrain::{QueryProjection, TrainError};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Projection(#[from] TrainError),
    #[error("projection expects question dim {expected}, request carries {got}")]
    QuestionDimension { expected: usize, got: usize },
    #[error("unknown embedder {0:?}; only \"hash\" is built in")]
    UnknownEmbedder(String),
    #[error("request carries neither question_vector nor question text")]
    EmptyRequest,
    #[error("failed to bind http server: {0}")]
    Bind(String),
}

/// Answers for one question, ranked by raw inner product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub question: String,
    pub answers: Vec<PredictedAnswer>,
    pub latency_ms: f64,
}

/// Project (when a projection is present), search, and map hits back to
/// phrase provenance. With `dedup` the ranked list keeps only the best hit
/// per normalized answer text.
pub fn answer_question(
    question_label: &str,
    question_vector: &[f32],
    index: &PhraseIndex,
    projection: Option<&QueryProjection>,
    k: usize,
    dedup: bool,
) -> Result<QueryResponse, ServeError> {
    let started = Instant::now();
    let search_vector: Vec<f32> = match projection {
        Some(proj) => {
            if question_vector.len() != proj.cols {
                return Err(ServeError::QuestionDimension {
                    expected: proj.cols,
                    got: question_vector.len(),
                });
            }
            let q64: Vec<f64> = question_vector.iter().map(|&x| x as f64).collect();
            proj.project(&q64)?.iter().map(|&x| x as f32).collect()
        }
        None => question_vector.to_vec(),
    };

    let fetch = if dedup { index.flat.len() } else { k };
    let hits = mips_search_flat(&index.flat, &search_vector, fetch)?;

    let mut answers = Vec::with_capacity(k.min(hits.len()));
    let mut seen: std::collections::HashSet<String> = std::collections::HashSet::new();
    for hit in hits {
        let meta = index.flat.meta(hit.ordinal);
        if dedup {
            let norm = normalize_answer(&meta.text, false);
            if !seen.insert(norm) {
                continue;
            }
        }
        answers.push(PredictedAnswer {
            text: meta.text.clone(),
            score: hit.score as f64,
            doc_id: meta.doc_id.clone(),
            char_start: meta.char_start,
            char_end: meta.char_end,
        });
        if answers.len() == k {
            break;
        }
    }

    Ok(QueryResponse {
        question: question_label.to_string(),
        answers,
        latency_ms: started.elapsed().as_secs_f64() * 1000.0,
    })
}

/// End-to-end wiring for the toy pipeline and the service, read from a JSON
/// config file; command-line flags override individual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub dataset_path: Option<PathBuf>,
    pub cache_path: Option<PathBuf>,
    pub vectors_path: Option<PathBuf>,
    pub index_path: Option<PathBuf>,
    pub projection_path: Option<PathBuf>,
    pub alignment_threshold: f64,
    pub ivf_centroids: Option<usize>,
    pub nprobe: Option<usize>,
    pub seed: u64,
    pub port: u16,
    pub k: usize,
    pub dedup: bool,
    pub embedder_dim: usize,
    pub embedder_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset_path: None,
            cache_path: None,
            vectors_path: None,
            index_path: None,
            projection_path: None,
            alignment_threshold: 0.9,
            ivf_centroids: None,
            nprobe: None,
            seed: 0,
            port: 8080,
            k: 10,
            dedup: true,
            embedder_dim: 64,
            embedder_seed: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
struct QueryRequest {
    #[serde(default)]
    question_vector: Option<Vec<f32>>,
    #[serde(default)]
    question: Option<String>,
    #[serde(default)]
    embedder: Option<String>,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    dedup: Option<bool>,
}

/// Loaded, immutable service state.
pub struct QaService {
    index: PhraseIndex,
    projection: Option<QueryProjection>,
    embedder: HashEmbedder,
    default_k: usize,
    default_dedup: bool,
}

impl QaService {
    pub fn load(
        index_path: &Path,
        projection_path: Option<&Path>,
        default_k: usize,
        default_dedup: bool,
        embedder_seed: u64,
    ) -> Result<Self, ServeError> {
        let index = load_index(index_path)?;
        let projection = match projection_path {
            Some(p) => Some(QueryProjection::load(p)?),
            None => None,
        };
        let question_dim = projection
            .as_ref()
            .map(|p| p.cols)
            .or(index.flat.dim())
            .unwrap_or(1);
        Ok(QaService {
            index,
            projection,
            embedder: HashEmbedder::new(question_dim, embedder_seed),
            default_k,
            default_dedup,
        })
    }

    pub fn from_parts(
        index: PhraseIndex,
        projection: Option<QueryProjection>,
        default_k: usize,
        default_dedup: bool,
        embedder_seed: u64,
    ) -> Self {
        let question_dim = projection
            .as_ref()
            .map(|p| p.cols)
            .or(index.flat.dim())
            .unwrap_or(1);
        QaService {
            index,
            projection,
            embedder: HashEmbedder::new(question_dim, embedder_seed),
            default_k,
            default_dedup,
        }
    }

    /// Handle one query body; returns (http status, response JSON).
    pub fn handle_query(&self, body: &[u8]) -> (u16, String) {
        let request: QueryRequest = match serde_json::from_slice(body) {
            Ok(r) => r,
            Err(e) => {
                return (
                    400,
                    serde_json::json!({"error": format!("malformed request body: {e}")})
                        .to_string(),
                )
            }
        };
        let k = request.k.unwrap_or(self.default_k);
        let dedup = request.dedup.unwrap_or(self.default_dedup);
        let (label, vector) = match (&request.question_vector, &request.question) {
            (Some(v), q) => (q.clone().unwrap_or_default(), v.clone()),
            (None, Some(q)) => {
                let embedder_name = request.embedder.as_deref().unwrap_or("hash");
                if embedder_name != "hash" {
                    return (
                        400,
                        serde_json::json!({
                            "error": ServeError::UnknownEmbedder(embedder_name.into()).to_string()
                        })
                        .to_string(),
                    );
                }
                (q.clone(), self.embedder.embed(q))
            }
            (None, None) => {
                return (
                    400,
                    serde_json::json!({"error": ServeError::EmptyRequest.to_string()}).to_string(),
                )
            }
        };
        match answer_question(&label, &vector, &self.index, self.projection.as_ref(), k, dedup) {
            Ok(resp) => (200, serde_json::to_string(&resp).expect("response serializes")),
            Err(e @ (ServeError::QuestionDimension { .. } | ServeError::Index(IndexError::QueryDimension { .. }))) => {
                (422, serde_json::json!({"error": e.to_string()}).to_string())
            }
            Err(e) => (400, serde_json::json!({"error": e.to_string()}).to_string()),
        }
    }
}

/// A bound, running HTTP server.
pub struct RunningServer {
    server: Arc<tiny_http::Server>,
    pub addr: SocketAddr,
    workers: Vec<std::thread::JoinHandle<()>>,
}

impl RunningServer {
    /// Ask the accept loops to stop and join them. Each `unblock` call
    /// releases a single worker stuck in `recv`.
    pub fn stop(self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers {
            let _ = w.join();
        }
    }
}

fn respond_json(request: tiny_http::Request, status: u16, body: String) {
    let header: tiny_http::Header = "Content-Type: application/json".parse().unwrap();
    let response = tiny_http::Response::from_string(body)
        .with_header(header)
        .with_status_code(status);
    let _ = request.respond(response);
}

fn handle_request(request: tiny_http::Request, state: &RwLock<Option<Arc<QaService>>>) {
    let ready = state.read().unwrap().clone();
    let url = request.url().to_string();
    let method = request.method().clone();
    match (method, url.as_str()) {
        (tiny_http::Method::Get, "/healthz") => match ready {
            Some(_) => respond_json(request, 200, r#"{"status":"ok"}"#.into()),
            None => respond_json(request, 503, r#"{"status":"loading"}"#.into()),
        },
        (tiny_http::Method::Post, "/v1/query") => {
            let Some(service) = ready else {
                respond_json(request, 503, r#"{"error":"index still loading"}"#.into());
                return;
            };
            let mut request = request;
            let mut body = Vec::new();
            if request.as_reader().read_to_end(&mut body).is_err() {
                respond_json(request, 400, r#"{"error":"unreadable body"}"#.into());
                return;
            }
            let (status, response) = service.handle_query(&body);
            respond_json(request, status, response);
        }
        _ => respond_json(request, 404, r#"{"error":"not found"}"#.into()),
    }
}

/// Bind `addr` and serve with `n_workers` accept threads. The service value
/// may be installed later (readiness gating); until then `/healthz` answers
/// 503.
pub fn spawn_server(
    addr: &str,
    state: Arc<RwLock<Option<Arc<QaService>>>>,
    n_workers: usize,
) -> Result<RunningServer, ServeError> {
    let server =
        Arc::new(tiny_http::Server::http(addr).map_err(|e| ServeError::Bind(e.to_string()))?);
    let addr = match server.server_addr() {
        tiny_http::ListenAddr::IP(a) => a,
        #[cfg(unix)]
        tiny_http::ListenAddr::Unix(_) => unreachable!("http listener is always IP"),
    };
    let mut workers = Vec::with_capacity(n_workers);
    for _ in 0..n_workers.max(1) {
        let server = Arc::clone(&server);
        let state = Arc::clone(&state);
        workers.push(std::thread::spawn(move || {
            while let Ok(request) = server.recv() {
                handle_request(request, &state);
            }
        }));
    }
    Ok(RunningServer {
        server,
        addr,
        workers,
    })
}

/// Load the index and projection, then serve until the process exits.
/// `PORT` in the environment overrides `config.port`.
pub fn http_serve(config: &PipelineConfig) -> Result<RunningServer, ServeError> {
    let port = std::env::var("PORT")
        .ok()
        .and_then(|p| p.parse::<u16>().ok())
        .unwrap_or(config.port);
    let state: Arc<RwLock<Option<Arc<QaService>>>> = Arc::new(RwLock::new(None));
    let running = spawn_server(&format!("0.0.0.0:{port}"), Arc::clone(&state), 8)?;

    let index_path = config
        .index_path
        .clone()
        .ok_or_else(|| ServeError::Bind("config is missing index_path".into()))?;
    let service = QaService::load(
        &index_path,
        config.projection_path.as_deref(),
        config.k,
        config.dedup,
        config.embedder_seed,
    )?;
    *state.write().unwrap() = Some(Arc::new(service));
    Ok(running)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phrase_index::{FlatIndex, PhraseEntry};

    fn toy_index() -> PhraseIndex {
        let mut flat = FlatIndex::new();
        for (id, vector, text) in [
            (1u64, vec![1.0f32, 0.0], "svar eitt"),
            (2, vec![0.0, 1.0], "svar tvö"),
            (3, vec![1.0, 1.0], "Svar Eitt"),
        ] {
            flat.add(PhraseEntry {
                phrase_id: id,
                doc_id: format!("d{id}"),
                char_start: 0,
                char_end: text.chars().count(),
                text: text.to_string(),
                vector,
            })
            .unwrap();
        }
        PhraseIndex { flat, ivf: None }
    }

    #[test]
    fn gold_phrase_ranks_first() {
        let index = toy_index();
        let resp = answer_question("q", &[2.0, 1.0], &index, None, 2, false).unwrap();
        assert_eq!(resp.answers[0].text, "Svar Eitt");
        assert_eq!(resp.answers[0].score, 3.0);
        assert!(resp.latency_ms >= 0.0);
    }

    #[test]
    fn dedup_keeps_best_per_normalized_text() {
        let index = toy_index();
        // "svar eitt" and "Svar Eitt" normalize identically; dedup keeps the
        // higher-scoring one and pulls in the next distinct answer
        let resp = answer_question("q", &[2.0, 1.0], &index, None, 2, true).unwrap();
        let texts: Vec<&str> = resp.answers.iter().map(|a| a.text.as_str()).collect();
        assert_eq!(texts, vec!["Svar Eitt", "svar tvö"]);
    }

    #[test]
    fn projection_dimension_mismatch_is_reported() {
        let index = toy_index();
        let proj = QueryProjection::zeros(2, 3);
        let err = answer_question("q", &[1.0, 0.0], &index, Some(&proj), 1, false).unwrap_err();
        assert!(matches!(err, ServeError::QuestionDimension { expected: 3, got: 2 }));
    }

    #[test]
    fn handle_query_status_codes() {
        let service =
            QaService::from_parts(toy_index(), None, 10, false, 0);
        let (status, _) = service.handle_query(b"{\"question_vector\":[1.0,0.0]}");
        assert_eq!(status, 200);
        let (status, body) = service.handle_query(b"not json");
        assert_eq!(status, 400);
        assert!(body.contains("error"));
        let (status, _) = service.handle_query(b"{\"question_vector\":[1.0,0.0,9.0]}");
        assert_eq!(status, 422);
        let (status, _) = service.handle_query(b"{}");
        assert_eq!(status, 400);
        let (status, _) =
            service.handle_query(b"{\"question\":\"svar\",\"embedder\":\"transformer\"}");
        assert_eq!(status, 400);
        let (status, _) = service.handle_query(b"{\"question\":\"svar eitt\"}");
        assert_eq!(status, 200);
    }
}
