//! Rating API over a [`RatingStore`], plus optional static UI assets.
//!
//! Which side shows the AI report is decided here from the blinding seed and
//! never leaves the server: presentations carry no origin field and
//! submissions cannot set one.

use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use medeval_core::rater::{blind_pair, CaseRecord, PresentedPair, RaterError, RatingStore, RubricRating, Verdict};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::future::Future;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;

pub struct AppState {
    cases: Vec<CaseRecord>,
    index: HashMap<String, usize>,
    store: RatingStore,
    blind_seed: u64,
    tokens: BTreeMap<String, String>,
    snapshot_path: Option<PathBuf>,
    snapshot_every: usize,
    accepted: AtomicUsize,
}

impl AppState {
    pub fn new(cases: Vec<CaseRecord>, store: RatingStore, blind_seed: u64) -> Result<Self, RaterError> {
        let mut index = HashMap::new();
        for (i, case) in cases.iter().enumerate() {
            case.validate()?;
            if index.insert(case.case_id.clone(), i).is_some() {
                return Err(RaterError::Invalid(format!("duplicate case id {}", case.case_id)));
            }
        }
        Ok(AppState {
            cases,
            index,
            store,
            blind_seed,
            tokens: BTreeMap::new(),
            snapshot_path: None,
            snapshot_every: 0,
            accepted: AtomicUsize::new(0),
        })
    }

    /// Require `Authorization: Bearer <token>` per reader.
    pub fn with_tokens(mut self, tokens: BTreeMap<String, String>) -> Self {
        self.tokens = tokens;
        self
    }

    /// Write a snapshot to `path` every `every` accepted ratings (0: only at shutdown).
    pub fn with_snapshots(mut self, path: PathBuf, every: usize) -> Self {
        self.snapshot_path = Some(path);
        self.snapshot_every = every;
        self
    }

    pub fn store(&self) -> &RatingStore {
        &self.store
    }

    /// Flush the log and write a final snapshot.
    pub fn finalize(&self) -> Result<(), RaterError> {
        self.store.sync()?;
        if let Some(p) = &self.snapshot_path {
            self.store.write_snapshot(p)?;
        }
        Ok(())
    }

    fn unauthorized(&self, headers: &HeaderMap, reader: &str) -> Option<Response> {
        if self.tokens.is_empty() {
            return None;
        }
        let presented = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        match (self.tokens.get(reader), presented) {
            (Some(expected), Some(got)) if expected == got => None,
            _ => Some(error(StatusCode::UNAUTHORIZED, format!("reader {reader} is not authorized"))),
        }
    }

    fn rated_by(&self, reader: &str) -> usize {
        self.store.progress().get(reader).copied().unwrap_or(0)
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ReaderProgress {
    pub rated: usize,
    pub total: usize,
}

#[derive(Debug, Serialize)]
struct NextCase {
    complete: bool,
    #[serde(flatten)]
    pair: Option<PresentedPair>,
    progress: ReaderProgress,
}

async fn next_case(State(state): State<Arc<AppState>>, Path(reader): Path<String>, headers: HeaderMap) -> Response {
    if let Some(denied) = state.unauthorized(&headers, &reader) {
        return denied;
    }
    let pair = state
        .cases
        .iter()
        .find(|c| !state.store.has_rated(&c.case_id, &reader))
        .map(|c| blind_pair(c, state.blind_seed).pair);
    let body = NextCase {
        complete: pair.is_none(),
        pair,
        progress: ReaderProgress {
            rated: state.rated_by(&reader),
            total: state.cases.len(),
        },
    };
    Json(body).into_response()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingSubmission {
    pub case_id: String,
    pub reader_id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub comment: String,
}

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

async fn post_rating(State(state): State<Arc<AppState>>, headers: HeaderMap, Json(sub): Json<RatingSubmission>) -> Response {
    if let Some(denied) = state.unauthorized(&headers, &sub.reader_id) {
        return denied;
    }
    let Some(&i) = state.index.get(&sub.case_id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown case {}", sub.case_id));
    };
    let presentation = blind_pair(&state.cases[i], state.blind_seed);
    let rating = RubricRating {
        case_id: sub.case_id,
        reader_id: sub.reader_id.clone(),
        verdict: sub.verdict,
        comment: sub.comment,
        ai_is_report_a: presentation.ai_is_report_a,
        timestamp_ms: now_ms(),
    };
    match state.store.submit(rating) {
        Ok(event) => {
            let n = state.accepted.fetch_add(1, Ordering::SeqCst) + 1;
            if let Some(p) = state.snapshot_path.as_ref().filter(|_| state.snapshot_every > 0 && n % state.snapshot_every == 0) {
                if let Err(e) = state.store.write_snapshot(p) {
                    log::warn!("snapshot to {} failed: {e}", p.display());
                }
            }
            let body = serde_json::json!({
                "seq": event.seq,
                "progress": ReaderProgress { rated: state.rated_by(&sub.reader_id), total: state.cases.len() },
            });
            (StatusCode::CREATED, Json(body)).into_response()
        }
        Err(e @ RaterError::Duplicate { .. }) => error(StatusCode::CONFLICT, e.to_string()),
        Err(e) => {
            log::error!("rating append failed: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ProgressBody {
    pub total_cases: usize,
    pub ratings: usize,
    /// Every reader with a token or a rating, with their rating counts.
    pub readers: BTreeMap<String, usize>,
}

async fn progress(State(state): State<Arc<AppState>>) -> Json<ProgressBody> {
    let mut readers: BTreeMap<String, usize> = state.tokens.keys().map(|r| (r.clone(), 0)).collect();
    readers.extend(state.store.progress());
    Json(ProgressBody {
        total_cases: state.cases.len(),
        ratings: readers.values().sum(),
        readers,
    })
}

pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/session/{reader}/next", get(next_case))
        .route("/api/rating", post(post_rating))
        .route("/api/progress", get(progress))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("{host}:{port} is already in use; stop the other process or choose another --port")]
    PortInUse { host: String, port: u16 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Rater(#[from] RaterError),
}

pub async fn bind(host: &str, port: u16) -> Result<TcpListener, ServeError> {
    TcpListener::bind((host, port)).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServeError::PortInUse {
            host: host.to_string(),
            port,
        },
        _ => ServeError::Io(e),
    })
}

/// Serve until `shutdown` resolves, then flush the log and write a snapshot.
pub async fn serve(
    listener: TcpListener,
    state: Arc<AppState>,
    ui_dir: Option<PathBuf>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let app = router(state.clone(), ui_dir);
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    state.finalize()?;
    Ok(())
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    log::info!("shutting down");
}
