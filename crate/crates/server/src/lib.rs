//! HTTP front end of a study directory.
//!
//! Participant-facing bodies carry opaque piece ids, questionnaire text and
//! audio only. Source and model labels leave the service solely through the
//! admin endpoints.

pub mod layout;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::{Body, Bytes};
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use spikebench_core::stats::TuringAnswer;
use spikebench_core::study::{
    questionnaire_for, Assignment, ListenerGroup, QuestionKind, Rating, StudyError, StudyStore, COMPOSER_OPTIONS,
    COMPOSER_PROMPT,
};

pub use layout::{init_study, read_admin_key, ADMIN_KEY_FILE};

pub const ENV_ADDR: &str = "MUSPIKE_ADDR";
pub const ENV_STUDY: &str = "MUSPIKE_STUDY";
pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";
pub const ADMIN_HEADER: &str = "x-admin-key";

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
    #[error("InvalidAddress: {0}")]
    InvalidAddress(String),
}

/// Milliseconds on the study clock.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64))
}

pub struct AppState {
    store: Mutex<StudyStore>,
    dir: PathBuf,
    admin_key: String,
    snapshotting: AtomicBool,
    clock: Clock,
}

impl AppState {
    /// Takes over snapshot scheduling from the store so that requests
    /// arriving mid-snapshot can be turned away instead of queueing.
    pub fn new(mut store: StudyStore, admin_key: String, clock: Clock) -> Arc<Self> {
        store.set_auto_snapshot(false);
        let dir = store.dir().to_path_buf();
        Arc::new(Self { store: Mutex::new(store), dir, admin_key, snapshotting: AtomicBool::new(false), clock })
    }

    pub fn open(dir: &Path, clock: Clock) -> Result<Arc<Self>, ServeError> {
        let store = StudyStore::open(dir)?;
        let key = read_admin_key(dir)?;
        Ok(Self::new(store, key, clock))
    }

    /// Runs `f` on the store off the async workers and snapshots when due.
    async fn with_store<T: Send + 'static>(
        self: &Arc<Self>,
        f: impl FnOnce(&mut StudyStore) -> Result<T, ApiError> + Send + 'static,
    ) -> Result<T, ApiError> {
        if self.snapshotting.load(Ordering::Acquire) {
            return Err(ApiError::Busy);
        }
        let me = Arc::clone(self);
        tokio::task::spawn_blocking(move || {
            let mut store = me.store.lock().unwrap_or_else(|p| p.into_inner());
            let out = f(&mut store);
            if store.snapshot_due() {
                me.snapshotting.store(true, Ordering::Release);
                let snap = store.snapshot();
                me.snapshotting.store(false, Ordering::Release);
                snap?;
            }
            out
        })
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?
    }
}

#[derive(Debug)]
pub enum ApiError {
    Unauthorized,
    Forbidden,
    Busy,
    BadRequest(String),
    Study(StudyError),
    Internal(String),
}

impl From<StudyError> for ApiError {
    fn from(e: StudyError) -> Self {
        ApiError::Study(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, name, msg) = match self {
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, "Unauthorized", "missing or unknown credential".to_string()),
            ApiError::Forbidden => (StatusCode::FORBIDDEN, "Forbidden", "piece not issued to this session".to_string()),
            ApiError::Busy => (StatusCode::SERVICE_UNAVAILABLE, "Snapshotting", "retry shortly".to_string()),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, "BadRequest", m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, "Internal", m),
            ApiError::Study(e) => {
                let (status, name) = match &e {
                    StudyError::UnknownParticipant(_) => (StatusCode::UNAUTHORIZED, "UnknownParticipant"),
                    StudyError::UnknownPiece(_) => (StatusCode::NOT_FOUND, "UnknownPiece"),
                    StudyError::UnissuedAssignment { .. } => (StatusCode::BAD_REQUEST, "UnissuedAssignment"),
                    StudyError::InvalidResponse(_) => (StatusCode::BAD_REQUEST, "InvalidResponse"),
                    StudyError::DuplicateResponse { .. } => (StatusCode::CONFLICT, "DuplicateResponse"),
                    StudyError::DuplicateParticipant(_) => (StatusCode::CONFLICT, "DuplicateParticipant"),
                    _ => (StatusCode::INTERNAL_SERVER_ERROR, "Internal"),
                };
                (status, name, e.to_string())
            }
        };
        let mut resp = (status, Json(json!({ "error": name, "message": msg }))).into_response();
        if status == StatusCode::SERVICE_UNAVAILABLE {
            resp.headers_mut().insert(header::RETRY_AFTER, header::HeaderValue::from_static("1"));
        }
        resp
    }
}

/// Labels that must never reach a participant.
pub const FORBIDDEN_STRINGS: [&str; 7] = ["S-Transformer", "S-LSTM", "S-RNN", "S-GAN", "S-CNN", "Human", "Original"];

/// First forbidden label found in `payload`, byte-wise.
pub fn find_forbidden(payload: &[u8]) -> Option<&'static str> {
    FORBIDDEN_STRINGS.into_iter().find(|f| payload.windows(f.len()).any(|w| w == f.as_bytes()))
}

pub fn credential_hash(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn bearer(headers: &HeaderMap) -> Result<String, ApiError> {
    let v = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()).ok_or(ApiError::Unauthorized)?;
    let token = v.strip_prefix("Bearer ").ok_or(ApiError::Unauthorized)?.trim();
    if token.is_empty() {
        return Err(ApiError::Unauthorized);
    }
    Ok(credential_hash(token))
}

fn require_admin(state: &AppState, headers: &HeaderMap) -> Result<(), ApiError> {
    let given = headers.get(ADMIN_HEADER).and_then(|v| v.to_str().ok()).ok_or(ApiError::Unauthorized)?;
    // Compare digests so the check does not leak a matching prefix length.
    if Sha256::digest(given.as_bytes()) != Sha256::digest(state.admin_key.as_bytes()) {
        return Err(ApiError::Unauthorized);
    }
    Ok(())
}

fn participant_for(store: &StudyStore, credential: &str) -> Result<(String, ListenerGroup), ApiError> {
    let p = store.state().participant_by_credential(credential).ok_or(ApiError::Unauthorized)?;
    Ok((p.id.clone(), p.group))
}

// ----- wire schema --------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterRequest {
    /// `normal`, `amateur` or `expert` (or N/A/E).
    pub group: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisterReply {
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireQuestion {
    /// `Q1` … `Q14`.
    pub id: String,
    pub text: String,
    /// `likert` (integer 1 to 5) or `choice` (one of `options`).
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub completed: usize,
    pub cap: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextReply {
    Piece { piece_id: String, audio_url: String, questionnaire: Vec<WireQuestion>, progress: Progress },
    Done { done: bool, progress: Progress },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRequest {
    pub piece_id: String,
    /// Likert values keyed `Q1` … `Q13`.
    pub ratings: std::collections::BTreeMap<String, u8>,
    /// One of the composer options.
    pub composer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseReply {
    pub accepted: bool,
}

pub fn wire_questionnaire(group: ListenerGroup) -> Vec<WireQuestion> {
    questionnaire_for(group)
        .into_iter()
        .map(|q| match q.kind {
            QuestionKind::Likert => {
                WireQuestion { id: format!("Q{}", q.id), text: q.text.to_string(), kind: "likert".into(), options: Vec::new() }
            }
            QuestionKind::Composer => WireQuestion {
                id: format!("Q{}", q.id),
                text: COMPOSER_PROMPT.to_string(),
                kind: "choice".into(),
                options: COMPOSER_OPTIONS.iter().map(|s| s.to_string()).collect(),
            },
        })
        .collect()
}

pub fn parse_composer(s: &str) -> Option<TuringAnswer> {
    match s {
        "person" => Some(TuringAnswer::Human),
        "machine" => Some(TuringAnswer::Ai),
        "uncertain" => Some(TuringAnswer::Uncertain),
        _ => None,
    }
}

fn parse_ratings(map: &std::collections::BTreeMap<String, u8>) -> Result<Vec<Rating>, ApiError> {
    map.iter()
        .map(|(k, &value)| {
            let id = k.strip_prefix('Q').unwrap_or(k);
            let question = id.parse::<u8>().map_err(|_| ApiError::BadRequest(format!("unknown item {k}")))?;
            Ok(Rating { question, value })
        })
        .collect()
}

fn progress(completed: usize, cap: usize) -> Progress {
    Progress { completed, cap, fraction: if cap == 0 { 1.0 } else { (completed as f64 / cap as f64).min(1.0) } }
}

// ----- handlers ------------------------------------------------------------------

async fn register(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Json<RegisterReply>, ApiError> {
    require_admin(&state, &headers)?;
    let req: RegisterRequest = serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let group = ListenerGroup::parse(&req.group).ok_or_else(|| ApiError::BadRequest(format!("unknown group {:?}", req.group)))?;
    let token = layout::random_token();
    let credential = credential_hash(&token);
    let now = (state.clock)();
    state
        .with_store(move |store| {
            let id = format!("u{:04}", store.state().participants.len() + 1);
            store.register(&id, group, Some(credential), now).map_err(ApiError::from)
        })
        .await?;
    Ok(Json(RegisterReply { token }))
}

async fn next(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Result<Json<NextReply>, ApiError> {
    let cred = bearer(&headers)?;
    let now = (state.clock)();
    state
        .with_store(move |store| {
            let (id, group) = participant_for(store, &cred)?;
            Ok(match store.next_assignment(&id, now)? {
                Assignment::Piece { piece, completed, cap } => NextReply::Piece {
                    audio_url: format!("/audio/{piece}"),
                    piece_id: piece,
                    questionnaire: wire_questionnaire(group),
                    progress: progress(completed, cap),
                },
                Assignment::Done { completed } => {
                    NextReply::Done { done: true, progress: progress(completed, store.state().caps()[group.index()]) }
                }
            })
        })
        .await
        .map(Json)
}

async fn audio(State(state): State<Arc<AppState>>, headers: HeaderMap, UrlPath(piece): UrlPath<String>) -> Result<Response, ApiError> {
    let cred = bearer(&headers)?;
    let issued = {
        let store = state.store.lock().unwrap_or_else(|p| p.into_inner());
        let (id, _) = participant_for(&store, &cred)?;
        let s = store.state();
        let k = s.pieces.iter().position(|p| p.id == piece).ok_or_else(|| StudyError::UnknownPiece(piece.clone()))?;
        let p = s.participant(&id).ok_or(ApiError::Unauthorized)?;
        p.current.is_some_and(|c| c.0 == k) || p.lapsed.contains(&k) || p.completed.contains(&k)
    };
    if !issued {
        return Err(ApiError::Forbidden);
    }
    let bytes = tokio::fs::read(layout::audio_path(&state.dir, &piece)).await.map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "audio/wav"), (header::CACHE_CONTROL, "private, max-age=3600")], Body::from(bytes)).into_response())
}

async fn respond(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Json<ResponseReply>, ApiError> {
    let cred = bearer(&headers)?;
    let req: ResponseRequest = serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let ratings = parse_ratings(&req.ratings)?;
    let composer = parse_composer(&req.composer)
        .ok_or_else(|| ApiError::BadRequest(format!("composer must be one of {}", COMPOSER_OPTIONS.join(", "))))?;
    let now = (state.clock)();
    state
        .with_store(move |store| {
            let (id, _) = participant_for(store, &cred)?;
            store.record_response(&id, &req.piece_id, &ratings, composer, now).map_err(ApiError::from)
        })
        .await?;
    Ok(Json(ResponseReply { accepted: true }))
}

async fn admin_progress(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Result<Json<serde_json::Value>, ApiError> {
    require_admin(&state, &headers)?;
    let store = state.store.lock().unwrap_or_else(|p| p.into_inner());
    Ok(Json(store.state().progress_json()))
}

async fn admin_export(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Result<Response, ApiError> {
    require_admin(&state, &headers)?;
    let csv = state.store.lock().unwrap_or_else(|p| p.into_inner()).state().export_csv();
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/participants", post(register))
        .route("/session/next", get(next))
        .route("/audio/{piece_id}", get(audio))
        .route("/responses", post(respond))
        .route("/admin/progress", get(admin_progress))
        .route("/admin/export", get(admin_export))
        .with_state(state)
}

/// Bind address and study directory from the environment, with defaults.
pub fn env_config() -> (String, Option<PathBuf>) {
    let addr = std::env::var(ENV_ADDR).unwrap_or_else(|_| DEFAULT_ADDR.to_string());
    (addr, std::env::var_os(ENV_STUDY).map(PathBuf::from))
}

pub async fn serve(addr: &str, dir: &Path) -> Result<(), ServeError> {
    let addr: SocketAddr = addr.parse().map_err(|_| ServeError::InvalidAddress(addr.to_string()))?;
    let state = AppState::open(dir, system_clock())?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[tokio::test]
    async fn requests_during_snapshot_get_503() {
        let dir = tempfile::tempdir().unwrap();
        let store = StudyStore::create(dir.path(), Default::default(), Vec::new()).unwrap();
        let state = AppState::new(store, "k".into(), system_clock());
        state.snapshotting.store(true, Ordering::Release);
        let err = state.with_store(|_| Ok(())).await.unwrap_err();
        let resp = err.into_response();
        assert_eq!(resp.status(), StatusCode::SERVICE_UNAVAILABLE);
        assert!(resp.headers().contains_key(header::RETRY_AFTER));
    }

    #[test]
    fn composer_options_round_trip() {
        for o in COMPOSER_OPTIONS {
            assert!(parse_composer(o).is_some());
        }
        assert_eq!(wire_questionnaire(ListenerGroup::Normal).len(), 9);
        assert_eq!(wire_questionnaire(ListenerGroup::Expert).len(), 14);
    }
}
