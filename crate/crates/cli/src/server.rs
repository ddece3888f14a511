//! HTTP trial server.
//!
//! Each session directory is guarded by its own mutex, so responses within a
//! session are recorded one at a time while different sessions proceed
//! independently. A response is synced to disk before the request returns.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use revcorr::experiment::{discover_sessions, export_responses, SessionDir, SessionStatus};
use revcorr::Error;

type Shared = Arc<Mutex<SessionDir>>;

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<BTreeMap<String, Shared>>,
}

impl AppState {
    /// Opens every session under `root`, recovering their response logs.
    pub fn load(root: &Path) -> anyhow::Result<Self> {
        let mut sessions = BTreeMap::new();
        for dir in discover_sessions(root)? {
            let s = SessionDir::open(&dir)?;
            let id = s.session().id().to_string();
            if sessions.insert(id.clone(), Arc::new(Mutex::new(s))).is_some() {
                anyhow::bail!("duplicate session id {id} under {}", root.display());
            }
        }
        if sessions.is_empty() {
            anyhow::bail!("no sessions found under {}", root.display());
        }
        Ok(AppState {
            sessions: Arc::new(sessions),
        })
    }

    pub fn session_ids(&self) -> impl Iterator<Item = &str> {
        self.sessions.keys().map(String::as_str)
    }

    fn get(&self, id: &str) -> Result<Shared, ApiError> {
        self.sessions
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError(Error::UnknownSession(id.to_string())))
    }
}

struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::UnknownSession(_) => StatusCode::NOT_FOUND,
            Error::AlreadyAnswered(_) | Error::NotCurrentTrial { .. } | Error::SessionComplete => StatusCode::CONFLICT,
            Error::TrialOutOfRange { .. } | Error::InvalidChoice(_) | Error::Malformed(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

#[derive(Serialize)]
struct Progress {
    answered: usize,
    total: usize,
}

#[derive(Deserialize)]
struct ResponseBody {
    trial_index: usize,
    choice: String,
    rt_ms: f64,
}

fn lock(s: &Shared) -> std::sync::MutexGuard<'_, SessionDir> {
    // a panic while holding the lock cannot leave a half-written record in
    // memory, since the session only changes after the log is synced
    s.lock().unwrap_or_else(|p| p.into_inner())
}

async fn list_sessions(State(app): State<AppState>) -> Json<serde_json::Value> {
    let items: Vec<_> = app
        .sessions
        .iter()
        .map(|(id, s)| {
            let g = lock(s);
            let s = g.session();
            json!({ "session_id": id, "status": s.status(), "answered": s.answered(), "total": s.n_trials() })
        })
        .collect();
    Json(json!(items))
}

async fn next_trial(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let shared = app.get(&id)?;
    let g = lock(&shared);
    let s = g.session();
    let progress = Progress {
        answered: s.answered(),
        total: s.n_trials(),
    };
    Ok(Json(match s.current_trial() {
        None => json!({ "done": true, "progress": progress }),
        Some(i) => json!({
            "trial_index": i,
            "audio_url": format!("/api/audio/{id}/{i}.wav"),
            "options": s.manifest.option_order.present(s.labels()),
            "progress": progress,
        }),
    }))
}

async fn status(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<serde_json::Value>, ApiError> {
    let shared = app.get(&id)?;
    let g = lock(&shared);
    let s = g.session();
    let st: SessionStatus = s.status();
    Ok(Json(json!({ "status": st, "answered": s.answered(), "total": s.n_trials() })))
}

async fn post_response(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<ResponseBody>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let shared = app.get(&id)?;
    tokio::task::spawn_blocking(move || {
        let mut g = lock(&shared);
        g.record_response(body.trial_index, &body.choice, body.rt_ms)?;
        let s = g.session();
        Ok(Json(json!({ "ok": true, "progress": Progress { answered: s.answered(), total: s.n_trials() } })))
    })
    .await
    .map_err(|e| ApiError(Error::Malformed(format!("worker failed: {e}"))))?
}

async fn audio(
    State(app): State<AppState>,
    UrlPath((id, file)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let shared = app.get(&id)?;
    let index: usize = file
        .strip_suffix(".wav")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ApiError(Error::Malformed(format!("bad audio name {file:?}"))))?;
    let path = {
        let g = lock(&shared);
        g.audio_path(index).ok_or(Error::TrialOutOfRange {
            index,
            n_trials: g.session().n_trials(),
        })?
    };
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError(Error::Io { path: path.clone(), source: e }))?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], bytes).into_response())
}

async fn export(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let shared = app.get(&id)?;
    let mut buf = Vec::new();
    {
        let g = lock(&shared);
        export_responses([g.session()], &mut buf)?;
    }
    Ok(([(header::CONTENT_TYPE, "text/csv")], buf).into_response())
}

async fn index() -> Html<&'static str> {
    Html(include_str!("index.html"))
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/api/sessions", get(list_sessions))
        .route("/api/sessions/{id}/trial", get(next_trial))
        .route("/api/sessions/{id}/status", get(status))
        .route("/api/sessions/{id}/response", post(post_response))
        .route("/api/sessions/{id}/export.csv", get(export))
        .route("/api/audio/{id}/{file}", get(audio))
        .with_state(app)
}

/// Serves until Ctrl-C. Prints the bound address, which matters when `port`
/// is 0.
pub async fn serve(root: &Path, host: &str, port: u16) -> anyhow::Result<()> {
    let app = AppState::load(root)?;
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    let addr: SocketAddr = listener.local_addr()?;
    // the banner goes out first and in full, since callers parse it
    {
        use std::io::Write;
        let mut out = std::io::stdout().lock();
        writeln!(out, "listening on http://{addr}")?;
        for id in app.session_ids() {
            let _ = writeln!(out, "  session {id}: http://{addr}/?session={id}");
        }
        let _ = out.flush();
    }
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
