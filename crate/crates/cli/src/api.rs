//! Versioned HTTP/JSON session API.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::session::{Outcome, Session, SessionConfig, SessionError};
use crate::store::Store;

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest {
        path: Option<String>,
        message: String,
    },
    Conflict(String),
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<&'a str>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message, path) = match &self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m.as_str(), None),
            ApiError::BadRequest { path, message } => {
                (StatusCode::BAD_REQUEST, message.as_str(), path.as_deref())
            }
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m.as_str(), None),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m.as_str(), None),
        };
        (
            status,
            Json(ErrorBody {
                error: message,
                path,
            }),
        )
            .into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Stopped => ApiError::Conflict("session has stopped".into()),
            SessionError::Invalid { path, message } => ApiError::BadRequest {
                path: Some(path),
                message,
            },
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        tracing::error!(error = %e, "session store");
        ApiError::Internal(format!("session store: {e}"))
    }
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::BadRequest {
            path: Some(path).filter(|p| p != "."),
            message: e.into_inner().to_string(),
        }
    })
}

type Shared = Arc<Mutex<Session>>;

struct Inner {
    sessions: RwLock<HashMap<String, Shared>>,
    store: Option<Store>,
}

/// Session registry; each session is guarded by its own lock so writers to
/// different sessions never contend.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Sessions kept in memory only.
    pub fn ephemeral() -> Self {
        Self(Arc::new(Inner {
            sessions: RwLock::default(),
            store: None,
        }))
    }

    /// Sessions persisted under `dir`; existing ones are replayed.
    pub fn persistent(dir: &Path) -> std::io::Result<Self> {
        let store = Store::open(dir)?;
        let sessions = store
            .load_all()?
            .into_iter()
            .map(|s| (s.id().to_string(), Arc::new(Mutex::new(s))))
            .collect();
        Ok(Self(Arc::new(Inner {
            sessions: RwLock::new(sessions),
            store: Some(store),
        })))
    }

    pub fn session_count(&self) -> usize {
        self.0.sessions.read().expect("registry lock").len()
    }

    fn get(&self, id: &str) -> Result<Shared, ApiError> {
        self.0
            .sessions
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session `{id}`")))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", axum::routing::delete(delete_session))
        .route("/v1/sessions/{id}/recommendation", get(recommendation))
        .route("/v1/sessions/{id}/results", post(post_result))
        .route("/v1/sessions/{id}/state", get(session_state))
        .with_state(state)
}

#[derive(Serialize)]
struct Created {
    session_id: String,
}

async fn create_session(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let config: SessionConfig = parse_body(&body)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::new(id.clone(), config)?;
    if let Some(store) = &state.0.store {
        store.create(&session)?;
    }
    state
        .0
        .sessions
        .write()
        .expect("registry lock")
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    tracing::info!(session = %id, "created");
    Ok((StatusCode::CREATED, Json(Created { session_id: id })))
}

async fn recommendation(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<impl IntoResponse, ApiError> {
    let s = state.get(&id)?;
    let rec = s.lock().expect("session lock").recommendation()?;
    Ok(Json(rec))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResultBody {
    group: Vec<usize>,
    outcome: Outcome,
    #[serde(default, rename = "override")]
    overridden: bool,
}

async fn post_result(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let s = state.get(&id)?;
    let body: ResultBody = parse_body(&body)?;
    let mut session = s.lock().expect("session lock");
    let resp = session.record(&body.group, body.outcome.0, body.overridden)?;
    if let Some(store) = &state.0.store {
        store.append_result(&id, &body.group, body.outcome.0, body.overridden)?;
    }
    tracing::debug!(session = %id, entropy = resp.entropy_bits, stopped = resp.stopped, "result recorded");
    Ok(Json(resp))
}

async fn session_state(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<impl IntoResponse, ApiError> {
    let s = state.get(&id)?;
    let view = s.lock().expect("session lock").state();
    Ok(Json(view))
}

async fn delete_session(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<StatusCode, ApiError> {
    let removed = state.0.sessions.write().expect("registry lock").remove(&id);
    let s = removed.ok_or_else(|| ApiError::NotFound(format!("no session `{id}`")))?;
    // wait out any in-flight writer before dropping the file
    let _guard = s.lock().expect("session lock");
    if let Some(store) = &state.0.store {
        store.delete(&id)?;
    }
    tracing::info!(session = %id, "deleted");
    Ok(StatusCode::NO_CONTENT)
}
