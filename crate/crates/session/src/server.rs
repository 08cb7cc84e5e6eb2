//! HTTP and WebSocket front end.
//!
//! Routes:
//! * `POST /sessions` with `{"scenario"?: …, "human_player"?: n}`
//! * `GET /sessions/{id}/view?player=n`
//! * `POST /sessions/{id}/baseline` with `{"player": n, "action": a}`
//! * `POST /sessions/{id}/advance` with optional `{"follow_suggestion": bool}`
//! * `GET /sessions/{id}/trace` (CSV of the rounds played so far)
//! * `GET /sessions/{id}/ws` (pushes `round_start`, `suggestion`,
//!   `round_result`, `summary`)
//!
//! Each session sits behind its own mutex, so its transitions are
//! serialized; pushes go out through a broadcast channel.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::broadcast;
use uuid::Uuid;

use regret_manager::game::Action;
use regret_manager::scenario::Scenario;

use crate::engine::{ServerMessage, Session, SessionError};

pub struct SessionHandle {
    session: Mutex<Session>,
    tx: broadcast::Sender<ServerMessage>,
}

impl SessionHandle {
    fn publish(&self, messages: &[ServerMessage]) {
        for m in messages {
            // no receivers is fine
            let _ = self.tx.send(m.clone());
        }
    }

    pub fn with<R>(&self, f: impl FnOnce(&mut Session) -> R) -> R {
        f(&mut self.session.lock())
    }
}

#[derive(Clone, Default)]
pub struct ServiceConfig {
    /// Scenario used when a create request does not carry one.
    pub default_scenario: Option<Scenario>,
    /// Human seat used when neither the request nor the scenario names one.
    pub default_human: Option<usize>,
    /// Submit the human seat's scenario policy after this long without input.
    pub auto_play_after: Option<Duration>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServiceConfig,
    sessions: RwLock<HashMap<Uuid, Arc<SessionHandle>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        AppState {
            inner: Arc::new(Inner {
                config,
                sessions: RwLock::new(HashMap::new()),
            }),
        }
    }

    pub fn session(&self, id: Uuid) -> Option<Arc<SessionHandle>> {
        self.inner.sessions.read().get(&id).cloned()
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().len()
    }
}

struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn unknown_session() -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_session", "no such session")
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::InvalidScenario(_) | SessionError::InvalidPlayer(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            SessionError::IllegalAction(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::NotHumanSeat(_) => StatusCode::FORBIDDEN,
            SessionError::WrongPhase(_) | SessionError::DuplicateSubmission | SessionError::Complete => {
                StatusCode::CONFLICT
            }
            SessionError::Engine(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({"error": {"code": self.code, "message": self.message}})),
        )
            .into_response()
    }
}

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad_request",
            format!("at `{}`: {}", e.path(), e.inner()),
        )
    })
}

fn lookup(state: &AppState, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
    let id = Uuid::parse_str(id).map_err(|_| ApiError::unknown_session())?;
    state.session(id).ok_or_else(ApiError::unknown_session)
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    #[serde(default)]
    scenario: Option<Value>,
    #[serde(default)]
    human_player: Option<usize>,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateRequest = parse_body(&body)?;
    let scenario = match req.scenario {
        Some(v) => Scenario::from_json(&v.to_string()).map_err(|e| {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_scenario", e.to_string())
        })?,
        None => state.inner.config.default_scenario.clone().ok_or_else(|| {
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_scenario",
                "no scenario given and no default configured",
            )
        })?,
    };
    let human = req
        .human_player
        .or(scenario.human_player)
        .or(state.inner.config.default_human);
    // scenario construction runs a full validation; keep it off the runtime
    let session = tokio::task::spawn_blocking(move || Session::new(&scenario, human))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "engine_error", e.to_string()))??;
    let id = Uuid::new_v4();
    let view = session.view(session.human_player())?;
    let human_player = session.human_player();
    let (tx, _) = broadcast::channel(256);
    let handle = Arc::new(SessionHandle {
        session: Mutex::new(session),
        tx,
    });
    state.inner.sessions.write().insert(id, handle.clone());
    schedule_auto_play(&state, id, &handle);
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "session_id": id.to_string(),
            "human_player": human_player.to_string(),
            "view": view,
        })),
    )
        .into_response())
}

#[derive(Deserialize)]
struct ViewQuery {
    player: usize,
}

async fn get_view(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ViewQuery>,
) -> Result<Json<Value>, ApiError> {
    let handle = lookup(&state, &id)?;
    let view = handle.with(|s| s.view(q.player))?;
    Ok(Json(view))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct BaselineRequest {
    player: usize,
    action: Action,
}

async fn submit_baseline(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let handle = lookup(&state, &id)?;
    if body.iter().all(u8::is_ascii_whitespace) {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "bad_request", "missing body"));
    }
    let req: BaselineRequest = parse_body(&body)?;
    let msg = handle.with(|s| s.submit_baseline(req.player, req.action))?;
    handle.publish(std::slice::from_ref(&msg));
    let phase = handle.with(|s| s.phase());
    Ok(Json(json!({
        "accepted": true,
        "phase": phase,
        "suggestion": msg.payload,
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdvanceRequest {
    #[serde(default = "yes")]
    follow_suggestion: bool,
}

fn yes() -> bool {
    true
}

impl Default for AdvanceRequest {
    fn default() -> Self {
        AdvanceRequest {
            follow_suggestion: true,
        }
    }
}

async fn advance(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let handle = lookup(&state, &id)?;
    let req: AdvanceRequest = parse_body(&body)?;
    let (messages, view) = handle.with(|s| -> Result<_, SessionError> {
        let m = s.advance(req.follow_suggestion)?;
        let v = s.view(s.human_player())?;
        Ok((m, v))
    })?;
    handle.publish(&messages);
    let id = Uuid::parse_str(&id).expect("looked up");
    schedule_auto_play(&state, id, &handle);
    Ok(Json(json!({
        "messages": messages,
        "view": view,
    })))
}

async fn get_trace(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let handle = lookup(&state, &id)?;
    let csv = handle.with(|s| s.trace_csv())?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv).into_response())
}

async fn ws_upgrade(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let handle = lookup(&state, &id)?;
    Ok(ws.on_upgrade(move |socket| ws_session(socket, handle)))
}

async fn ws_session(mut socket: WebSocket, handle: Arc<SessionHandle>) {
    // subscribe before reading the backlog so nothing falls in between
    let (backlog, mut rx) = handle.with(|s| (s.log().to_vec(), handle.tx.subscribe()));
    for m in backlog {
        let text = serde_json::to_string(&m).expect("message serializes");
        if socket.send(Message::Text(text.into())).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Ok(m) => {
                    let text = serde_json::to_string(&m).expect("message serializes");
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

/// After the configured delay, plays the human seat's scenario policy if
/// the round is still waiting on the person.
fn schedule_auto_play(state: &AppState, id: Uuid, handle: &Arc<SessionHandle>) {
    let Some(delay) = state.inner.config.auto_play_after else {
        return;
    };
    let t = handle.with(|s| s.t());
    let handle = handle.clone();
    let state = state.clone();
    tokio::spawn(async move {
        tokio::time::sleep(delay).await;
        let msg = handle.with(|s| {
            if s.t() != t || s.phase() != crate::engine::Phase::AwaitingBaseline {
                return None;
            }
            let a = s.fallback_action()?;
            s.submit_baseline(s.human_player(), a).ok()
        });
        if let Some(m) = msg {
            handle.publish(std::slice::from_ref(&m));
            let messages = handle.with(|s| s.advance(true)).unwrap_or_default();
            handle.publish(&messages);
            if state.session(id).is_some() {
                schedule_auto_play(&state, id, &handle);
            }
        }
    });
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/view", get(get_view))
        .route("/sessions/{id}/baseline", post(submit_baseline))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/trace", get(get_trace))
        .route("/sessions/{id}/ws", get(ws_upgrade))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
