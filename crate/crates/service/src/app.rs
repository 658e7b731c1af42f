//! Session registry, persistence and the HTTP/WebSocket routes.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock, TryLockError};

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use netlingua_core::agent::{
    read_transcript, start_session, AgentConfig, AgentContext, AgentError, ConversationSession, Phase, TurnAction,
    TurnRecord, UserReply,
};
use netlingua_core::memory::MemoryStore;
use netlingua_core::schema::{ResolvedSchema, SchemaModule};
use netlingua_core::state::NetworkState;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tokio::sync::watch;

use crate::config::{BackendSource, ConfigError, ServiceConfig, TOKEN_ENV};
use crate::view::{ApiSessionView, Feedback};

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("missing or wrong bearer token")]
    Unauthorized,
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("backend unavailable")]
    Unavailable { session_id: String, cause: String },
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Unauthorized => StatusCode::UNAUTHORIZED,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unavailable { .. } => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = match &self {
            ApiError::Unavailable { session_id, cause } => {
                json!({"error": self.to_string(), "cause": cause, "session_id": session_id})
            }
            _ => json!({"error": self.to_string()}),
        };
        (status, Json(body)).into_response()
    }
}

impl From<AgentError> for ApiError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::EmptyQuery | AgentError::BadConfig(_) => ApiError::BadRequest(e.to_string()),
            AgentError::WrongPhase { .. } | AgentError::AwaitingUser(_) | AgentError::Finished(_) => {
                ApiError::Conflict(e.to_string())
            }
        }
    }
}

/// One session: the live object (absent once restored read-only), the
/// published turns, and a counter that wakes event streams.
pub struct Entry {
    pub id: String,
    session: Mutex<Option<ConversationSession>>,
    turns: RwLock<Vec<TurnRecord>>,
    feedback: RwLock<BTreeMap<usize, Feedback>>,
    events: watch::Sender<usize>,
    ctx: Option<AgentContext>,
}

impl Entry {
    fn new(id: String, session: Option<ConversationSession>, turns: Vec<TurnRecord>, ctx: Option<AgentContext>) -> Self {
        let (events, _) = watch::channel(turns.len());
        Self {
            id,
            session: Mutex::new(session),
            turns: RwLock::new(turns),
            feedback: RwLock::new(BTreeMap::new()),
            events,
            ctx,
        }
    }

    pub fn read_only(&self) -> bool {
        self.ctx.is_none()
    }

    pub fn turns(&self) -> Vec<TurnRecord> {
        self.turns.read().expect("turns lock").clone()
    }

    fn turns_from(&self, from: usize) -> Vec<TurnRecord> {
        self.turns.read().expect("turns lock").get(from..).map(<[_]>::to_vec).unwrap_or_default()
    }

    pub fn view(&self) -> ApiSessionView {
        let turns = self.turns.read().expect("turns lock");
        let feedback = self.feedback.read().expect("feedback lock");
        ApiSessionView::from_turns(&self.id, &turns, &feedback, self.read_only())
    }

    /// True once no further turns can appear.
    fn closed(&self) -> bool {
        self.read_only()
            || self
                .turns
                .read()
                .expect("turns lock")
                .last()
                .is_some_and(|t| matches!(t.phase, Phase::Done | Phase::Failed))
    }
}

pub struct AppState {
    pub schema: Arc<ResolvedSchema>,
    pub modules: Arc<Vec<SchemaModule>>,
    pub memory: Arc<MemoryStore>,
    /// The network as of the latest deployment.
    pub state: RwLock<NetworkState>,
    pub agent: AgentConfig,
    pub backend: BackendSource,
    pub sessions_dir: Option<PathBuf>,
    pub token: Option<String>,
    sessions: RwLock<HashMap<String, Arc<Entry>>>,
}

impl AppState {
    pub fn new(
        schema: ResolvedSchema,
        modules: Vec<SchemaModule>,
        state: NetworkState,
        memory: MemoryStore,
        agent: AgentConfig,
        backend: BackendSource,
    ) -> Self {
        Self {
            schema: Arc::new(schema),
            modules: Arc::new(modules),
            memory: Arc::new(memory),
            state: RwLock::new(state),
            agent,
            backend,
            sessions_dir: None,
            token: None,
            sessions: RwLock::new(HashMap::new()),
        }
    }

    /// Everything the config names; the token comes from the environment.
    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, ConfigError> {
        let fx = cfg.fixtures()?;
        let mut app = Self::new(fx.schema, fx.modules, fx.state, cfg.memory()?, cfg.agent.clone(), cfg.backend_source()?);
        app.token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
        if let Some(dir) = &cfg.sessions_dir {
            app = app.with_sessions_dir(dir.clone())?;
        }
        Ok(app)
    }

    /// Persists transcripts under `dir` and loads the ones already there
    /// as read-only sessions.
    pub fn with_sessions_dir(mut self, dir: PathBuf) -> Result<Self, ConfigError> {
        fs::create_dir_all(&dir).map_err(|source| ConfigError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let restored = restore(&dir)?;
        {
            let mut map = self.sessions.write().expect("sessions lock");
            for e in restored {
                map.insert(e.id.clone(), Arc::new(e));
            }
        }
        self.sessions_dir = Some(dir);
        Ok(self)
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    pub fn get(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("sessions lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    fn context(&self) -> AgentContext {
        AgentContext {
            backend: (self.backend)(),
            memory: self.memory.clone(),
            schema: self.schema.clone(),
            schema_modules: self.modules.clone(),
        }
    }

    fn transcript_path(&self, id: &str) -> Option<PathBuf> {
        self.sessions_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    fn feedback_path(&self, id: &str) -> Option<PathBuf> {
        self.sessions_dir.as_ref().map(|d| d.join(format!("{id}.feedback.jsonl")))
    }

    /// Copies turns the session recorded since the last call into the
    /// entry, the transcript file and the event counter.
    fn publish(&self, entry: &Entry, session: &ConversationSession) {
        let mut turns = entry.turns.write().expect("turns lock");
        let fresh = &session.turns[turns.len()..];
        if fresh.is_empty() {
            return;
        }
        if let Some(path) = self.transcript_path(&entry.id) {
            if let Err(e) = append_lines(&path, fresh) {
                tracing::warn!(session = %entry.id, "could not persist transcript: {e}");
            }
        }
        turns.extend_from_slice(fresh);
        entry.events.send_replace(turns.len());
    }

    /// Optionally submits a reply, then steps until the session blocks.
    /// Runs on a blocking thread; callers hold no async locks.
    fn advance(&self, entry: &Entry, reply: Option<UserReply>) -> Result<(), ApiError> {
        let mut guard = match entry.session.try_lock() {
            Ok(g) => g,
            Err(TryLockError::WouldBlock) => return Err(ApiError::Conflict("the agent is working on this session".into())),
            Err(TryLockError::Poisoned(_)) => return Err(ApiError::Internal("session lock poisoned".into())),
        };
        let (Some(session), Some(ctx)) = (guard.as_mut(), entry.ctx.as_ref()) else {
            return Err(ApiError::Conflict("session was restored read-only".into()));
        };
        if let Some(r) = reply {
            session.submit_user_reply(r)?;
            self.publish(entry, session);
        }
        while !session.is_finished() && !session.awaiting_user() {
            session.step(ctx)?;
            self.publish(entry, session);
        }
        if let Some(next) = &session.deployed_state {
            let mut current = self.state.write().expect("state lock");
            if current.revision == session.base_state.revision {
                *current = next.clone();
            } else {
                tracing::warn!(session = %entry.id, "network moved on since the session started; deployment not recorded");
            }
        }
        Ok(())
    }

    pub fn create(&self, query: &str) -> Result<Arc<Entry>, ApiError> {
        let base = self.state.read().expect("state lock").clone();
        let session = start_session(query, base, self.agent.clone())?;
        let id = session.session_id.clone();
        let entry = Arc::new(Entry::new(id.clone(), None, Vec::new(), Some(self.context())));
        self.publish(&entry, &session);
        *entry.session.lock().expect("session lock") = Some(session);
        self.sessions.write().expect("sessions lock").insert(id, entry.clone());
        Ok(entry)
    }

    pub fn add_feedback(&self, entry: &Entry, fb: Feedback) -> Result<(), ApiError> {
        let turns = entry.turns.read().expect("turns lock");
        let Some(turn) = turns.get(fb.index) else {
            return Err(ApiError::BadRequest(format!("no turn {}", fb.index)));
        };
        if matches!(turn.action, TurnAction::Query | TurnAction::UserReply | TurnAction::Confirm | TurnAction::Reject) {
            return Err(ApiError::BadRequest("feedback applies to agent turns only".into()));
        }
        if let Some(path) = self.feedback_path(&entry.id) {
            append_lines(&path, std::slice::from_ref(&fb)).map_err(|e| ApiError::Internal(e.to_string()))?;
        }
        entry.feedback.write().expect("feedback lock").insert(fb.index, fb);
        Ok(())
    }
}

fn append_lines<T: Serialize>(path: &Path, items: &[T]) -> std::io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut buf = String::new();
    for t in items {
        buf.push_str(&serde_json::to_string(t).expect("record serializes"));
        buf.push('\n');
    }
    f.write_all(buf.as_bytes())?;
    f.sync_data()
}

fn restore(dir: &Path) -> Result<Vec<Entry>, ConfigError> {
    let io = |source| ConfigError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut out = Vec::new();
    for e in fs::read_dir(dir).map_err(io)? {
        let path = e.map_err(io)?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(id) = name.strip_suffix(".jsonl").filter(|id| !id.ends_with(".feedback")) else { continue };
        let text = fs::read_to_string(&path).map_err(io)?;
        let turns = match read_transcript(&text) {
            Ok(t) => t,
            Err(err) => {
                tracing::warn!("skipping {}: {err}", path.display());
                continue;
            }
        };
        let entry = Entry::new(id.to_string(), None, turns, None);
        let fb_path = dir.join(format!("{id}.feedback.jsonl"));
        if let Ok(fb) = fs::read_to_string(&fb_path) {
            let mut map = entry.feedback.write().expect("feedback lock");
            for l in fb.lines().filter(|l| !l.trim().is_empty()) {
                if let Ok(f) = serde_json::from_str::<Feedback>(l) {
                    map.insert(f.index, f);
                }
            }
        }
        out.push(entry);
    }
    Ok(out)
}

type Shared = Arc<AppState>;

#[derive(Deserialize)]
struct CreateBody {
    #[serde(default)]
    query: String,
}

#[derive(Serialize)]
struct SessionSummary {
    session_id: String,
    phase: Phase,
    read_only: bool,
    turns: usize,
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))?
}

/// A failed session whose last turn is a model or retrieval call that
/// errored out means the backend is unreachable.
fn backend_failure(entry: &Entry) -> Option<String> {
    let turns = entry.turns.read().expect("turns lock");
    let last = turns.last()?;
    if last.phase != Phase::Failed {
        return None;
    }
    let calls = matches!(
        last.action,
        TurnAction::RetrieveState
            | TurnAction::RetrieveDocs
            | TurnAction::ProposePlan
            | TurnAction::AskUser
            | TurnAction::Generate
            | TurnAction::RepairGenerate
    );
    calls.then(|| last.payload.get("error").and_then(|e| e.as_str()).map(str::to_string)).flatten()
}

async fn create_session(State(app): State<Shared>, body: Option<Json<CreateBody>>) -> Result<Response, ApiError> {
    let query = body.map(|Json(b)| b.query).unwrap_or_default();
    if query.trim().is_empty() {
        return Err(ApiError::BadRequest("the query is empty".into()));
    }
    let entry = {
        let app = app.clone();
        blocking(move || {
            let entry = app.create(&query)?;
            app.advance(&entry, None)?;
            Ok(entry)
        })
        .await?
    };
    if let Some(cause) = backend_failure(&entry) {
        return Err(ApiError::Unavailable {
            session_id: entry.id.clone(),
            cause,
        });
    }
    Ok((StatusCode::CREATED, Json(entry.view())).into_response())
}

async fn list_sessions(State(app): State<Shared>) -> Json<Vec<SessionSummary>> {
    let out = app
        .session_ids()
        .into_iter()
        .filter_map(|id| app.get(&id).ok())
        .map(|e| {
            let v = e.view();
            SessionSummary {
                session_id: v.session_id,
                phase: v.phase,
                read_only: v.read_only,
                turns: v.transcript.len(),
            }
        })
        .collect();
    Json(out)
}

async fn get_session(State(app): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<ApiSessionView>, ApiError> {
    Ok(Json(app.get(&id)?.view()))
}

async fn get_transcript(State(app): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let entry = app.get(&id)?;
    let body = netlingua_core::agent::transcript_to_jsonl(&entry.turns());
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
}

async fn reply(
    State(app): State<Shared>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<UserReply>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<ApiSessionView>, ApiError> {
    let entry = app.get(&id)?;
    let Json(reply) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let e = entry.clone();
    blocking(move || app.advance(&e, Some(reply))).await?;
    Ok(Json(entry.view()))
}

#[derive(Deserialize)]
struct FeedbackBody {
    rating: crate::view::Rating,
    #[serde(default)]
    comment: Option<String>,
}

async fn feedback(
    State(app): State<Shared>,
    UrlPath((id, index)): UrlPath<(String, usize)>,
    body: Result<Json<FeedbackBody>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<ApiSessionView>, ApiError> {
    let entry = app.get(&id)?;
    let Json(b) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    app.add_feedback(
        &entry,
        Feedback {
            index,
            rating: b.rating,
            comment: b.comment,
        },
    )?;
    Ok(Json(entry.view()))
}

#[derive(Deserialize)]
struct EventsQuery {
    #[serde(default)]
    from: usize,
}

async fn events(
    State(app): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<EventsQuery>,
    ws: WebSocketUpgrade,
) -> Response {
    let entry = app.get(&id).ok();
    ws.on_upgrade(move |socket| async move {
        match entry {
            Some(e) => stream_events(socket, e, q.from).await,
            None => {
                let mut socket = socket;
                let _ = socket
                    .send(Message::Close(Some(CloseFrame {
                        code: 1008,
                        reason: format!("unknown session {id}").into(),
                    })))
                    .await;
            }
        }
    })
}

/// Sends turns `from..` in order, then each new turn as it lands. Closes
/// once the session can produce no more turns.
async fn stream_events(mut socket: WebSocket, entry: Arc<Entry>, from: usize) {
    let mut rx = entry.events.subscribe();
    let mut next = from;
    loop {
        rx.borrow_and_update();
        for t in entry.turns_from(next) {
            let text = serde_json::to_string(&t).expect("turn serializes");
            if socket.send(Message::Text(text.into())).await.is_err() {
                return;
            }
            next = t.index + 1;
        }
        if entry.closed() && next >= entry.turns.read().expect("turns lock").len() {
            let _ = socket
                .send(Message::Close(Some(CloseFrame {
                    code: 1000,
                    reason: "session finished".into(),
                })))
                .await;
            return;
        }
        tokio::select! {
            changed = rx.changed() => if changed.is_err() { return },
            msg = socket.recv() => match msg {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

async fn auth(State(app): State<Shared>, req: Request, next: Next) -> Result<Response, ApiError> {
    let Some(token) = &app.token else {
        return Ok(next.run(req).await);
    };
    let header_ok = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|v| v == token);
    // browsers cannot set headers on a WebSocket handshake
    let query_ok = req
        .uri()
        .query()
        .is_some_and(|q| q.split('&').any(|kv| kv.strip_prefix("token=") == Some(token.as_str())));
    if header_ok || query_ok {
        Ok(next.run(req).await)
    } else {
        Err(ApiError::Unauthorized)
    }
}

pub fn router(app: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/reply", post(reply))
        .route("/sessions/{id}/transcript", get(get_transcript))
        .route("/sessions/{id}/turns/{index}/feedback", post(feedback))
        .route("/sessions/{id}/events", get(events))
        .route_layer(middleware::from_fn_with_state(app.clone(), auth));
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .merge(api)
        .with_state(app)
}

pub async fn serve(app: Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
