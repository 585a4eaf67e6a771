//! HTTP+JSON front end for live engine sessions.
//!
//! Sessions live in memory and are lost on restart. Each session sits
//! behind its own mutex, so requests to one session run one at a time while
//! distinct sessions proceed in parallel. Every new transcript event is
//! fanned out to event-stream subscribers and, with a journal directory
//! configured, appended to `<dir>/<session_id>.jsonl` in the log format the
//! harness replays.

mod stream;

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mitigator_core::acts::{act_descriptor, ActDescriptor, DialogueAct, DialogueActType, TurnContext};
use mitigator_core::confusion::{InductionType, PersistenceLimits};
use mitigator_core::dsl::{
    builtin_default, compile_source, parse_policy, validate_program, CompileError, Diagnostic, PolicyError,
    PolicyProgram, PolicySource,
};
use mitigator_core::engine::{
    random_session_id, EngineConfig, EngineError, Observation, ObservationSource, ProductiveDispatch, Session,
    SessionEvent, SessionStatus,
};
use mitigator_core::journal::{write_event, write_header, LogHeader};
use mitigator_core::{ConfusionAssessment, ConfusionLevel, Thresholds};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, Mutex};

/// Capacity of each session's fan-out channel. Subscribers that fall
/// further behind catch up from the transcript.
const EVENT_CHANNEL: usize = 256;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub journal_dir: Option<PathBuf>,
    /// Default for sessions that do not set it themselves.
    pub overrides_advance_ladder: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub session_id: String,
    /// Milliseconds since the Unix epoch.
    pub created_at: u64,
    pub policy_name: String,
}

struct Slot {
    handle: SessionHandle,
    session: Mutex<Live>,
    events: broadcast::Sender<(usize, SessionEvent)>,
}

struct Live {
    session: Session,
    journal: Option<File>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                config,
                sessions: RwLock::new(HashMap::new()),
            }),
        }
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.inner
            .sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    InvalidPolicy {
        parse_error: Option<PolicyError>,
        diagnostics: Vec<Diagnostic>,
    },
    BadRequest(String),
    Engine(EngineError),
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    parse_error: Option<&'a PolicyError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<&'a [Diagnostic]>,
}

fn engine_code(e: &EngineError) -> (StatusCode, &'static str) {
    match e {
        EngineError::ObservationAfterEnd => (StatusCode::CONFLICT, "observation_after_end"),
        EngineError::ActAfterEnd => (StatusCode::CONFLICT, "act_after_end"),
        EngineError::NoObservation => (StatusCode::CONFLICT, "no_observation"),
        EngineError::MissingInduction => (StatusCode::UNPROCESSABLE_ENTITY, "missing_induction"),
        EngineError::Render(_) => (StatusCode::UNPROCESSABLE_ENTITY, "render_failed"),
        EngineError::StepLookup { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "step_lookup"),
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match &self {
            ApiError::NotFound(id) => (
                StatusCode::NOT_FOUND,
                ErrorBody {
                    error: "not_found",
                    message: format!("no session `{id}`"),
                    parse_error: None,
                    diagnostics: None,
                },
            ),
            ApiError::InvalidPolicy {
                parse_error,
                diagnostics,
            } => (
                StatusCode::BAD_REQUEST,
                ErrorBody {
                    error: "invalid_policy",
                    message: parse_error
                        .as_ref()
                        .map(ToString::to_string)
                        .unwrap_or_else(|| format!("{} diagnostic(s)", diagnostics.len())),
                    parse_error: parse_error.as_ref(),
                    diagnostics: Some(diagnostics),
                },
            ),
            ApiError::BadRequest(message) => (
                StatusCode::BAD_REQUEST,
                ErrorBody {
                    error: "bad_request",
                    message: message.clone(),
                    parse_error: None,
                    diagnostics: None,
                },
            ),
            ApiError::Engine(e) => {
                let (status, code) = engine_code(e);
                (
                    status,
                    ErrorBody {
                        error: code,
                        message: e.to_string(),
                        parse_error: None,
                        diagnostics: None,
                    },
                )
            }
            ApiError::Internal(message) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                ErrorBody {
                    error: "internal",
                    message: message.clone(),
                    parse_error: None,
                    diagnostics: None,
                },
            ),
        };
        (status, Json(&body)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        ApiError::Engine(e)
    }
}

/// `"builtin"` or `{"source": "<DSL text>"}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PolicyRef {
    Name(String),
    Inline { source: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub policy: Option<PolicyRef>,
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
    #[serde(default)]
    pub limits: Option<PersistenceLimits>,
    #[serde(default)]
    pub dispatch: Option<ProductiveDispatch>,
    #[serde(default)]
    pub overrides_advance_ladder: Option<bool>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub context: Option<TurnContext>,
}

fn compile_policy(policy: Option<&PolicyRef>) -> Result<PolicyProgram, ApiError> {
    let source = match policy {
        None => builtin_default(),
        Some(PolicyRef::Name(name)) if name == "builtin" || name == "default" => builtin_default(),
        Some(PolicyRef::Name(name)) => return Err(ApiError::BadRequest(format!("unknown policy `{name}`"))),
        Some(PolicyRef::Inline { source }) => PolicySource::new(source.clone(), "inline"),
    };
    compile_source(&source).map_err(|e| match e {
        CompileError::Parse(p) => ApiError::InvalidPolicy {
            parse_error: Some(p),
            diagnostics: Vec::new(),
        },
        CompileError::Invalid(diagnostics) => ApiError::InvalidPolicy {
            parse_error: None,
            diagnostics,
        },
    })
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Rejects bodies that are not JSON or do not match the request type with
/// a 400 in the service's error shape.
fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

async fn create_session(State(state): State<AppState>, body: axum::body::Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = if body.is_empty() {
        parse_body(b"{}")?
    } else {
        parse_body(&body)?
    };
    let program = Arc::new(compile_policy(req.policy.as_ref())?);
    let config = EngineConfig {
        thresholds: req.thresholds.unwrap_or_default(),
        limits: req.limits.unwrap_or_default(),
        dispatch: req.dispatch.unwrap_or_default(),
        overrides_advance_ladder: req
            .overrides_advance_ladder
            .unwrap_or(state.inner.config.overrides_advance_ladder),
    };
    let seed = req.seed.unwrap_or(0);

    let mut table = state.inner.sessions.write().expect("session table lock");
    let id = loop {
        let id = random_session_id();
        if !table.contains_key(&id) {
            break id;
        }
    };
    let mut session = Session::with_id(id.clone(), Arc::clone(&program), config, seed).with_wall_clock();
    if let Some(context) = req.context {
        session.set_context(context);
    }
    let journal = match &state.inner.config.journal_dir {
        None => None,
        Some(dir) => {
            let path = dir.join(format!("{id}.jsonl"));
            let mut file = OpenOptions::new()
                .create_new(true)
                .write(true)
                .open(&path)
                .map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
            write_header(&mut file, &LogHeader::for_session(&session))
                .map_err(|e| ApiError::Internal(e.to_string()))?;
            Some(file)
        }
    };
    let handle = SessionHandle {
        session_id: id.clone(),
        created_at: now_ms(),
        policy_name: program.name().to_string(),
    };
    let (events, _) = broadcast::channel(EVENT_CHANNEL);
    table.insert(
        id,
        Arc::new(Slot {
            handle: handle.clone(),
            session: Mutex::new(Live { session, journal }),
            events,
        }),
    );
    tracing::info!(session = %handle.session_id, policy = %handle.policy_name, "session created");
    Ok((StatusCode::CREATED, Json(handle)).into_response())
}

/// Runs `op` on the session and publishes the events it appended.
async fn mutate<R>(slot: &Slot, op: impl FnOnce(&mut Session) -> Result<R, EngineError>) -> Result<R, ApiError> {
    let mut live = slot.session.lock().await;
    let before = live.session.transcript().len();
    let result = op(&mut live.session);
    let Live { session, journal } = &mut *live;
    let fresh = &session.transcript()[before..];
    if let Some(file) = journal {
        for e in fresh {
            if let Err(err) = write_event(&mut *file, e).and_then(|()| file.flush()) {
                tracing::error!(session = %slot.handle.session_id, "journal write failed: {err}");
            }
        }
    }
    for (i, e) in fresh.iter().enumerate() {
        // No receivers is fine; streams catch up from the transcript.
        let _ = slot.events.send((before + i, e.clone()));
    }
    Ok(result?)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireObservation {
    pub level: ConfusionLevel,
    #[serde(default)]
    pub induction: Option<InductionType>,
    /// Defaults to `wizard`.
    #[serde(default)]
    pub source: Option<ObservationSource>,
}

async fn post_observation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> Result<Json<ConfusionAssessment>, ApiError> {
    let slot = state.slot(&id)?;
    let wire: WireObservation = parse_body(&body)?;
    let obs = Observation {
        level: wire.level,
        induction: wire.induction,
        source: wire.source.unwrap_or(ObservationSource::Wizard),
    };
    Ok(Json(mutate(&slot, |s| s.observe(obs)).await?))
}

#[derive(Debug, Deserialize)]
pub struct NextActQuery {
    #[serde(rename = "override")]
    pub override_act: Option<DialogueActType>,
}

async fn next_act(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<NextActQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Json<Option<DialogueAct>>, ApiError> {
    let slot = state.slot(&id)?;
    let Query(query) = query.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let act = mutate(&slot, |s| match query.override_act {
        Some(a) => s.next_act_with_override(a),
        None => s.next_act(),
    })
    .await?;
    Ok(Json(act))
}

#[derive(Debug, Serialize)]
pub struct SessionInfo {
    #[serde(flatten)]
    pub handle: SessionHandle,
    pub config: EngineConfig,
    pub status: SessionStatus,
    pub assessment: ConfusionAssessment,
    pub events: usize,
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionInfo>, ApiError> {
    let slot = state.slot(&id)?;
    let live = slot.session.lock().await;
    Ok(Json(SessionInfo {
        handle: slot.handle.clone(),
        config: *live.session.config(),
        status: live.session.status(),
        assessment: live.session.assessment(),
        events: live.session.transcript().len(),
    }))
}

async fn transcript(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Vec<SessionEvent>>, ApiError> {
    let slot = state.slot(&id)?;
    let live = slot.session.lock().await;
    Ok(Json(live.session.transcript().to_vec()))
}

async fn events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    let slot = state.slot(&id)?;
    let resume = match headers.get("last-event-id") {
        None => 0,
        Some(v) => {
            let last: usize = v
                .to_str()
                .ok()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| ApiError::BadRequest("Last-Event-ID must be an event index".into()))?;
            last + 1
        }
    };
    Ok(stream::event_stream(slot, resume).await.into_response())
}

#[derive(Debug, Serialize)]
pub struct BuiltinPolicy {
    pub name: String,
    pub checksum: String,
    pub source: String,
}

async fn builtin_policy() -> Json<BuiltinPolicy> {
    let source = builtin_default();
    let program = compile_source(&source).expect("builtin policy compiles");
    Json(BuiltinPolicy {
        name: program.name().to_string(),
        checksum: program.checksum,
        source: source.text,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateRequest {
    pub source: String,
}

#[derive(Debug, Serialize)]
pub struct ValidateResponse {
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<PolicyError>,
    pub diagnostics: Vec<Diagnostic>,
}

async fn validate_policy(body: axum::body::Bytes) -> Result<Json<ValidateResponse>, ApiError> {
    let req: ValidateRequest = parse_body(&body)?;
    let response = match parse_policy(&PolicySource::new(req.source, "request")) {
        Err(e) => ValidateResponse {
            valid: false,
            parse_error: Some(e),
            diagnostics: Vec::new(),
        },
        Ok(ast) => {
            let diagnostics = validate_program(&ast);
            ValidateResponse {
                valid: diagnostics.is_empty(),
                parse_error: None,
                diagnostics,
            }
        }
    };
    Ok(Json(response))
}

async fn acts() -> Json<Vec<ActDescriptor>> {
    Json(DialogueActType::ALL.iter().map(|a| act_descriptor(*a)).collect())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/observations", post(post_observation))
        .route("/sessions/{id}/next-act", get(next_act))
        .route("/sessions/{id}/transcript", get(transcript))
        .route("/sessions/{id}/events", get(events))
        .route("/policies/builtin", get(builtin_policy))
        .route("/policies/validate", post(validate_policy))
        .route("/acts", get(acts))
        .with_state(state)
}
