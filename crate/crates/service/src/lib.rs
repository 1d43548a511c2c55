//! HTTP sessions around [`hiervis::Agent`].
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/sessions` | create a session from a catalog source |
//! | GET | `/sessions/{id}/recommendation` | next visualization (409 while one is pending) |
//! | POST | `/sessions/{id}/feedback` | answer the pending visualization |
//! | GET | `/sessions/{id}/metrics` | observed rewards so far |
//! | DELETE | `/sessions/{id}` | drop the session |
//!
//! Errors are `{"error": code, "message": text}`.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hiervis::features::{embed_columns, RawColumn};
use hiervis::harness::DEFAULT_UNPLAYED_BIAS;
use hiervis::model::{AttributeEmbedding, ChartType, ConfigurationArm};
use hiervis::{Agent, AgentOptions, Catalog, Feedback, Horizon, PolicyKind, Visualization};
use serde::{Deserialize, Serialize};

pub const MAX_UPLOAD_ATTRIBUTES: usize = 100;
pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(3600);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadedAttribute {
    pub name: String,
    pub embedding: Vec<f64>,
}

fn default_n_configs() -> usize {
    10
}
fn default_n_attrs() -> usize {
    20
}
fn default_dim() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogSource {
    Synthetic {
        #[serde(default = "default_n_configs")]
        n_configs: usize,
        #[serde(default = "default_n_attrs")]
        n_attrs: usize,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    Attributes(Vec<UploadedAttribute>),
    Columns(Vec<RawColumn>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(flatten)]
    pub source: CatalogSource,
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackBody {
    pub r_vis: u8,
    #[serde(default)]
    pub r_config: Option<u8>,
    #[serde(default)]
    pub r_attrs: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub n_configs: usize,
    pub n_attrs: usize,
    pub n_actions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisRef {
    pub index: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub round: u64,
    pub chart_type: ChartType,
    pub config: usize,
    pub x: AxisRef,
    pub y: AxisRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: u64,
    pub accepted: bool,
    pub liked: bool,
    pub cumulative_positive: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub rounds: u64,
    pub observed_rewards: Vec<u8>,
    pub cumulative_accepted: u64,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "session_not_found", format!("no session {id:?}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.code, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed_request", e.body_text())
    }
}

pub struct Session {
    agent: Agent,
    observed: Vec<u8>,
    accepted: u64,
    created: Instant,
    last_active: Instant,
}

impl Session {
    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn created(&self) -> Instant {
        self.created
    }

    fn snapshot(&self) -> MetricsSnapshot {
        MetricsSnapshot {
            rounds: self.observed.len() as u64,
            observed_rewards: self.observed.clone(),
            cumulative_accepted: self.accepted,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created { session: String, request: CreateSession },
    Recommended { session: String, action: Visualization },
    Feedback { session: String, action: Visualization, feedback: Feedback },
    Deleted { session: String },
}

#[derive(Serialize, Deserialize)]
struct LoggedEvent {
    ts_ms: u128,
    #[serde(flatten)]
    event: Event,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub idle_timeout: Duration,
    pub event_log: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            event_log: None,
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<String, Arc<Mutex<Session>>>>>,
    log: Option<Arc<Mutex<File>>>,
    idle_timeout: Duration,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> std::io::Result<Self> {
        let log = match &config.event_log {
            Some(path) => Some(Arc::new(Mutex::new(
                OpenOptions::new().create(true).append(true).open(path)?,
            ))),
            None => None,
        };
        Ok(AppState {
            sessions: Arc::default(),
            log,
            idle_timeout: config.idle_timeout,
        })
    }

    /// Runs `f` on a live session.
    pub fn with_session<R>(&self, id: &str, f: impl FnOnce(&Session) -> R) -> Option<R> {
        let s = self.sessions.lock().unwrap().get(id).cloned()?;
        let guard = s.lock().unwrap();
        Some(f(&guard))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    /// Drops sessions idle for longer than the timeout; returns how many.
    pub fn expire_idle(&self) -> usize {
        let now = Instant::now();
        let mut map = self.sessions.lock().unwrap();
        let before = map.len();
        map.retain(|_, s| now.duration_since(s.lock().unwrap().last_active) <= self.idle_timeout);
        before - map.len()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.expire_idle();
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    fn record(&self, event: Event) {
        let Some(log) = &self.log else { return };
        let ts_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        let mut line = serde_json::to_string(&LoggedEvent { ts_ms, event }).expect("event serializes");
        line.push('\n');
        // the log is best effort; a write failure must not fail the request
        let _ = log.lock().unwrap().write_all(line.as_bytes());
    }
}

fn one_hot_configs() -> Vec<ConfigurationArm> {
    ChartType::ALL
        .iter()
        .enumerate()
        .map(|(i, &c)| ConfigurationArm::one_hot(i, c))
        .collect()
}

fn too_many(n: usize) -> ApiError {
    ApiError::new(
        StatusCode::UNPROCESSABLE_ENTITY,
        "too_many_attributes",
        format!("{n} attributes exceeds the limit of {MAX_UPLOAD_ATTRIBUTES}"),
    )
}

fn invalid_catalog(e: hiervis::Error) -> ApiError {
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_catalog", e.to_string())
}

/// Catalog and agent for a creation request.
pub fn build_agent(request: &CreateSession) -> Result<Agent, ApiError> {
    let catalog = match &request.source {
        CatalogSource::Synthetic {
            n_configs,
            n_attrs,
            dim,
            seed,
        } => {
            if *n_attrs > MAX_UPLOAD_ATTRIBUTES {
                return Err(too_many(*n_attrs));
            }
            Catalog::synthetic(*n_configs, *n_attrs, *dim, *seed, false).map_err(invalid_catalog)?
        }
        CatalogSource::Attributes(attrs) => {
            if attrs.len() > MAX_UPLOAD_ATTRIBUTES {
                return Err(too_many(attrs.len()));
            }
            let attrs = attrs
                .iter()
                .enumerate()
                .map(|(i, a)| AttributeEmbedding::new(i, a.name.clone(), a.embedding.clone()))
                .collect::<hiervis::Result<Vec<_>>>()
                .map_err(invalid_catalog)?;
            Catalog::new(one_hot_configs(), attrs, false).map_err(invalid_catalog)?
        }
        CatalogSource::Columns(cols) => {
            if cols.len() > MAX_UPLOAD_ATTRIBUTES {
                return Err(too_many(cols.len()));
            }
            let attrs = embed_columns(cols).map_err(invalid_catalog)?;
            Catalog::new(one_hot_configs(), attrs, false).map_err(invalid_catalog)?
        }
    };
    let options = AgentOptions {
        alpha: request.alpha.unwrap_or(1.0),
        horizon: Horizon::Anytime,
        unplayed_bias: DEFAULT_UNPLAYED_BIAS,
        bias_ceiling: None,
    };
    Agent::new(PolicyKind::HierSucb, Arc::new(catalog), options).map_err(invalid_catalog)
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let Json(request) = body?;
    let agent = build_agent(&request)?;
    let cat = agent.catalog().clone();
    let id = uuid::Uuid::new_v4().simple().to_string();
    let now = Instant::now();
    let session = Session {
        agent,
        observed: vec![],
        accepted: 0,
        created: now,
        last_active: now,
    };
    state.expire_idle();
    state
        .sessions
        .lock()
        .unwrap()
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    state.record(Event::Created {
        session: id.clone(),
        request,
    });
    Ok((
        StatusCode::CREATED,
        Json(Created {
            session_id: id,
            n_configs: cat.n_configs(),
            n_attrs: cat.n_attrs(),
            n_actions: cat.n_actions(),
        }),
    ))
}

async fn recommendation(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Recommendation>, ApiError> {
    let session = state.session(&id)?;
    let mut s = session.lock().unwrap();
    s.last_active = Instant::now();
    if let Some(p) = s.agent.pending() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "recommendation_pending",
            format!("visualization {p} is awaiting feedback"),
        ));
    }
    let v = s
        .agent
        .select()
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "select_failed", e.to_string()))?;
    let cat = s.agent.catalog();
    let axis = |i: usize| AxisRef {
        index: i,
        name: cat.attrs()[i].name.clone(),
    };
    let rec = Recommendation {
        round: s.agent.round() + 1,
        chart_type: cat.configs()[v.config].chart_type,
        config: v.config,
        x: axis(v.x_attr),
        y: axis(v.y_attr),
    };
    drop(s);
    state.record(Event::Recommended { session: id, action: v });
    Ok(Json(rec))
}

async fn feedback(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<FeedbackBody>, JsonRejection>,
) -> Result<Json<RoundSummary>, ApiError> {
    let session = state.session(&id)?;
    let Json(body) = body?;
    if body.r_vis == 0 && (body.r_config.is_none() || body.r_attrs.is_none()) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "follow_up_required",
            "the visualization was rejected: also answer whether the chart type is liked (r_config) \
             and whether the attribute pair is liked (r_attrs)",
        ));
    }
    let fb = Feedback::from_bits(body.r_vis, body.r_config, body.r_attrs)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_feedback", e.to_string()))?;
    let mut s = session.lock().unwrap();
    s.last_active = Instant::now();
    let Some(v) = s.agent.pending() else {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "no_pending_recommendation",
            "request a recommendation before sending feedback",
        ));
    };
    s.agent
        .observe(v, fb)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "observe_failed", e.to_string()))?;
    s.observed.push(u8::from(fb.r_vis));
    s.accepted += u64::from(fb.r_vis);
    let summary = RoundSummary {
        round: s.agent.round(),
        accepted: true,
        liked: fb.r_vis,
        cumulative_positive: s.accepted,
    };
    drop(s);
    state.record(Event::Feedback {
        session: id,
        action: v,
        feedback: fb,
    });
    Ok(Json(summary))
}

async fn metrics(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<MetricsSnapshot>, ApiError> {
    let session = state.session(&id)?;
    let mut s = session.lock().unwrap();
    s.last_active = Instant::now();
    Ok(Json(s.snapshot()))
}

async fn delete_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<StatusCode, ApiError> {
    state.expire_idle();
    if state.sessions.lock().unwrap().remove(&id).is_none() {
        return Err(ApiError::not_found(&id));
    }
    state.record(Event::Deleted { session: id });
    Ok(StatusCode::NO_CONTENT)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/sessions/{id}/recommendation", get(recommendation))
        .route("/sessions/{id}/feedback", post(feedback))
        .route("/sessions/{id}/metrics", get(metrics))
        .with_state(state)
}

/// Rebuilds every session still alive at the end of an event log.
pub fn replay(path: &Path) -> Result<HashMap<String, Agent>, String> {
    let mut agents = HashMap::new();
    let file = File::open(path).map_err(|e| e.to_string())?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let logged: LoggedEvent = serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?;
        match logged.event {
            Event::Created { session, request } => {
                let agent = build_agent(&request).map_err(|e| e.message)?;
                agents.insert(session, agent);
            }
            Event::Recommended { .. } => {}
            Event::Feedback {
                session,
                action,
                feedback,
            } => {
                let agent = agents
                    .get_mut(&session)
                    .ok_or_else(|| format!("line {}: unknown session {session}", i + 1))?;
                agent.record(action, feedback).map_err(|e| e.to_string())?;
            }
            Event::Deleted { session } => {
                agents.remove(&session);
            }
        }
    }
    Ok(agents)
}
