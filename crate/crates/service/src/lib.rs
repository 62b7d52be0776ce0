//! HTTP+JSON service for live missions.
//!
//! `POST /sessions` starts a mission and returns its first trial,
//! `POST /sessions/{id}/response` records an answer and returns the next
//! trial or the mission summary, `GET /sessions/{id}/summary` reports
//! progress and `GET /policies` lists what a session can be run under.
//! Every payload carries `schema_version`.

pub mod cues;
pub mod session;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use trustwork_core::model::{reference_model, TrustWorkloadModel};
use trustwork_core::policy::{QTable, ReliabilitySpec};
use trustwork_core::sim::{
    generate_mission, ArmorTimings, MissionConfig, MissionController, TransparencyPolicy,
    TransparencyRule,
};

pub use cues::{generate_cues, CueCell, CueConfig, Cues, SensorReading};
pub use session::{
    ArmorAdvice, LiveSession, ResponseReply, ResponseRequest, SessionState, SessionSummary,
    TrialPayload, SLOW_RT_FLAG, SLOW_RT_SECONDS,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error("{0}")]
    Internal(String),
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub schema_version: u32,
    pub error: String,
    pub message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            ServiceError::Validation { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            ServiceError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let body = ErrorBody {
            schema_version: SCHEMA_VERSION,
            error: code.into(),
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub model: TrustWorkloadModel,
    pub reliability: ReliabilitySpec,
    pub timings: ArmorTimings,
    pub trials_per_mission: usize,
    pub cues: CueConfig,
    pub policies: Vec<TransparencyPolicy>,
    /// Session logs land here as `<session id>.csv`.
    pub log_dir: PathBuf,
    /// Allows client-chosen seeds and, without one, gives every session the
    /// mission drawn from `server_seed`.
    pub test_mode: bool,
    pub server_seed: u64,
    /// Allowed browser origin; `None` allows any.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            model: reference_model(),
            reliability: ReliabilitySpec::STUDY,
            timings: ArmorTimings::default(),
            trials_per_mission: 15,
            cues: CueConfig::default(),
            policies: TransparencyPolicy::standard(),
            log_dir: PathBuf::from("sessions"),
            test_mode: false,
            server_seed: 0,
            cors_origin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyInfo {
    pub id: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyList {
    pub schema_version: u32,
    pub policies: Vec<PolicyInfo>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    #[serde(default)]
    pub schema_version: Option<u32>,
    pub policy: String,
    #[serde(default)]
    pub participant_id: Option<String>,
    /// Mission seed; accepted in test mode only.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSessionReply {
    pub schema_version: u32,
    pub session_id: String,
    pub trial: TrialPayload,
}

struct PolicyEntry {
    info: PolicyInfo,
    rule: TransparencyRule,
}

type SessionHandle = Arc<Mutex<LiveSession>>;

/// Shared read-only models and policies plus the session table. Each session
/// sits behind its own lock, so mutations of one session are serialized
/// while different sessions proceed independently.
pub struct AppState {
    config: ServiceConfig,
    policies: BTreeMap<String, PolicyEntry>,
    sessions: Mutex<HashMap<String, SessionHandle>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl AppState {
    /// Validate the config and solve every configured policy up front.
    pub fn new(config: ServiceConfig) -> Result<Self, ServiceError> {
        let bad = |field: &str, message: String| ServiceError::Validation {
            field: field.into(),
            message,
        };
        config
            .model
            .validate()
            .map_err(|v| bad("model", format!("{v:?}")))?;
        config
            .cues
            .validate()
            .map_err(|e| bad("cues", e.to_string()))?;
        if config.trials_per_mission == 0 {
            return Err(bad("trials_per_mission", "must be at least 1".into()));
        }
        let table = config
            .timings
            .decision_table()
            .map_err(|e| bad("timings", e.to_string()))?;
        std::fs::create_dir_all(&config.log_dir)
            .map_err(|e| ServiceError::Internal(format!("{}: {e}", config.log_dir.display())))?;
        let mut state = Self {
            config,
            policies: BTreeMap::new(),
            sessions: Mutex::new(HashMap::new()),
        };
        for p in state.config.policies.clone() {
            let rule = TransparencyRule::resolve(&p, &state.config.model, &state.config.reliability, &table)
                .map_err(|e| bad("policies", e.to_string()))?;
            let info = PolicyInfo {
                id: p.to_string(),
                kind: if p.fixed().is_some() { "fixed" } else { "closed_loop" }.into(),
                zeta: match p {
                    TransparencyPolicy::ClosedLoop { zeta } => Some(zeta),
                    _ => None,
                },
            };
            state.policies.insert(info.id.clone(), PolicyEntry { info, rule });
        }
        Ok(state)
    }

    /// Register a pre-solved Q-MDP policy, e.g. one loaded from a policy file.
    pub fn add_policy(&mut self, id: impl Into<String>, q: QTable) {
        let id = id.into();
        let info = PolicyInfo {
            id: id.clone(),
            kind: "closed_loop".into(),
            zeta: q.zeta,
        };
        let rule = TransparencyRule::QMdp(Arc::new(q));
        self.policies.insert(id, PolicyEntry { info, rule });
    }

    pub fn policy_list(&self) -> PolicyList {
        PolicyList {
            schema_version: SCHEMA_VERSION,
            policies: self.policies.values().map(|p| p.info.clone()).collect(),
        }
    }

    pub fn create_session(&self, req: &CreateSessionRequest) -> Result<CreateSessionReply, ServiceError> {
        check_version(req.schema_version)?;
        let entry = self
            .policies
            .get(&req.policy)
            .ok_or_else(|| ServiceError::NotFound(format!("unknown policy `{}`", req.policy)))?;
        let seed = match (req.seed, self.config.test_mode) {
            (Some(_), false) => {
                return Err(ServiceError::Validation {
                    field: "seed".into(),
                    message: "client seeds are accepted in test mode only".into(),
                })
            }
            (Some(s), true) => s,
            (None, true) => self.config.server_seed,
            (None, false) => rand::rng().random(),
        };
        let cfg = MissionConfig {
            trials_per_mission: self.config.trials_per_mission,
            reliability: self.config.reliability,
            timings: self.config.timings,
            seed,
            ..MissionConfig::default()
        };
        let trials = generate_mission(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        let table = cfg
            .timings
            .decision_table()
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let controller = MissionController::new(self.config.model.clone(), entry.rule.clone(), table, trials);
        let id = uuid::Uuid::new_v4().to_string();
        let participant = req.participant_id.clone().unwrap_or_else(|| id.clone());
        if participant.is_empty() || participant.contains([',', '\n', '\r', '"']) {
            return Err(ServiceError::Validation {
                field: "participant_id".into(),
                message: "must be non-empty and free of commas, quotes and newlines".into(),
            });
        }
        let log_path = self.config.log_dir.join(format!("{id}.csv"));
        let (session, trial) = LiveSession::start(
            id.clone(),
            participant,
            req.policy.clone(),
            controller,
            self.config.cues,
            seed,
            log_path,
        )?;
        lock(&self.sessions).insert(id.clone(), Arc::new(Mutex::new(session)));
        log::info!("session {id} created under policy {}", req.policy);
        Ok(CreateSessionReply {
            schema_version: SCHEMA_VERSION,
            session_id: id,
            trial,
        })
    }

    fn session(&self, id: &str) -> Result<SessionHandle, ServiceError> {
        lock(&self.sessions)
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown session `{id}`")))
    }

    pub fn submit_response(&self, id: &str, req: &ResponseRequest) -> Result<ResponseReply, ServiceError> {
        let handle = self.session(id)?;
        let mut s = lock(&handle);
        s.respond(req)
    }

    pub fn summary(&self, id: &str) -> Result<SessionSummary, ServiceError> {
        let handle = self.session(id)?;
        let s = lock(&handle);
        Ok(s.summary())
    }
}

fn check_version(v: Option<u32>) -> Result<(), ServiceError> {
    match v {
        Some(v) if v != SCHEMA_VERSION => Err(ServiceError::Validation {
            field: "schema_version".into(),
            message: format!("unsupported version {v} (server speaks {SCHEMA_VERSION})"),
        }),
        _ => Ok(()),
    }
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload.map(|Json(v)| v).map_err(|e| ServiceError::Validation {
        field: "body".into(),
        message: e.body_text(),
    })
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<Json<CreateSessionReply>, ServiceError> {
    let req = body(payload)?;
    state.create_session(&req).map(Json)
}

async fn submit_response(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    payload: Result<Json<ResponseRequest>, JsonRejection>,
) -> Result<Json<ResponseReply>, ServiceError> {
    let req = body(payload)?;
    state.submit_response(&id, &req).map(Json)
}

async fn session_summary(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionSummary>, ServiceError> {
    state.summary(&id).map(Json)
}

async fn list_policies(State(state): State<Arc<AppState>>) -> Json<PolicyList> {
    Json(state.policy_list())
}

pub fn router(state: Arc<AppState>) -> Router {
    let origin = match &state.config.cors_origin {
        Some(o) => match HeaderValue::from_str(o) {
            Ok(v) => AllowOrigin::exact(v),
            Err(_) => {
                log::warn!("ignoring unparsable CORS origin `{o}`");
                AllowOrigin::any()
            }
        },
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any);
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/response", post(submit_response))
        .route("/sessions/{id}/summary", get(session_summary))
        .route("/policies", get(list_policies))
        .layer(cors)
        .with_state(state)
}

/// Bind and serve until the process is stopped.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state))).await
}

/// Blocking wrapper around [`serve`] for callers without a runtime.
pub fn serve_blocking(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(addr, state))
}
