//! HTTP/JSON service for blind replay sessions.
//!
//! | Method | Path | Success |
//! |---|---|---|
//! | POST | `/sessions` | 201 `{session_id, commitment}` |
//! | GET | `/sessions/{id}/bars/next` | 200 bar, 204 at end of stream |
//! | POST | `/sessions/{id}/predictions` | 201 `{entry_hash, chain_length}` |
//! | POST | `/sessions/{id}/seal` | 200 |
//! | POST | `/sessions/{id}/reveal` | 200 `{manifest, verification}` |
//! | GET | `/sessions/{id}/report` | 200 metrics report |
//! | GET | `/health` | 200 |
//!
//! Errors carry `{code, message}`. Every mutation reaches disk before the
//! response is sent.

mod error;
mod store;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, MutexGuard};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qgms_core::blind_harness::{BlindSession, Prediction, Reveal, SessionState};
use qgms_core::market_data::{parse_csv, read_csv_file, CSV_HEADER, CSV_HEADER_WITH_VOLUME};
use qgms_core::{evaluate_predictions, EvaluationConfig, ExactSeries};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

pub use error::{ApiError, ErrorBody};
pub use store::{SessionRecord, SessionStore};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("cannot open data directory {path}: {source}")]
    Storage { path: PathBuf, source: std::io::Error },
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server failed: {0}")]
    Serve(std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub data_dir: PathBuf,
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<SessionStore>,
}

impl AppState {
    pub fn open(data_dir: &Path) -> Result<Self, ServiceError> {
        let store = SessionStore::open(data_dir)
            .map_err(|source| ServiceError::Storage { path: data_dir.to_path_buf(), source })?;
        Ok(AppState { store: Arc::new(store) })
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/bars/next", get(next_bar))
        .route("/sessions/{id}/predictions", post(submit_prediction))
        .route("/sessions/{id}/seal", post(seal))
        .route("/sessions/{id}/reveal", post(reveal))
        .route("/sessions/{id}/report", get(report))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Binds, reloads persisted sessions and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = AppState::open(&config.data_dir)?;
    let listener = tokio::net::TcpListener::bind(config.addr)
        .await
        .map_err(|source| ServiceError::Bind { addr: config.addr, source })?;
    tracing::info!(addr = %config.addr, data_dir = %config.data_dir.display(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve)
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "sessions": state.store.len() }))
}

/// A price given either as a JSON number or as a decimal string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PriceValue {
    Number(f64),
    Text(String),
}

impl PriceValue {
    fn to_field(&self) -> Result<String, ApiError> {
        match self {
            PriceValue::Number(v) if v.is_finite() => Ok(v.to_string()),
            PriceValue::Number(v) => Err(ApiError::bad_request(format!("price {v} is not finite"))),
            PriceValue::Text(t) => plain_field(t),
        }
    }
}

fn plain_field(text: &str) -> Result<String, ApiError> {
    if text.contains([',', '\n', '\r', '"']) {
        return Err(ApiError::bad_request(format!("field {text:?} contains a separator")));
    }
    Ok(text.to_string())
}

#[derive(Debug, Clone, Deserialize)]
pub struct InlineBar {
    pub timestamp: String,
    pub open: PriceValue,
    pub high: PriceValue,
    pub low: PriceValue,
    pub close: PriceValue,
    #[serde(default)]
    pub volume: Option<PriceValue>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default)]
    pub inline_bars: Option<Vec<InlineBar>>,
    /// Drawn at random when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub symbol: Option<String>,
    #[serde(default)]
    pub timeframe: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub commitment: String,
}

fn inline_series(bars: &[InlineBar], symbol: &str, timeframe: &str) -> Result<ExactSeries, ApiError> {
    let with_volume = bars.iter().any(|b| b.volume.is_some());
    let mut text = String::from(if with_volume { CSV_HEADER_WITH_VOLUME } else { CSV_HEADER });
    text.push('\n');
    for b in bars {
        let mut fields = vec![
            plain_field(&b.timestamp)?,
            b.open.to_field()?,
            b.high.to_field()?,
            b.low.to_field()?,
            b.close.to_field()?,
        ];
        if with_volume {
            fields.push(b.volume.as_ref().map(PriceValue::to_field).transpose()?.unwrap_or_default());
        }
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    parse_csv(&text, symbol, timeframe).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn load_series(req: &CreateSession) -> Result<ExactSeries, ApiError> {
    match (&req.csv_path, &req.inline_bars) {
        (Some(path), None) => read_csv_file(path, req.symbol.as_deref(), req.timeframe.as_deref())
            .map_err(|e| ApiError::bad_request(format!("{}: {e}", path.display()))),
        (None, Some(bars)) => inline_series(
            bars,
            req.symbol.as_deref().unwrap_or("UNKNOWN"),
            req.timeframe.as_deref().unwrap_or("unknown"),
        ),
        _ => Err(ApiError::bad_request("provide exactly one of csv_path or inline_bars")),
    }
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    body.map(|Json(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = json_body(body)?;
    let series = load_series(&req)?;
    let seed = req.seed.unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0);
    let session = BlindSession::new(series.clone(), seed)?.with_id(uuid::Uuid::new_v4().to_string());
    let created = Created { session_id: session.id().to_string(), commitment: session.commitment().to_string() };
    state.store.insert(session, &series, seed).map_err(ApiError::storage)?;
    tracing::info!(session = %created.session_id, bars = series.len(), "session created");
    Ok((StatusCode::CREATED, Json(created)).into_response())
}

fn slot(state: &AppState, id: &str) -> Result<store::Slot, ApiError> {
    state.store.get(id).ok_or_else(|| ApiError::not_found(id))
}

fn lock(slot: &store::Slot) -> MutexGuard<'_, SessionRecord> {
    slot.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

async fn next_bar(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let slot = slot(&state, &id)?;
    let mut record = lock(&slot);
    let before = record.session.clone();
    let bar = record.session.next_bar()?.cloned();
    if let Err(e) = record.save_state() {
        record.session = before;
        return Err(ApiError::storage(e));
    }
    Ok(match bar {
        Some(bar) => Json(bar).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Committed {
    pub entry_hash: String,
    pub chain_length: usize,
}

async fn submit_prediction(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<Prediction>, JsonRejection>,
) -> Result<Response, ApiError> {
    let slot = slot(&state, &id)?;
    let prediction = json_body(body)?;
    let mut record = lock(&slot);
    let before = record.session.clone();
    let entry = record.session.submit_prediction(&prediction)?.clone();
    if let Err(e) = record.append_entry(&entry) {
        record.session = before;
        return Err(ApiError::storage(e));
    }
    let body = Committed { entry_hash: entry.hash, chain_length: record.session.ledger().len() };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn seal(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let slot = slot(&state, &id)?;
    let mut record = lock(&slot);
    let before = record.session.state();
    record.session.seal()?;
    if before != SessionState::Sealed {
        record.save_state().map_err(ApiError::storage)?;
    }
    Ok(Json(serde_json::json!({ "session_id": id, "state": record.session.state() })).into_response())
}

async fn reveal(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<Reveal>, ApiError> {
    let slot = slot(&state, &id)?;
    let mut record = lock(&slot);
    if let Some(cached) = &record.reveal {
        return Ok(Json(cached.clone()));
    }
    let before = record.session.clone();
    let in_memory = record.session.seal_and_reveal()?;
    let outcome = record.verify_on_disk(&in_memory).and_then(|r| record.save_reveal(&r).map(|_| r));
    match outcome {
        Ok(revealed) => {
            record.reveal = Some(revealed.clone());
            tracing::info!(session = %id, chain_ok = revealed.verification.chain_ok, "session revealed");
            Ok(Json(revealed))
        }
        Err(e) => {
            record.session = before;
            Err(ApiError::storage(e))
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ReportParams {
    pub horizon: Option<usize>,
    pub atr: Option<usize>,
    pub k: Option<f64>,
}

async fn report(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    params: Result<Query<ReportParams>, QueryRejection>,
) -> Result<Response, ApiError> {
    let slot = slot(&state, &id)?;
    let Query(params) = params.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let defaults = EvaluationConfig::default();
    let config = EvaluationConfig {
        horizon_bars: params.horizon.unwrap_or(defaults.horizon_bars),
        atr_window: params.atr.unwrap_or(defaults.atr_window),
        hit_multiplier: params.k.unwrap_or(defaults.hit_multiplier),
    };
    config.validate().map_err(|e| ApiError::bad_request(e.to_string()))?;
    let record = lock(&slot);
    let series = record.session.revealed_series().ok_or_else(|| {
        ApiError::new(StatusCode::CONFLICT, "NOT_REVEALED", "the report is available after reveal")
    })?;
    let predictions = record.session.ledger().predictions();
    let report = evaluate_predictions(series, &predictions, &config).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(report).into_response())
}
