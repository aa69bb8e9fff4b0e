//! HTTP surface for the test-case generator: POST /chat runs a generation
//! job and returns the rendered script text, GET /download/{id} serves the
//! exported collection, GET / describes the API.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use postgen_core::collection::collection_file_name;
use postgen_core::generator::{ExemplarRecord, GeneratorError, ProviderConfig};
use postgen_core::job::{self, GenerationJob, JobError, Mode, MAX_COUNT};

pub const DEFAULT_PORT: u16 = 3011;
pub const DOWNLOAD_TTL_SECS: u64 = 3600;

/// Wall-clock seconds, injectable so expiry is testable.
pub trait Clock: Send + Sync {
    fn now_secs(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_secs(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
    }
}

struct StoredDownload {
    file_name: String,
    bytes: Vec<u8>,
    expires_at: u64,
}

pub struct AppState {
    downloads: Mutex<HashMap<String, StoredDownload>>,
    clock: Box<dyn Clock>,
    ttl_secs: u64,
    provider: Option<ProviderConfig>,
    corpus: Vec<ExemplarRecord>,
    uuid_seed: Option<u64>,
}

impl AppState {
    pub fn new(provider: Option<ProviderConfig>, corpus: Vec<ExemplarRecord>) -> Self {
        Self::with_clock(provider, corpus, Box::new(SystemClock))
    }

    pub fn with_clock(
        provider: Option<ProviderConfig>,
        corpus: Vec<ExemplarRecord>,
        clock: Box<dyn Clock>,
    ) -> Self {
        let uuid_seed = std::env::var("POSTGEN_UUID_SEED").ok().and_then(|s| s.parse().ok());
        AppState {
            downloads: Mutex::new(HashMap::new()),
            clock,
            ttl_secs: DOWNLOAD_TTL_SECS,
            provider,
            corpus,
            uuid_seed,
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct GenerateRequest {
    pub api_url: String,
    pub count: i64,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default)]
    pub method: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub script_text: String,
    pub download_id: String,
    pub diagnostics: Vec<String>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(handle_usage))
        .route("/chat", post(handle_generate))
        .route("/download/{id}", get(handle_download))
        .with_state(state)
}

async fn handle_usage() -> Json<serde_json::Value> {
    Json(json!({
        "service": "postgen",
        "status": "ready",
        "endpoints": {
            "POST /chat": {
                "body": {
                    "api_url": "absolute http(s) URL",
                    "count": format!("1..={MAX_COUNT}"),
                    "mode": "deterministic | llm (optional)",
                    "method": "GET | POST | PUT | PATCH | DELETE | HEAD | OPTIONS (optional)",
                },
                "returns": { "script_text": "text", "download_id": "text", "diagnostics": ["text"] },
            },
            "GET /download/{id}": "collection JSON as an attachment",
        },
    }))
}

fn error_body(status: StatusCode, message: String) -> Response {
    (status, Json(json!({ "error": message }))).into_response()
}

async fn handle_generate(
    State(state): State<Arc<AppState>>,
    Json(req): Json<GenerateRequest>,
) -> Response {
    if req.count < 1 || req.count > MAX_COUNT as i64 {
        return error_body(
            StatusCode::BAD_REQUEST,
            format!("count must be between 1 and {MAX_COUNT}, got {}", req.count),
        );
    }
    let mode = match req.mode.as_deref() {
        Some(s) => match Mode::parse(s) {
            Some(m) => m,
            None => {
                return error_body(StatusCode::BAD_REQUEST, format!("unknown mode {s:?}"));
            }
        },
        None => {
            if state.provider.is_some() {
                Mode::Llm
            } else {
                Mode::Deterministic
            }
        }
    };

    let mut job = GenerationJob::new(req.api_url.clone(), req.count as usize, mode);
    if let Some(method) = &req.method {
        job.method = method.to_uppercase();
    }
    job.provider = state.provider.clone();
    job.corpus = state.corpus.clone();
    job.uuid_seed = state.uuid_seed;

    let outcome = match job::execute(&job).await {
        Ok(outcome) => outcome,
        Err(JobError::Validation(msg)) => return error_body(StatusCode::BAD_REQUEST, msg),
        Err(JobError::Probe(e)) => {
            return error_body(StatusCode::BAD_GATEWAY, format!("probe failed: {e}"))
        }
        Err(JobError::Generator(GeneratorError::CatalogExhausted { available })) => {
            return (
                StatusCode::UNPROCESSABLE_ENTITY,
                Json(json!({
                    "error": format!("only {available} assertions derivable from this response"),
                    "available": available,
                })),
            )
                .into_response()
        }
        Err(JobError::Generator(e)) => {
            return error_body(StatusCode::BAD_GATEWAY, format!("generation failed: {e}"))
        }
        Err(JobError::Collection(e)) => {
            return error_body(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        }
    };

    let download_id = uuid::Uuid::new_v4().to_string();
    let now = state.clock.now_secs();
    {
        let mut downloads = state.downloads.lock().expect("download store");
        downloads.retain(|_, d| d.expires_at > now);
        downloads.insert(
            download_id.clone(),
            StoredDownload {
                file_name: collection_file_name(&outcome.collection.info_name),
                bytes: outcome.collection_bytes.clone(),
                expires_at: now + state.ttl_secs,
            },
        );
    }
    tracing::info!(url = %req.api_url, count = req.count, %download_id, "generated collection");

    Json(GenerateResponse {
        script_text: outcome.script_text,
        download_id,
        diagnostics: outcome.diagnostics,
    })
    .into_response()
}

async fn handle_download(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let downloads = state.downloads.lock().expect("download store");
    let now = state.clock.now_secs();
    match downloads.get(&id) {
        Some(d) if d.expires_at > now => (
            StatusCode::OK,
            [
                (header::CONTENT_TYPE, "application/json".to_string()),
                (
                    header::CONTENT_DISPOSITION,
                    format!("attachment; filename=\"{}\"", d.file_name),
                ),
            ],
            d.bytes.clone(),
        )
            .into_response(),
        _ => error_body(StatusCode::NOT_FOUND, format!("unknown or expired download id {id:?}")),
    }
}

/// Bind and serve until the task is dropped. Returns the bound address, so
/// callers can pass port 0 for an ephemeral port.
pub async fn serve(state: Arc<AppState>, port: u16) -> std::io::Result<SocketAddr> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    let addr = listener.local_addr()?;
    let app = router(state);
    tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!("server error: {e}");
        }
    });
    Ok(addr)
}

/// Serve in the foreground (used by the CLI `serve` subcommand).
pub async fn serve_blocking(state: Arc<AppState>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
