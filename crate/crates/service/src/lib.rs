//! HTTP API over the `trpplan` toolkit.
//!
//! `POST /api/evaluate` runs a bound map or a Monte Carlo campaign for one
//! deployment; `GET /api/presets` lists the built-in scenario/layout presets.

pub mod evaluate;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

pub use evaluate::{evaluate, parse_request, EvalError, EvalMode, EvaluateRequest};

/// Wall-clock evaluation time, kept out of the body so bodies stay
/// byte-identical for identical requests.
pub const DURATION_HEADER: &str = "x-eval-duration-ms";

#[derive(Clone)]
pub struct AppState {
    pool: Arc<rayon::ThreadPool>,
}

impl AppState {
    /// `threads == 0` lets rayon pick.
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Self { pool: Arc::new(pool) })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn status_of(e: &EvalError) -> StatusCode {
    match e {
        EvalError::Schema(_) => StatusCode::BAD_REQUEST,
        EvalError::Semantic { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        EvalError::OverBudget { .. } => StatusCode::SERVICE_UNAVAILABLE,
        EvalError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

fn error_response(e: &EvalError) -> Response {
    (status_of(e), Json(e.body())).into_response()
}

async fn evaluate_handler(State(state): State<AppState>, body: Bytes) -> Response {
    let start = Instant::now();
    let text = match std::str::from_utf8(&body) {
        Ok(t) => t.to_owned(),
        Err(e) => {
            let e = EvalError::Schema(trpplan::config::ConfigError::invalid(
                ".",
                format!("body is not UTF-8: {e}"),
            ));
            return error_response(&e);
        }
    };
    let req = match parse_request(&text) {
        Ok(r) => r,
        Err(e) => return error_response(&e),
    };
    let pool = state.pool.clone();
    let outcome = tokio::task::spawn_blocking(move || pool.install(|| evaluate(&req))).await;
    let mut response = match outcome {
        Ok(Ok(v)) => Json(v).into_response(),
        Ok(Err(e)) => error_response(&e),
        Err(e) => error_response(&EvalError::Internal(e.to_string())),
    };
    let ms = format!("{:.3}", start.elapsed().as_secs_f64() * 1e3);
    if let Ok(v) = HeaderValue::from_str(&ms) {
        response.headers_mut().insert(DURATION_HEADER, v);
    }
    response
}

async fn presets_handler() -> Response {
    let presets: Vec<_> = trpplan::config::preset_catalog()
        .into_iter()
        .map(|p| {
            json!({
                "name": p.name,
                "family": p.family,
                "layout": p.layout,
                "scenario": p.deployment.scenario(),
                "trps": p.deployment.trps(),
            })
        })
        .collect();
    Json(json!({ "presets": presets })).into_response()
}

async fn health_handler() -> &'static str {
    "ok"
}

/// API routes, plus the web UI's static files when `static_dir` is given.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/evaluate", post(evaluate_handler))
        .route("/api/presets", get(presets_handler))
        .route("/api/health", get(health_handler))
        .with_state(state)
        .layer(CorsLayer::permissive());
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: AppState, static_dir: Option<PathBuf>) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
