//! HTTP/JSON front end for [`stargraph_core::api`].
//!
//! | method | path          | body                  | reply                 |
//! |--------|---------------|-----------------------|-----------------------|
//! | GET    | `/health`     |                       | `{"status": "ok"}`    |
//! | GET    | `/scenarios`  |                       | `[SweepSpec]`         |
//! | POST   | `/resonance`  | `ResonanceRequest`    | `ResonanceResponse`   |
//! | POST   | `/conditions` | `ConditionsRequest`   | `ConditionsResponse`  |
//! | POST   | `/solve`      | `SolveRequest`        | `SolveResponse`       |
//! | POST   | `/sweep`      | `SweepSpec`           | `ConvergenceReport`   |
//!
//! Failures reply with an [`ErrorBody`]: 422 when the input is at fault,
//! 500 when the computation fails, and the extractor's status (400, 415,
//! 422) for bodies that do not parse.

use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::TcpListener;

use stargraph_core::api::{self, ErrorBody};
use stargraph_core::Error;

/// Largest accepted request body. Sweep specs with tabulated profiles are
/// the only large inputs.
pub const BODY_LIMIT: usize = 16 << 20;

pub fn router() -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/scenarios", get(scenarios))
        .route("/resonance", post(|b| run("resonance", b, api::resonance)))
        .route("/conditions", post(|b| run("conditions", b, api::conditions)))
        .route("/solve", post(|b| run("solve", b, api::solve)))
        .route("/sweep", post(|b| run("sweep", b, api::sweep)))
        .layer(axum::extract::DefaultBodyLimit::max(BODY_LIMIT))
}

/// Serves until ctrl-c.
pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn scenarios() -> Json<Vec<stargraph_core::SweepSpec>> {
    Json(api::scenarios())
}

pub enum ServiceError {
    Body(JsonRejection),
    Core(Error),
    Panicked(String),
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ServiceError::Body(r) => (
                r.status(),
                ErrorBody {
                    kind: "request".into(),
                    message: r.body_text(),
                },
            ),
            ServiceError::Core(e) => {
                let status = if e.is_input_error() {
                    StatusCode::UNPROCESSABLE_ENTITY
                } else {
                    StatusCode::INTERNAL_SERVER_ERROR
                };
                (status, ErrorBody::from(&e))
            }
            ServiceError::Panicked(message) => (
                StatusCode::INTERNAL_SERVER_ERROR,
                ErrorBody {
                    kind: "internal".into(),
                    message,
                },
            ),
        };
        (status, Json(body)).into_response()
    }
}

/// Runs a blocking operation off the async workers.
async fn run<T, R>(
    op: &'static str,
    body: Result<Json<T>, JsonRejection>,
    f: fn(&T) -> stargraph_core::Result<R>,
) -> Result<Json<R>, ServiceError>
where
    T: DeserializeOwned + Send + 'static,
    R: Serialize + Send + 'static,
{
    let Json(req) = body.map_err(ServiceError::Body)?;
    let start = Instant::now();
    let out = tokio::task::spawn_blocking(move || f(&req))
        .await
        .map_err(|e| ServiceError::Panicked(e.to_string()))?;
    let secs = start.elapsed().as_secs_f64();
    match out {
        Ok(r) => {
            tracing::info!(op, secs, "ok");
            Ok(Json(r))
        }
        Err(e) => {
            tracing::warn!(op, secs, kind = e.kind(), "{e}");
            Err(ServiceError::Core(e))
        }
    }
}
