//! JSON routes over [`SessionService`].

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::net::TcpListener;

use crate::model::DashboardCell;
use crate::service::{QueryInput, SessionService};
use crate::ServiceError;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status =
            StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut body = json!({ "error_code": self.code(), "message": self.to_string() });
        if let Some(p) = self.position() {
            body["position"] = json!(p);
        }
        (status, Json(body)).into_response()
    }
}

type Shared = Arc<SessionService>;
type Reply<T> = Result<Json<T>, ServiceError>;

async fn blocking<T, F>(service: Shared, f: F) -> Reply<T>
where
    T: Send + 'static,
    F: FnOnce(&SessionService) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&service))
        .await
        .map_err(|e| ServiceError::Storage(format!("worker failed: {e}")))?
        .map(Json)
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::BadRequest(e.body_text()))
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    database_id: String,
}

#[derive(Debug, Deserialize)]
struct SaveDashboard {
    session_id: String,
    cells: Vec<DashboardCell>,
}

#[derive(Debug, Serialize)]
struct Databases {
    databases: Vec<crate::service::DatabaseSummary>,
}

async fn list_databases(State(s): State<Shared>) -> Reply<Databases> {
    Ok(Json(Databases {
        databases: s.databases(),
    }))
}

async fn create_session(
    State(s): State<Shared>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Response {
    let req = match body(payload) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    match blocking(s, move |s| s.create_session(&req.database_id)).await {
        Ok(created) => (StatusCode::CREATED, created).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn submit_query(
    State(s): State<Shared>,
    Path(id): Path<String>,
    payload: Result<Json<QueryInput>, JsonRejection>,
) -> Reply<crate::service::Submitted> {
    let input = body(payload)?;
    blocking(s, move |s| s.submit_query(&id, &input)).await
}

async fn recommendations(
    State(s): State<Shared>,
    Path(id): Path<String>,
) -> Reply<qrec_core::recommender::RecommendationSet> {
    blocking(s, move |s| s.recommendations(&id)).await
}

async fn history(
    State(s): State<Shared>,
    Path(id): Path<String>,
) -> Reply<Vec<crate::HistoryEntry>> {
    blocking(s, move |s| s.history(&id)).await
}

async fn history_entry(
    State(s): State<Shared>,
    Path((id, index)): Path<(String, usize)>,
) -> Reply<crate::HistoryEntry> {
    blocking(s, move |s| s.restore(&id, index)).await
}

async fn save_dashboard(
    State(s): State<Shared>,
    payload: Result<Json<SaveDashboard>, JsonRejection>,
) -> Response {
    let req = match body(payload) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    match blocking(s, move |s| s.save_dashboard(&req.session_id, req.cells)).await {
        Ok(d) => (StatusCode::CREATED, d).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn load_dashboard(
    State(s): State<Shared>,
    Path(id): Path<String>,
) -> Reply<crate::Dashboard> {
    blocking(s, move |s| s.load_dashboard(&id)).await
}

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/databases", get(list_databases))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/queries", post(submit_query))
        .route("/sessions/{id}/recommendations", get(recommendations))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/history/{index}", get(history_entry))
        .route("/dashboards", post(save_dashboard))
        .route("/dashboards/{id}", get(load_dashboard))
        .with_state(service)
}

/// Serves until the listener fails or the process ends.
pub async fn serve(listener: TcpListener, service: Shared) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}
