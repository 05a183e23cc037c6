//! HTTP binding of the API.
//!
//! Authentication parameters travel as query fields (`pk`, `t`,
//! `access_token`, `op`, `nonce`), falling back to request headers of the
//! same names. Addresses, signatures and tokens are lowercase hex; `op` is
//! either the decimal bitmask or CRUD letters. `POST /nonce` issues a fresh
//! request nonce and `GET /stats` returns the gatekeeping counters.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{HeaderMap, Method as HttpMethod, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use crate::chain_client::ChainClient;
use crate::server::{ApiParams, ApiRequest, ApiResponse, Method, ResourceServer};

const PARAM_NAMES: [&str; 5] = ["pk", "t", "access_token", "op", "nonce"];

pub type SharedServer<C> = Arc<Mutex<ResourceServer<C>>>;

impl IntoResponse for ApiResponse {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.body)).into_response()
    }
}

pub fn router<C>(server: SharedServer<C>) -> Router
where
    C: ChainClient + Send + 'static,
{
    Router::new()
        .route("/ClinicalDataManagement", post(api_call::<C>))
        .route(
            "/ClinicalDataManagement/:patient_id",
            get(api_call::<C>).put(api_call::<C>).delete(api_call::<C>),
        )
        .route("/nonce", post(issue_nonce::<C>))
        .route("/stats", get(stats::<C>))
        .with_state(server)
}

async fn issue_nonce<C: ChainClient + Send + 'static>(
    State(server): State<SharedServer<C>>,
) -> Json<serde_json::Value> {
    let nonce = server.lock().expect("server lock").issue_nonce();
    Json(json!({ "nonce": nonce }))
}

async fn stats<C: ChainClient + Send + 'static>(
    State(server): State<SharedServer<C>>,
) -> Json<serde_json::Value> {
    let s = server.lock().expect("server lock");
    Json(json!({ "counters": s.counters(), "documents": s.store().len() }))
}

async fn api_call<C: ChainClient + Send + 'static>(
    State(server): State<SharedServer<C>>,
    method: HttpMethod,
    uri: Uri,
    headers: HeaderMap,
    Query(mut fields): Query<BTreeMap<String, String>>,
    body: Bytes,
) -> ApiResponse {
    for name in PARAM_NAMES {
        if !fields.contains_key(name) {
            if let Some(v) = headers.get(name).and_then(|v| v.to_str().ok()) {
                fields.insert(name.to_string(), v.to_string());
            }
        }
    }
    let method: Method = match method.as_str().parse() {
        Ok(m) => m,
        Err(e) => return ApiResponse::error(405, e),
    };
    let params = match ApiParams::from_fields(&fields) {
        Ok(p) => p,
        Err(e) => return ApiResponse::error(400, e),
    };
    let body = if body.is_empty() {
        None
    } else {
        match serde_json::from_slice(&body) {
            Ok(v) => Some(v),
            Err(e) => return ApiResponse::error(400, format!("body is not JSON: {e}")),
        }
    };
    let req = ApiRequest {
        method,
        endpoint: uri.path().to_string(),
        params,
        body,
    };
    // Validation mines a block in-process; keep it off the async workers.
    tokio::task::spawn_blocking(move || server.lock().expect("server lock").handle_api_call(&req))
        .await
        .unwrap_or_else(|e| ApiResponse::error(500, e.to_string()))
}
