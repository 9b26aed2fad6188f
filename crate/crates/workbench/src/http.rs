//! JSON API under `/api/v1`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parafact::table::RowStatus;
use parafact::SeedPattern;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::store::{Store, StoreError, Verdict};

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

pub struct ApiError(StatusCode, ErrorBody);

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError(status, ErrorBody { code: code.into(), message: message.into() })
    }

    fn validation(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "validation", message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let (status, code) = match &e {
            StoreError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            StoreError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            StoreError::Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation"),
            StoreError::Unavailable(_) => (StatusCode::SERVICE_UNAVAILABLE, "unavailable"),
            StoreError::Io { .. } | StoreError::Corrupt { .. } => {
                tracing::error!(error = %e, "store failure");
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::validation(format!("invalid request body: {e}")))
}

/// Mutations touch the disk; keep them off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, StoreError> + Send + 'static) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SeedInput {
    Text(String),
    Full(SeedPattern),
}

#[derive(Deserialize)]
struct NewRound {
    seeds: Vec<SeedInput>,
    threshold: f64,
}

#[derive(Deserialize)]
struct NewDecision {
    candidate_id: String,
    verdict: Verdict,
    annotator: String,
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/api/v1/rounds", post(start_round).get(list_rounds))
        .route("/api/v1/rounds/{id}", get(get_round))
        .route("/api/v1/rounds/{id}/promote", post(promote))
        .route("/api/v1/candidates", get(list_candidates))
        .route("/api/v1/candidates/{id}/concordance", get(concordance))
        .route("/api/v1/decisions", post(decide))
        .route("/api/v1/tables/accepted", get(accepted_table))
        .with_state(store)
}

async fn start_round(State(store): State<Arc<Store>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: NewRound = parse_body(&body)?;
    let seeds = req
        .seeds
        .into_iter()
        .map(|s| match s {
            SeedInput::Text(t) => t.parse::<SeedPattern>().map_err(|e| ApiError::validation(e.to_string())),
            SeedInput::Full(p) => SeedPattern::new(&p.head, &p.expansion, &p.etq, &p.objet)
                .map_err(|e| ApiError::validation(e.to_string())),
        })
        .collect::<ApiResult<Vec<_>>>()?;
    let round = blocking(move || store.start_round(seeds, req.threshold)).await?;
    Ok((StatusCode::CREATED, Json(round)))
}

async fn list_rounds(State(store): State<Arc<Store>>) -> impl IntoResponse {
    Json(store.read(|s| s.rounds()))
}

fn parse_id(raw: &str) -> ApiResult<u64> {
    raw.parse().map_err(|_| ApiError::validation(format!("invalid round id `{raw}`")))
}

async fn get_round(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let id = parse_id(&id)?;
    store
        .read(|s| s.round(id))
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("unknown round {id}")))
}

async fn list_candidates(
    State(store): State<Arc<Store>>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<impl IntoResponse> {
    let status = match q.get("status").map(String::as_str) {
        None | Some("") | Some("all") => None,
        Some(s) => Some(s.parse::<RowStatus>().map_err(ApiError::validation)?),
    };
    let round = q.get("round").filter(|r| !r.is_empty()).map(|r| parse_id(r)).transpose()?;
    Ok(Json(store.read(|s| s.candidates(status, round))))
}

async fn concordance(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<impl IntoResponse> {
    let k = match q.get("k") {
        None => 10,
        Some(k) => k.parse::<usize>().map_err(|_| ApiError::validation(format!("invalid k `{k}`")))?,
    };
    Ok(Json(store.concordance(&id, k)?))
}

async fn decide(State(store): State<Arc<Store>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: NewDecision = parse_body(&body)?;
    let c = blocking(move || store.record_decision(&req.candidate_id, req.verdict, &req.annotator)).await?;
    Ok(Json(c))
}

async fn promote(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let id = parse_id(&id)?;
    Ok(Json(blocking(move || store.promote(id)).await?))
}

async fn accepted_table(State(store): State<Arc<Store>>) -> impl IntoResponse {
    let tsv = store.read(|s| s.accepted_table().to_tsv());
    ([(header::CONTENT_TYPE, "text/tab-separated-values; charset=utf-8")], tsv)
}
