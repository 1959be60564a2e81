//! JSON over HTTP under `/api/v1`. Handlers run the synchronous service on
//! the blocking pool.

use std::sync::Arc;

use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::{ExportFormat, ProjectService, ServiceError};
use crate::corpus::{IndexSet, OutcomeRef, RiskRef};
use crate::recommend::{MetricRecommendation, ProjectInputs};

/// Error body: `{code, message, stage?}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
}

fn status_of(e: &ServiceError) -> StatusCode {
    match e {
        ServiceError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
        ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
        ServiceError::UnknownMetric(_) | ServiceError::UnknownOutcome(_) | ServiceError::UnknownRisk(_) => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        ServiceError::EmptyCart => StatusCode::CONFLICT,
        ServiceError::Pipeline(_) => StatusCode::BAD_GATEWAY,
        ServiceError::Storage(_) | ServiceError::Startup(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ApiError {
            code: self.code().to_string(),
            message: self.to_string(),
            stage: self.stage(),
        };
        (status_of(&self), Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;

async fn blocking<T: Send + 'static>(
    svc: Arc<ProjectService>,
    f: impl FnOnce(&ProjectService) -> ApiResult<T> + Send + 'static,
) -> ApiResult<T> {
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ServiceError::Startup(format!("worker failed: {e}")))?
}

/// JSON body whose rejections use the API error shape.
struct Body<T>(T);

impl<S: Send + Sync, T: serde::de::DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ServiceError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| Body(v))
            .map_err(|e| ServiceError::Validation(e.body_text()))
    }
}

/// Query string whose rejections use the API error shape.
struct Query<T>(T);

impl<S: Send + Sync, T: serde::de::DeserializeOwned> FromRequestParts<S> for Query<T> {
    type Rejection = ServiceError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|axum::extract::Query(v)| Query(v))
            .map_err(|e| ServiceError::Validation(e.body_text()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsResponse {
    pub recommendation: Option<MetricRecommendation>,
    pub cart: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectOutcome {
    pub outcome: OutcomeRef,
    #[serde(default = "yes")]
    pub selected: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AcceptRisk {
    pub risk: RiskRef,
    #[serde(default = "yes")]
    pub accepted: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
pub struct ExportQuery {
    #[serde(default = "json_format")]
    pub format: ExportFormat,
}

fn json_format() -> ExportFormat {
    ExportFormat::Json
}

pub fn router(svc: Arc<ProjectService>) -> Router {
    let project = "/api/v1/projects/{id}";
    Router::new()
        .route("/api/v1/projects", post(create).get(list))
        .route(project, get(show))
        .route(&format!("{project}/indexes"), put(update_indexes))
        .route(&format!("{project}/regenerate"), post(regenerate))
        .route(&format!("{project}/metrics"), get(metrics))
        .route(&format!("{project}/metrics/graphview"), get(graphview))
        .route(&format!("{project}/cart/{{metric}}"), post(cart_add).delete(cart_remove))
        .route(&format!("{project}/outcomes"), get(outcomes))
        .route(&format!("{project}/outcomes/select"), post(select_outcome))
        .route(&format!("{project}/risks"), get(risks))
        .route(&format!("{project}/risks/accept"), post(accept_risk))
        .route(&format!("{project}/generate"), post(generate))
        .route(&format!("{project}/export"), get(export))
        .with_state(svc)
}

type Svc = State<Arc<ProjectService>>;

async fn create(State(svc): Svc, Body(inputs): Body<ProjectInputs>) -> ApiResult<impl IntoResponse> {
    let s = blocking(svc, move |svc| svc.create(inputs)).await?;
    Ok((StatusCode::CREATED, Json(s)))
}

async fn list(State(svc): Svc) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, |svc| svc.list()).await?))
}

async fn show(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |svc| svc.get(&id)).await?))
}

async fn update_indexes(
    State(svc): Svc,
    Path(id): Path<String>,
    Body(indexes): Body<IndexSet>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |svc| svc.regenerate(&id, Some(indexes))).await?))
}

async fn regenerate(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |svc| svc.regenerate(&id, None)).await?))
}

async fn metrics(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let s = blocking(svc, move |svc| svc.get(&id)).await?;
    Ok(Json(MetricsResponse {
        recommendation: s.current_recommendation,
        cart: s.cart.into_iter().collect(),
    }))
}

async fn graphview(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |svc| svc.metric_graph_view(&id)).await?))
}

async fn cart_add(State(svc): Svc, Path((id, metric)): Path<(String, String)>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |svc| svc.cart_add(&id, &metric)).await?))
}

async fn cart_remove(State(svc): Svc, Path((id, metric)): Path<(String, String)>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |svc| svc.cart_remove(&id, &metric)).await?))
}

async fn outcomes(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |svc| svc.outcomes(&id)).await?))
}

async fn select_outcome(
    State(svc): Svc,
    Path(id): Path<String>,
    Body(req): Body<SelectOutcome>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(
        blocking(svc, move |svc| svc.select_outcome(&id, &req.outcome, req.selected)).await?,
    ))
}

async fn risks(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |svc| svc.risks(&id)).await?))
}

async fn accept_risk(
    State(svc): Svc,
    Path(id): Path<String>,
    Body(req): Body<AcceptRisk>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(svc, move |svc| svc.accept_risk(&id, &req.risk, req.accepted)).await?))
}

async fn generate(State(svc): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let (generated, _) = blocking(svc, move |svc| svc.generate(&id)).await?;
    Ok(Json(generated))
}

async fn export(
    State(svc): Svc,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<impl IntoResponse> {
    let format = q.format;
    let body = blocking(svc, move |svc| svc.export(&id, format)).await?;
    let content_type = match format {
        ExportFormat::Json => "application/json",
        ExportFormat::Markdown => "text/markdown; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, content_type)], body))
}

/// Binds `addr`, prints `listening on <addr>` to stdout, and serves until
/// ctrl-c.
pub async fn serve(svc: Arc<ProjectService>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    println!("listening on {}", listener.local_addr()?);
    use std::io::Write;
    std::io::stdout().flush()?;
    axum::serve(listener, router(svc))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
