//! REST facade over the [`Store`].

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use kbqa_core::active::{ActiveError, Decision, FeedbackRecord};
use kbqa_core::engine::EngineError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::io::{self, DataError};
use crate::store::{AnswerRequest, CreateKb, KbPatch, Store, StoreError};

pub const EXPECTED_REVISION: &str = "expected-revision";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    pub details: Vec<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.into(),
            message: message.into(),
            details: Vec::new(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "badRequest", message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        use StatusCode as S;
        let msg = e.to_string();
        match e {
            StoreError::UnknownKb(_) => Self::new(S::NOT_FOUND, "notFound", msg),
            StoreError::Conflict { .. } => Self::new(S::CONFLICT, "revisionConflict", msg),
            StoreError::DuplicateName(_) | StoreError::DuplicateId(_) => Self::new(S::CONFLICT, "duplicate", msg),
            StoreError::BadRequest(_) => Self::new(S::BAD_REQUEST, "badRequest", msg),
            StoreError::Invalid(v) => Self {
                details: v,
                ..Self::new(S::UNPROCESSABLE_ENTITY, "validationFailed", msg)
            },
            StoreError::Extract(x) => Self {
                details: vec![x.to_string()],
                ..Self::new(S::UNPROCESSABLE_ENTITY, "extractionFailed", "a source could not be extracted")
            },
            StoreError::Engine(
                EngineError::BadContext(_) | EngineError::BadTop { .. } | EngineError::BadThreshold(_) | EngineError::Text(_),
            ) => Self::new(S::BAD_REQUEST, "badQuery", msg),
            StoreError::Engine(_) => Self::new(S::INTERNAL_SERVER_ERROR, "internal", msg),
            StoreError::Active(ActiveError::UnknownSuggestion(_)) => Self::new(S::NOT_FOUND, "notFound", msg),
            StoreError::Active(_) => Self::new(S::CONFLICT, "suggestionConflict", msg),
            StoreError::Data(DataError::Invalid(v)) => Self {
                details: v,
                ..Self::new(S::UNPROCESSABLE_ENTITY, "validationFailed", "invalid knowledge base")
            },
            StoreError::Data(_) => Self::new(S::BAD_REQUEST, "badRequest", msg),
            StoreError::Io { .. } => Self::new(S::INTERNAL_SERVER_ERROR, "internal", msg),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

fn expected_revision(headers: &HeaderMap) -> ApiResult<Option<u64>> {
    headers
        .get(EXPECTED_REVISION)
        .map(|v| {
            v.to_str()
                .ok()
                .and_then(|s| s.trim().trim_matches('"').parse().ok())
                .ok_or_else(|| ApiError::bad_request(format!("{EXPECTED_REVISION} must be an integer")))
        })
        .transpose()
}

/// Runs blocking store work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, StoreError> + Send + 'static) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())),
    }
}

type Shared = State<Arc<Store>>;

async fn create_kb(State(s): Shared, b: Bytes) -> ApiResult<impl IntoResponse> {
    let req: CreateKb = body(&b)?;
    let created = blocking(move || s.create(req)).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn list_kbs(State(s): Shared) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "kbs": s.list() }))
}

async fn get_kb(State(s): Shared, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.get(&id)?))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RevisionBody {
    kb_id: String,
    revision: u64,
}

async fn patch_kb(State(s): Shared, Path(id): Path<String>, h: HeaderMap, b: Bytes) -> ApiResult<impl IntoResponse> {
    let patch: KbPatch = body(&b)?;
    let expected = expected_revision(&h)?;
    let kb_id = id.clone();
    let state = blocking(move || s.update(&id, expected, patch)).await?;
    Ok(Json(RevisionBody {
        kb_id,
        revision: state.revision,
    }))
}

async fn delete_kb(State(s): Shared, Path(id): Path<String>, h: HeaderMap) -> ApiResult<impl IntoResponse> {
    let expected = expected_revision(&h)?;
    blocking(move || s.delete(&id, expected)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn generate_answer(State(s): Shared, Path(id): Path<String>, b: Bytes) -> ApiResult<impl IntoResponse> {
    let req: AnswerRequest = body(&b)?;
    Ok(Json(blocking(move || s.answer(&id, &req)).await?))
}

async fn feedback(State(s): Shared, Path(id): Path<String>, b: Bytes) -> ApiResult<impl IntoResponse> {
    let rec: FeedbackRecord = body(&b)?;
    let sug = blocking(move || s.feedback(&id, rec)).await?;
    Ok(Json(serde_json::json!({ "suggestion": sug })))
}

async fn list_suggestions(State(s): Shared, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let list = blocking(move || s.suggestions(&id)).await?;
    Ok(Json(serde_json::json!({ "suggestions": list })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResolveBody {
    decision: Decision,
}

async fn resolve_suggestion(
    State(s): Shared,
    Path((id, action)): Path<(String, String)>,
    b: Bytes,
) -> ApiResult<impl IntoResponse> {
    let Some(sid) = action.strip_suffix(":resolve").map(str::to_string) else {
        return Err(ApiError::new(StatusCode::NOT_FOUND, "notFound", format!("no route for {action}")));
    };
    let req: ResolveBody = body(&b)?;
    Ok(Json(blocking(move || s.resolve(&id, &sid, req.decision)).await?))
}

async fn export_kb(State(s): Shared, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    let bytes = s.export(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/json; charset=utf-8")], bytes.as_str().to_owned()))
}

async fn import_kb(State(s): Shared, b: Bytes) -> ApiResult<impl IntoResponse> {
    let text = std::str::from_utf8(&b).map_err(|_| ApiError::bad_request("body is not UTF-8"))?;
    let file = io::parse_kb(text).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let created = blocking(move || s.import(file)).await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "notFound", "no such route")
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/kbs", post(create_kb).get(list_kbs))
        .route("/kbs:import", post(import_kb))
        .route("/kbs/{id}", get(get_kb).patch(patch_kb).delete(delete_kb))
        .route("/kbs/{id}/generateAnswer", post(generate_answer))
        .route("/kbs/{id}/feedback", post(feedback))
        .route("/kbs/{id}/suggestions", get(list_suggestions))
        .route("/kbs/{id}/suggestions/{action}", post(resolve_suggestion))
        .route("/kbs/{id}/export", get(export_kb))
        .fallback(fallback)
        .with_state(store)
}

/// Serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    config.validate()?;
    let engine = config.engine()?;
    let store = Arc::new(Store::open(&config.data_directory, engine)?);
    let listener = tokio::net::TcpListener::bind(&config.listen_address).await?;
    tracing::info!(address = %listener.local_addr()?, data = %config.data_directory.display(), "listening");
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
