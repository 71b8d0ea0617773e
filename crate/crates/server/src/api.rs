use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::rejection::{BytesRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use rand::Rng;
use serde::Serialize;
use serde_json::json;
use tabgenie_core::adapters::{Dataset, DatasetInfo};
use tabgenie_core::export::{export_example, ExportFormat};
use tabgenie_core::outputs::OutputStore;
use tabgenie_core::pipeline::{run_pipeline, PipelineError, PipelineRegistry, PipelineRequest};
use tabgenie_core::table::{Table, TableExample};
use tower_http::services::ServeDir;

use crate::session::{ExampleKey, SessionStore};

pub struct AppState {
    pub datasets: Arc<BTreeMap<String, Dataset>>,
    pub outputs: OutputStore,
    pub pipelines: PipelineRegistry,
    pub session: Arc<SessionStore>,
}

impl AppState {
    fn is_live(&self, key: &ExampleKey) -> bool {
        self.datasets
            .get(&key.dataset_id)
            .and_then(|d| d.example(&key.split, key.index))
            .is_some()
    }

    fn lookup(
        &self,
        id: &str,
        split: &str,
        index: &str,
    ) -> Result<(ExampleKey, &TableExample), ApiError> {
        let index: usize = index.parse().map_err(|_| {
            ApiError::bad_request(format!(
                "index must be a non-negative integer, got `{index}`"
            ))
        })?;
        let dataset = self.dataset(id)?;
        let split_len = dataset
            .split(split)
            .ok_or_else(|| ApiError::not_found(format!("dataset `{id}` has no split `{split}`")))?
            .len();
        let ex = dataset.example(split, index).ok_or_else(|| {
            ApiError::not_found(format!(
                "index {index} is out of range for {id}/{split} (size {split_len})"
            ))
        })?;
        Ok((ExampleKey::new(id, split, index), ex))
    }

    fn dataset(&self, id: &str) -> Result<&Dataset, ApiError> {
        self.datasets.get(id).ok_or_else(|| {
            let known: Vec<&str> = self.datasets.keys().map(String::as_str).collect();
            ApiError::not_found(format!(
                "unknown dataset `{id}`; available: [{}]",
                known.join(", ")
            ))
        })
    }
}

type Shared = Arc<AppState>;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub error: &'static str,
    pub detail: String,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &'static str, detail: impl Into<String>) -> Self {
        Self {
            status,
            error,
            detail: detail.into(),
        }
    }
    fn not_found(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", detail)
    }
    fn bad_request(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", detail)
    }
    fn internal(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "error": self.error, "detail": self.detail }));
        (self.status, body).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let detail = e.to_string();
        if e.is_upstream() {
            return Self::new(StatusCode::BAD_GATEWAY, "upstream", detail);
        }
        match e {
            PipelineError::UnknownPipeline { .. } | PipelineError::ExampleNotFound { .. } => {
                Self::not_found(detail)
            }
            PipelineError::InvalidOverride(_)
            | PipelineError::Processor { .. }
            | PipelineError::NoOutput(_) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", detail)
            }
            PipelineError::UnknownProcessor(_) | PipelineError::Conflict(_) => {
                Self::internal(detail)
            }
        }
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(
    body: Result<Bytes, BytesRejection>,
) -> Result<T, ApiError> {
    let body = body.map_err(|e| ApiError::new(e.status(), "bad_request", e.body_text()))?;
    serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

pub fn router(state: Shared, static_dir: Option<&std::path::Path>) -> Router {
    let api = Router::new()
        .route("/api/datasets", get(list_datasets))
        .route("/api/pipelines", get(list_pipelines))
        .route("/api/dataset/{id}/{split}/{index}", get(get_example))
        .route("/api/pipeline/{pid}", post(post_pipeline))
        .route("/api/export/{id}/{split}/{index}", get(get_export))
        .route("/api/note/{id}/{split}/{index}", put(put_note))
        .route(
            "/api/favorite/{id}/{split}/{index}",
            put(put_favorite).delete(delete_favorite),
        )
        .route("/api/session", get(get_session))
        .method_not_allowed_fallback(method_not_allowed);
    let app = match static_dir {
        Some(dir) => api.fallback_service(
            ServeDir::new(dir)
                .append_index_html_on_directories(true)
                .not_found_service(axum::routing::any(not_found)),
        ),
        None => api.route("/", get(index_page)).fallback(not_found),
    };
    app.with_state(state)
}

async fn not_found(uri: axum::http::Uri) -> ApiError {
    ApiError::not_found(format!("no route for {}", uri.path()))
}

async fn method_not_allowed(method: axum::http::Method, uri: axum::http::Uri) -> ApiError {
    ApiError::new(
        StatusCode::METHOD_NOT_ALLOWED,
        "method_not_allowed",
        format!("{method} is not supported on {}", uri.path()),
    )
}

async fn index_page() -> Html<&'static str> {
    Html(
        "<!doctype html><html><head><meta charset=\"utf-8\"><title>TabGenie</title></head>\
         <body><p>No web UI is configured (set <code>static_dir</code>). The JSON API is under \
         <a href=\"/api/datasets\">/api</a>.</p></body></html>",
    )
}

async fn list_datasets(State(st): State<Shared>) -> Json<Vec<DatasetInfo>> {
    Json(st.datasets.values().map(|d| d.info().clone()).collect())
}

async fn list_pipelines(State(st): State<Shared>) -> Json<serde_json::Value> {
    let list: Vec<_> = st
        .pipelines
        .iter()
        .map(|p| json!({ "id": p.id, "processors": p.processor_names(), "params": p.defaults }))
        .collect();
    Json(json!(list))
}

#[derive(Serialize)]
struct SystemOutput {
    system_id: String,
    text: String,
}

#[derive(Serialize)]
struct ExampleView<'a> {
    dataset_id: &'a str,
    split: &'a str,
    index: usize,
    split_size: usize,
    table: &'a Table,
    properties: &'a [(String, String)],
    references: &'a [String],
    outputs: Vec<SystemOutput>,
    note: Option<String>,
    favorite: bool,
}

async fn get_example(
    State(st): State<Shared>,
    Path((id, split, index)): Path<(String, String, String)>,
) -> Result<Response, ApiError> {
    if index == "random" {
        return random_example(&st, &id, &split);
    }
    let (key, ex) = st.lookup(&id, &split, &index)?;
    let session = st.session.snapshot().await;
    let outputs = st
        .outputs
        .outputs_for(&id, &split, key.index)
        .into_iter()
        .map(|(system_id, text)| SystemOutput { system_id, text })
        .collect();
    let view = ExampleView {
        dataset_id: &id,
        split: &split,
        index: key.index,
        split_size: st.datasets[&id].split(&split).map_or(0, <[_]>::len),
        table: ex.table(),
        properties: ex.table().properties(),
        references: ex.references(),
        outputs,
        note: session.notes.get(&key).cloned(),
        favorite: session.favorites.contains(&key),
    };
    Ok(Json(view).into_response())
}

/// 303 to a uniformly drawn example; the body carries the index too.
fn random_example(st: &AppState, id: &str, split: &str) -> Result<Response, ApiError> {
    let len = st
        .dataset(id)?
        .split(split)
        .ok_or_else(|| ApiError::not_found(format!("dataset `{id}` has no split `{split}`")))?
        .len();
    if len == 0 {
        return Err(ApiError::not_found(format!("{id}/{split} is empty")));
    }
    let index = rand::thread_rng().gen_range(0..len);
    let location = format!("/api/dataset/{id}/{split}/{index}");
    let mut resp = (
        StatusCode::SEE_OTHER,
        Json(json!({ "index": index, "location": location })),
    )
        .into_response();
    let value = HeaderValue::from_str(&location).map_err(|e| ApiError::internal(e.to_string()))?;
    resp.headers_mut().insert(header::LOCATION, value);
    resp.headers_mut()
        .insert(header::CACHE_CONTROL, HeaderValue::from_static("no-store"));
    Ok(resp)
}

async fn post_pipeline(
    State(st): State<Shared>,
    Path(pid): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let request: PipelineRequest = parse_json(body)?;
    if st.pipelines.get(&pid).is_none() {
        return Err(ApiError::not_found(format!(
            "unknown pipeline `{pid}`; available: [{}]",
            st.pipelines.ids().join(", ")
        )));
    }
    let started = std::time::Instant::now();
    let st2 = st.clone();
    let pid2 = pid.clone();
    let result = tokio::task::spawn_blocking(move || {
        run_pipeline(&st2.pipelines, &pid2, &request, &st2.datasets)
    })
    .await
    .map_err(|e| ApiError::internal(format!("pipeline task failed: {e}")))?;
    match result {
        Ok(out) => {
            tracing::info!(pipeline = %pid, elapsed_ms = started.elapsed().as_millis() as u64, "pipeline run");
            Ok(Json(out).into_response())
        }
        Err(e) => {
            tracing::warn!(pipeline = %pid, "pipeline failed: {e}");
            Err(e.into())
        }
    }
}

async fn get_export(
    State(st): State<Shared>,
    Path((id, split, index)): Path<(String, String, String)>,
    query: Result<Query<BTreeMap<String, String>>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(query) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let format: ExportFormat = query
        .get("format")
        .map(String::as_str)
        .unwrap_or("json")
        .parse()
        .map_err(|e: tabgenie_core::export::ExportError| ApiError::bad_request(e.to_string()))?;
    let include_properties = match query.get("properties").map(String::as_str) {
        None | Some("true") | Some("1") => true,
        Some("false") | Some("0") => false,
        Some(other) => {
            return Err(ApiError::bad_request(format!(
                "properties must be true or false, got `{other}`"
            )))
        }
    };
    let (key, ex) = st.lookup(&id, &split, &index)?;
    let bytes = export_example(ex, format, include_properties)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let filename = format!("{id}-{split}-{:06}.{}", key.index, format.extension());
    let disposition = HeaderValue::from_str(&format!("attachment; filename=\"{filename}\""))
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok((
        [
            (
                header::CONTENT_TYPE,
                HeaderValue::from_static(format.content_type()),
            ),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        Body::from(bytes),
    )
        .into_response())
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct NoteBody {
    text: String,
}

async fn put_note(
    State(st): State<Shared>,
    Path((id, split, index)): Path<(String, String, String)>,
    body: Result<Bytes, BytesRejection>,
) -> Result<StatusCode, ApiError> {
    let (key, _) = st.lookup(&id, &split, &index)?;
    let note: NoteBody = parse_json(body)?;
    st.session
        .update(|s| s.set_note(key, &note.text))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(StatusCode::NO_CONTENT)
}

async fn set_favorite(
    st: &AppState,
    id: &str,
    split: &str,
    index: &str,
    on: bool,
) -> Result<StatusCode, ApiError> {
    let (key, _) = st.lookup(id, split, index)?;
    st.session
        .update(|s| s.set_favorite(key, on))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(StatusCode::NO_CONTENT)
}

async fn put_favorite(
    State(st): State<Shared>,
    Path((id, split, index)): Path<(String, String, String)>,
) -> Result<StatusCode, ApiError> {
    set_favorite(&st, &id, &split, &index, true).await
}

async fn delete_favorite(
    State(st): State<Shared>,
    Path((id, split, index)): Path<(String, String, String)>,
) -> Result<StatusCode, ApiError> {
    set_favorite(&st, &id, &split, &index, false).await
}

async fn get_session(State(st): State<Shared>) -> Json<crate::session::SessionState> {
    let snap = st.session.snapshot().await;
    Json(snap.filtered(|k| st.is_live(k)))
}
