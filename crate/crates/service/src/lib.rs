//! HTTP/JSON API over a [`Workbench`].
//!
//! Every handler delegates to the same workbench method the CLI uses, so
//! the response bodies are the serialized workbench results. Blocking work
//! (embedding, training, LLM calls) runs on the blocking pool.

mod error;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sciex_core::classifier::{Category, LabelRecord};
use sciex_core::corpus::{LibraryId, ModelId, PaperId, ParagraphId, RetrievalId};
use sciex_core::retrieval::{Polarity, RetrievalDraft};
use sciex_core::workbench::{
    ExportRequest, LabelRequest, Page, PredictRequest, QueryRequest, SearchMode, TrainRequest,
    TrainResponse, Upload, DEFAULT_TEST_FRACTION,
};
use sciex_core::{Config, Weights, Workbench};

pub use error::{status_for, ApiError};

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Running,
    Succeeded,
    Failed,
}

/// A background training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub status: JobStatus,
    pub result: Option<TrainResponse>,
    pub error: Option<ApiError>,
}

#[derive(Clone)]
struct AppState {
    workbench: Arc<Workbench>,
    jobs: Arc<Mutex<HashMap<String, Job>>>,
    token: Option<String>,
}

/// Runs `f` against the workbench on the blocking pool.
async fn blocking<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Workbench) -> sciex_core::Result<T> + Send + 'static,
{
    let wb = state.workbench.clone();
    tokio::task::spawn_blocking(move || f(&wb))
        .await
        .map_err(|e| ApiError::internal(format!("worker panicked: {e}")))?
        .map_err(ApiError::from)
}

fn json_body<T>(body: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    body.map(|Json(v)| v)
        .map_err(|e| ApiError::bad_request("invalid_json", e.body_text()))
}

fn query_params<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(v)| v)
        .map_err(|e| ApiError::bad_request("invalid_query", e.body_text()))
}

fn parse_json<T: DeserializeOwned>(bytes: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request("invalid_json", e.to_string()))
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok && req.uri().path() != "/health" {
            return ApiError::unauthorized().into_response();
        }
    }
    next.run(req).await
}

/// Builds the API router. When `token` is set every route except
/// `/health` requires `Authorization: Bearer <token>`.
pub fn router(workbench: Arc<Workbench>, token: Option<String>) -> Router {
    let state = AppState {
        workbench,
        jobs: Arc::default(),
        token,
    };
    Router::new()
        .route("/health", get(health))
        .route("/libraries", post(create_library).get(list_libraries))
        .route("/libraries/{id}/papers", get(list_papers).post(upload_paper))
        .route("/papers/{id}", get(get_paper))
        .route("/papers/{id}/search", get(search_paper))
        .route("/paragraphs/{id}", get(get_paragraph).patch(correct_paragraph))
        .route("/retrievals", post(create_retrieval).get(list_retrievals))
        .route("/retrievals/defaults", post(import_defaults))
        .route("/retrievals/{id}", get(get_retrieval))
        .route("/retrievals/{id}/labels", post(label_paragraph))
        .route("/retrievals/{id}/queries", post(add_query))
        .route("/retrievals/{id}/weights", put(set_weights))
        .route("/retrievals/{id}/rank", get(rank))
        .route("/labels", post(set_label).get(list_labels))
        .route("/query", post(answer))
        .route("/datasets/export", get(export_dataset))
        .route("/classifier/train", post(train))
        .route("/classifier/report", get(report))
        .route("/classifier/predict", post(predict))
        .route("/jobs/{id}", get(get_job))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Opens the workspace named in `config` and serves until ctrl-c.
pub async fn serve(config: Config) -> anyhow::Result<()> {
    let workbench = {
        let config = config.clone();
        tokio::task::spawn_blocking(move || Workbench::open(&config)).await??
    };
    let addr: SocketAddr = format!("{}:{}", config.server.host, config.server.port)
        .parse()
        .map_err(|e| sciex_core::Error::Config(format!("bad listen address: {e}")))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(workbench), config.server.token))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    provider_id: String,
    model_id: String,
    dim: usize,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    let p = state.workbench.provenance();
    Json(Health {
        status: "ok",
        provider_id: p.provider_id,
        model_id: p.model_id,
        dim: p.dim,
    })
}

#[derive(Deserialize)]
struct NameBody {
    name: String,
}

async fn create_library(
    State(state): State<AppState>,
    body: Result<Json<NameBody>, JsonRejection>,
) -> ApiResult<Response> {
    let NameBody { name } = json_body(body)?;
    let lib = blocking(&state, move |wb| wb.create_library(&name)).await?;
    Ok((StatusCode::CREATED, Json(lib)).into_response())
}

async fn list_libraries(
    State(state): State<AppState>,
    page: Result<Query<Page>, QueryRejection>,
) -> ApiResult<Response> {
    let page = query_params(page)?;
    Ok(Json(state.workbench.list_libraries(page)).into_response())
}

async fn list_papers(
    State(state): State<AppState>,
    Path(id): Path<String>,
    page: Result<Query<Page>, QueryRejection>,
) -> ApiResult<Response> {
    let page = query_params(page)?;
    let papers = state.workbench.list_papers(&LibraryId::from(id), page)?;
    Ok(Json(papers).into_response())
}

#[derive(Deserialize)]
struct UploadParams {
    format: Option<String>,
    title: Option<String>,
    original_uri: Option<String>,
}

/// Accepts a JSON [`Upload`] or a raw body. Raw XML bodies are TEI, other
/// raw bodies are plain text unless `?format=` says otherwise.
async fn upload_paper(
    State(state): State<AppState>,
    Path(id): Path<String>,
    params: Result<Query<UploadParams>, QueryRejection>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let params = query_params(params)?;
    let content_type = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("");
    let upload = if content_type.starts_with("application/json") {
        parse_json::<Upload>(&body)?
    } else {
        let content = String::from_utf8(body.to_vec())
            .map_err(|_| ApiError::bad_request("invalid_body", "body is not UTF-8"))?;
        let tei = match params.format.as_deref() {
            Some("tei") => true,
            Some("text") => false,
            Some(other) => {
                return Err(ApiError::bad_request(
                    "invalid_query",
                    format!("unknown format `{other}` (tei, text)"),
                ))
            }
            None => content_type.contains("xml"),
        };
        if tei {
            Upload::Tei {
                content,
                original_uri: params.original_uri,
            }
        } else {
            Upload::Text {
                title: params.title.unwrap_or_default(),
                content,
                original_uri: params.original_uri,
            }
        }
    };
    let lib = LibraryId::from(id);
    let out = blocking(&state, move |wb| wb.ingest(&lib, upload)).await?;
    let status = if out.created {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    Ok((status, Json(out)).into_response())
}

async fn get_paper(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(state.workbench.get_paper(&PaperId::from(id))?).into_response())
}

#[derive(Deserialize)]
struct SearchParams {
    #[serde(default)]
    mode: Option<String>,
    q: String,
    #[serde(default)]
    k: Option<usize>,
    #[serde(default)]
    case_sensitive: bool,
}

async fn search_paper(
    State(state): State<AppState>,
    Path(id): Path<String>,
    params: Result<Query<SearchParams>, QueryRejection>,
) -> ApiResult<Response> {
    let p = query_params(params)?;
    let mode: SearchMode = p.mode.as_deref().unwrap_or("text").parse()?;
    let out = blocking(&state, move |wb| {
        let scope = wb.resolve_scope(&id)?;
        wb.search(
            &scope,
            mode,
            &p.q,
            p.k.unwrap_or(sciex_core::retrieval::DEFAULT_K),
            p.case_sensitive,
        )
    })
    .await?;
    Ok(Json(out).into_response())
}

async fn get_paragraph(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(state.workbench.get_paragraph(&ParagraphId::from(id))?).into_response())
}

#[derive(Deserialize)]
struct TextBody {
    text: String,
}

async fn correct_paragraph(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<TextBody>, JsonRejection>,
) -> ApiResult<Response> {
    let TextBody { text } = json_body(body)?;
    let out = blocking(&state, move |wb| wb.correct_paragraph(&ParagraphId::from(id), &text)).await?;
    Ok(Json(out).into_response())
}

async fn create_retrieval(
    State(state): State<AppState>,
    body: Result<Json<RetrievalDraft>, JsonRejection>,
) -> ApiResult<Response> {
    let draft = json_body(body)?;
    let spec = blocking(&state, move |wb| wb.create_retrieval(draft)).await?;
    Ok((StatusCode::CREATED, Json(spec)).into_response())
}

async fn list_retrievals(
    State(state): State<AppState>,
    page: Result<Query<Page>, QueryRejection>,
) -> ApiResult<Response> {
    let page = query_params(page)?;
    Ok(Json(state.workbench.list_retrievals(page)).into_response())
}

async fn import_defaults(State(state): State<AppState>) -> ApiResult<Response> {
    let specs = blocking(&state, |wb| wb.import_defaults()).await?;
    Ok(Json(specs).into_response())
}

async fn get_retrieval(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(state.workbench.get_retrieval(&RetrievalId::from(id))?).into_response())
}

async fn label_paragraph(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<LabelRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let LabelRequest {
        paragraph_id,
        polarity,
    } = json_body(body)?;
    let spec = blocking(&state, move |wb| {
        wb.label_paragraph(&RetrievalId::from(id), &paragraph_id, polarity)
    })
    .await?;
    Ok(Json(spec).into_response())
}

#[derive(Deserialize)]
struct QueryBody {
    query: String,
    #[serde(default = "positive")]
    polarity: Polarity,
}

fn positive() -> Polarity {
    Polarity::Positive
}

async fn add_query(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<QueryBody>, JsonRejection>,
) -> ApiResult<Response> {
    let QueryBody { query, polarity } = json_body(body)?;
    let positive = match polarity {
        Polarity::Positive => true,
        Polarity::Negative => false,
        Polarity::Clear => {
            return Err(ApiError::bad_request(
                "invalid_argument",
                "query polarity must be positive or negative",
            ))
        }
    };
    let spec = blocking(&state, move |wb| wb.add_query(&RetrievalId::from(id), &query, positive)).await?;
    Ok(Json(spec).into_response())
}

async fn set_weights(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Weights>, JsonRejection>,
) -> ApiResult<Response> {
    let weights = json_body(body)?;
    let spec = blocking(&state, move |wb| wb.set_weights(&RetrievalId::from(id), weights)).await?;
    Ok(Json(spec).into_response())
}

#[derive(Deserialize)]
struct RankParams {
    scope: String,
    #[serde(default)]
    k: Option<usize>,
}

async fn rank(
    State(state): State<AppState>,
    Path(id): Path<String>,
    params: Result<Query<RankParams>, QueryRejection>,
) -> ApiResult<Response> {
    let p = query_params(params)?;
    let hits = blocking(&state, move |wb| {
        let scope = wb.resolve_scope(&p.scope)?;
        wb.rank(
            &RetrievalId::from(id),
            &scope,
            p.k.unwrap_or(sciex_core::retrieval::DEFAULT_K),
        )
    })
    .await?;
    Ok(Json(hits).into_response())
}

#[derive(Deserialize)]
struct LabelBody {
    paragraph_id: ParagraphId,
    #[serde(default)]
    labels: Vec<Category>,
    #[serde(default)]
    irrelevant: bool,
}

async fn set_label(
    State(state): State<AppState>,
    body: Result<Json<LabelBody>, JsonRejection>,
) -> ApiResult<Response> {
    let b = json_body(body)?;
    let record = LabelRecord::new(b.paragraph_id, b.labels, b.irrelevant)?;
    let out = blocking(&state, move |wb| wb.set_label(record)).await?;
    Ok(Json(out).into_response())
}

async fn list_labels(State(state): State<AppState>) -> Json<Vec<LabelRecord>> {
    Json(state.workbench.labels())
}

async fn answer(
    State(state): State<AppState>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let req = json_body(body)?;
    let out = blocking(&state, move |wb| wb.answer(&req)).await?;
    Ok(Json(out).into_response())
}

#[derive(Deserialize)]
struct ExportParams {
    library: LibraryId,
    #[serde(default)]
    include_irrelevant: bool,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    test_fraction: Option<f64>,
    #[serde(default)]
    with_embeddings: bool,
}

async fn export_dataset(
    State(state): State<AppState>,
    params: Result<Query<ExportParams>, QueryRejection>,
) -> ApiResult<Response> {
    let p = query_params(params)?;
    let req = ExportRequest {
        library: p.library,
        include_irrelevant: p.include_irrelevant,
        seed: p.seed,
        test_fraction: p.test_fraction.unwrap_or(DEFAULT_TEST_FRACTION),
        with_embeddings: p.with_embeddings,
    };
    let out = blocking(&state, move |wb| wb.export_dataset(&req)).await?;
    Ok(Json(out).into_response())
}

#[derive(Deserialize)]
struct TrainParams {
    #[serde(default)]
    sync: bool,
}

/// Trains synchronously with `?sync=true`; otherwise returns `202` with a
/// job to poll at `/jobs/{id}`.
async fn train(
    State(state): State<AppState>,
    params: Result<Query<TrainParams>, QueryRejection>,
    body: Result<Json<TrainRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let params = query_params(params)?;
    let req = json_body(body)?;
    if params.sync {
        let out = blocking(&state, move |wb| wb.train(req)).await?;
        return Ok(Json(out).into_response());
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    let job = Job {
        id: id.clone(),
        status: JobStatus::Running,
        result: None,
        error: None,
    };
    state.jobs.lock().expect("jobs lock").insert(id.clone(), job.clone());
    let bg = state.clone();
    tokio::spawn(async move {
        let outcome = blocking(&bg, move |wb| wb.train(req)).await;
        let mut jobs = bg.jobs.lock().expect("jobs lock");
        if let Some(job) = jobs.get_mut(&id) {
            match outcome {
                Ok(r) => {
                    job.status = JobStatus::Succeeded;
                    job.result = Some(r);
                }
                Err(e) => {
                    log::warn!("training job {id} failed: {}", e.message);
                    job.status = JobStatus::Failed;
                    job.error = Some(e);
                }
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let jobs = state.jobs.lock().expect("jobs lock");
    match jobs.get(&id) {
        Some(job) => Ok(Json(job.clone()).into_response()),
        None => Err(sciex_core::Error::NotFound { kind: "job", id }.into()),
    }
}

#[derive(Deserialize)]
struct ModelParams {
    #[serde(default)]
    model: Option<ModelId>,
}

async fn report(
    State(state): State<AppState>,
    params: Result<Query<ModelParams>, QueryRejection>,
) -> ApiResult<Response> {
    let p = query_params(params)?;
    Ok(Json(state.workbench.report(p.model.as_ref())?).into_response())
}

async fn predict(
    State(state): State<AppState>,
    body: Result<Json<PredictRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let req = json_body(body)?;
    let out = blocking(&state, move |wb| wb.predict(&req)).await?;
    Ok(Json(out).into_response())
}
