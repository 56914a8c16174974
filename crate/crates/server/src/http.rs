//! HTTP+JSON routes over the [`Engine`]. Errors are returned as
//! `{"error": code, "detail": text}` with a matching status code; a copy
//! rejection also carries its `f1` score.

use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Deserialize;
use serde_json::{json, Value};
use servdial_core::types::Role;

use crate::engine::{CreateSession, Engine, LocationSpec, Viewer};
use crate::error::EngineError;

impl IntoResponse for EngineError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut body = json!({ "error": self.code(), "detail": self.to_string() });
        if let EngineError::CopyRejected { f1 } = self {
            body["f1"] = json!(f1);
        }
        (status, Json(body)).into_response()
    }
}

/// JSON body, path and query extractors whose rejections use the error format above.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(EngineError))]
struct Json<T>(T);

impl<T: serde::Serialize> IntoResponse for Json<T> {
    fn into_response(self) -> Response {
        axum::Json(self.0).into_response()
    }
}

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(EngineError))]
struct Path<T>(T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(EngineError))]
struct Query<T>(T);

impl From<JsonRejection> for EngineError {
    fn from(r: JsonRejection) -> Self {
        EngineError::InvalidRequest(r.body_text())
    }
}

impl From<PathRejection> for EngineError {
    fn from(r: PathRejection) -> Self {
        EngineError::InvalidRequest(r.body_text())
    }
}

impl From<QueryRejection> for EngineError {
    fn from(r: QueryRejection) -> Self {
        EngineError::InvalidRequest(r.body_text())
    }
}

type AppState = Arc<Engine>;
type ApiResult = Result<Response, EngineError>;

/// Runs a blocking engine call off the async workers.
async fn blocking<T, F>(engine: AppState, f: F) -> Result<T, EngineError>
where
    F: FnOnce(&Engine) -> Result<T, EngineError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| EngineError::Storage(format!("worker failed: {e}")))?
}

fn ok(v: impl serde::Serialize) -> ApiResult {
    Ok(Json(v).into_response())
}

#[derive(Deserialize)]
struct ViewQuery {
    #[serde(default = "default_viewer")]
    view: Viewer,
}

fn default_viewer() -> Viewer {
    Viewer::Bot
}

#[derive(Deserialize)]
struct TextBody {
    text: String,
}

#[derive(Deserialize)]
struct QueryBody {
    query: String,
}

#[derive(Deserialize)]
struct ReplyBody {
    text: String,
    #[serde(default)]
    used_index: Option<usize>,
}

#[derive(Deserialize)]
struct RatingBody {
    rating: u8,
}

#[derive(Deserialize)]
struct JoinBody {
    participant: String,
    role: Role,
    #[serde(default)]
    topic: Option<servdial_core::TopicPath>,
    #[serde(default)]
    location: Option<LocationSpec>,
    #[serde(default)]
    time: Option<String>,
}

#[derive(Deserialize)]
struct StatusQuery {
    participant: String,
    role: Role,
}

async fn create(State(e): State<AppState>, Json(req): Json<CreateSession>) -> ApiResult {
    let v = blocking(e, move |e| e.create_session(req)).await?;
    Ok((StatusCode::CREATED, Json(v)).into_response())
}

async fn get_session(State(e): State<AppState>, Path(id): Path<String>, Query(q): Query<ViewQuery>) -> ApiResult {
    ok(blocking(e, move |e| e.get(&id, q.view)).await?)
}

async fn message(State(e): State<AppState>, Path(id): Path<String>, Json(b): Json<TextBody>) -> ApiResult {
    ok(blocking(e, move |e| e.post_user_message(&id, &b.text)).await?)
}

async fn bot_turn(State(e): State<AppState>, Path(id): Path<String>) -> ApiResult {
    ok(blocking(e, move |e| e.run_bot_turn(&id)).await?)
}

async fn wizard_query(State(e): State<AppState>, Path(id): Path<String>, Json(b): Json<QueryBody>) -> ApiResult {
    let (index, knowledge) = blocking(e, move |e| e.wizard_query(&id, &b.query)).await?;
    ok(json!({ "attempt_index": index, "knowledge": knowledge }))
}

async fn wizard_reply(State(e): State<AppState>, Path(id): Path<String>, Json(b): Json<ReplyBody>) -> ApiResult {
    ok(blocking(e, move |e| e.wizard_reply(&id, &b.text, b.used_index)).await?)
}

async fn suggestion(State(e): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = blocking(e, move |e| e.suggest(&id)).await?;
    ok(json!({ "suggestion": s }))
}

async fn rating(State(e): State<AppState>, Path(id): Path<String>, Json(b): Json<RatingBody>) -> ApiResult {
    ok(blocking(e, move |e| e.rate_session(&id, b.rating)).await?)
}

async fn join(State(e): State<AppState>, Json(b): Json<JoinBody>) -> ApiResult {
    let request = b.topic.map(|topic| CreateSession {
        id: None,
        topic,
        location: b.location,
        time: b.time,
        mode: crate::store::Mode::Collection,
    });
    ok(blocking(e, move |e| e.join_match(&b.participant, b.role, request)).await?)
}

async fn status(State(e): State<AppState>, Query(q): Query<StatusQuery>) -> ApiResult {
    ok(blocking(e, move |e| e.match_status(&q.participant, q.role)).await?)
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/message", post(message))
        .route("/sessions/{id}/bot-turn", post(bot_turn))
        .route("/sessions/{id}/wizard/query", post(wizard_query))
        .route("/sessions/{id}/wizard/reply", post(wizard_reply))
        .route("/sessions/{id}/suggestion", get(suggestion))
        .route("/sessions/{id}/rating", post(rating))
        .route("/match/join", post(join))
        .route("/match/status", get(status))
        .with_state(engine)
}

/// Serves `router` on `addr` until Ctrl-C.
pub async fn serve(engine: Arc<Engine>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
