//! HTTP service: translation tasks run asynchronously on a bounded worker
//! pool; completed results are appended to the history file before the task
//! becomes visible as finished.

use crate::history::{HistoryRecord, HistoryStore};
use crate::runtime::Runtime;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use sqlbridge_core::engine::{
    TranslationMode, TranslationResult, TranslationStatus, TranslationTask,
};
use sqlbridge_core::Dialect;
use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Arc;
use tokio::sync::{Mutex, RwLock, Semaphore};

pub const DEFAULT_WORKERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiStatus {
    Pending,
    Running,
    Success,
    Failure,
}

struct TaskEntry {
    task: TranslationTask,
    status: ApiStatus,
    result: Option<TranslationResult>,
}

pub struct ServiceState {
    runtime: Arc<Runtime>,
    tasks: RwLock<HashMap<String, TaskEntry>>,
    history: Mutex<HistoryStore>,
    workers: Arc<Semaphore>,
}

pub type AppState = Arc<ServiceState>;

pub fn app(runtime: Arc<Runtime>) -> Router {
    let history = HistoryStore::new(runtime.config.history_path.clone());
    let state: AppState = Arc::new(ServiceState {
        runtime,
        tasks: RwLock::new(HashMap::new()),
        history: Mutex::new(history),
        workers: Arc::new(Semaphore::new(DEFAULT_WORKERS)),
    });
    Router::new()
        .route("/translate", post(post_translate))
        .route("/tasks/:id", get(get_task))
        .route("/history", get(get_history))
        .with_state(state)
}

#[derive(Debug, Deserialize)]
struct TranslateBody {
    sql: String,
    from: String,
    to: String,
    mode: Option<String>,
    max_trials: Option<u32>,
}

#[derive(Debug, Serialize)]
struct TranslateAccepted {
    task_id: String,
}

enum ApiError {
    Unprocessable(String),
    NotFound,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        match self {
            ApiError::Unprocessable(msg) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                Json(serde_json::json!({ "error": msg })),
            )
                .into_response(),
            ApiError::NotFound => (
                StatusCode::NOT_FOUND,
                Json(serde_json::json!({ "error": "unknown task id" })),
            )
                .into_response(),
        }
    }
}

async fn post_translate(
    State(state): State<AppState>,
    Json(body): Json<TranslateBody>,
) -> Result<Json<TranslateAccepted>, ApiError> {
    let from = Dialect::from_str(&body.from)
        .map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    let to = Dialect::from_str(&body.to).map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    let mode = match &body.mode {
        Some(m) => {
            TranslationMode::from_str(m).map_err(|e| ApiError::Unprocessable(e.to_string()))?
        }
        None => state.runtime.config.default_mode,
    };
    let max_trials = body.max_trials.unwrap_or(state.runtime.config.max_trials);
    let task_id = uuid::Uuid::new_v4().to_string();
    let task = TranslationTask::new(task_id.clone(), body.sql, from, to, mode, max_trials)
        .map_err(|e| ApiError::Unprocessable(e.to_string()))?;

    state.tasks.write().await.insert(
        task_id.clone(),
        TaskEntry { task: task.clone(), status: ApiStatus::Pending, result: None },
    );
    tokio::spawn(run_task(state.clone(), task));
    Ok(Json(TranslateAccepted { task_id }))
}

async fn run_task(state: AppState, task: TranslationTask) {
    let _permit = state
        .workers
        .clone()
        .acquire_owned()
        .await
        .expect("worker semaphore never closes");
    {
        let mut tasks = state.tasks.write().await;
        if let Some(entry) = tasks.get_mut(&task.id) {
            entry.status = ApiStatus::Running;
        }
    }
    let runtime = state.runtime.clone();
    let run_for = task.clone();
    let outcome = tokio::task::spawn_blocking(move || runtime.run(&run_for)).await;
    let result = match outcome {
        Ok(Ok(result)) => result,
        Ok(Err(e)) => TranslationResult {
            task_id: task.id.clone(),
            translated_sql: None,
            status: TranslationStatus::Failure,
            trace: {
                let mut t = sqlbridge_core::engine::TranslationTrace::default();
                t.push(None, sqlbridge_core::engine::TraceAction::ParserReject, e.to_string(), 0);
                t
            },
        },
        Err(join_err) => TranslationResult {
            task_id: task.id.clone(),
            translated_sql: None,
            status: TranslationStatus::Failure,
            trace: {
                let mut t = sqlbridge_core::engine::TranslationTrace::default();
                t.push(
                    None,
                    sqlbridge_core::engine::TraceAction::ParserReject,
                    format!("worker failed: {join_err}"),
                    0,
                );
                t
            },
        },
    };
    // the history append happens before the task becomes visible as finished
    let record = HistoryRecord {
        task: task.clone(),
        status: result.status,
        translated_sql: result.translated_sql.clone(),
        finished_at: Utc::now(),
    };
    {
        let history = state.history.lock().await;
        if let Err(e) = history.append(&record) {
            eprintln!("history append failed: {e}");
        }
    }
    let mut tasks = state.tasks.write().await;
    if let Some(entry) = tasks.get_mut(&task.id) {
        entry.status = match result.status {
            TranslationStatus::Success => ApiStatus::Success,
            TranslationStatus::Failure => ApiStatus::Failure,
        };
        entry.result = Some(result);
    }
}

#[derive(Debug, Serialize)]
struct TaskView {
    task_id: String,
    status: ApiStatus,
    source_dialect: Dialect,
    target_dialect: Dialect,
    mode: TranslationMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    translated_sql: Option<String>,
    trace: serde_json::Value,
}

async fn get_task(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<TaskView>, ApiError> {
    let tasks = state.tasks.read().await;
    let entry = tasks.get(&id).ok_or(ApiError::NotFound)?;
    let trace = entry
        .result
        .as_ref()
        .map(|r| serde_json::to_value(&r.trace).expect("trace serializes"))
        .unwrap_or_else(|| serde_json::json!({ "events": [] }));
    Ok(Json(TaskView {
        task_id: id.clone(),
        status: entry.status,
        source_dialect: entry.task.source_dialect,
        target_dialect: entry.task.target_dialect,
        mode: entry.task.mode,
        translated_sql: entry.result.as_ref().and_then(|r| r.translated_sql.clone()),
        trace,
    }))
}

#[derive(Debug, Deserialize)]
struct HistoryParams {
    limit: Option<usize>,
}

async fn get_history(
    State(state): State<AppState>,
    Query(params): Query<HistoryParams>,
) -> Result<Json<Vec<HistoryRecord>>, ApiError> {
    let limit = params.limit.unwrap_or(20);
    let history = state.history.lock().await;
    history
        .list(limit)
        .map(Json)
        .map_err(|e| ApiError::Unprocessable(e.to_string()))
}
