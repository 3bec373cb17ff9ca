//! HTTP routes.

use std::collections::VecDeque;
use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use serde::{Deserialize, Serialize};
use tokio::sync::watch;
use transponder_core::ppo::inference;
use transponder_core::{MetricWeights, Profile};

use crate::error::ApiError;
use crate::runs::{InferConfig, Point, Registry, Run, RunConfig, RunHandle, RunKind};
use crate::view::TransponderStateView;

type AppState = Arc<Registry>;

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/runs", post(create_run).get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/state", get(get_state))
        .route("/runs/{id}/events", get(stream_events))
        .route("/weights", get(get_weights).put(put_weights))
        .route("/profile", get(get_profile))
        .route("/checkpoints", get(list_checkpoints))
        .route("/checkpoints/{id}/infer", post(infer_checkpoint))
        .with_state(registry)
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let text = if body.iter().all(u8::is_ascii_whitespace) { b"{}".as_slice() } else { body };
    serde_json::from_slice(text).map_err(|e| ApiError::BadRequest(format!("malformed body: {e}")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRun {
    kind: String,
    #[serde(default)]
    config: serde_json::Value,
}

async fn create_run(State(reg): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<RunHandle>), ApiError> {
    let req: CreateRun = parse_body(&body)?;
    let kind: RunKind = req.kind.parse()?;
    let handle = reg.create(RunConfig::parse(kind, req.config)?)?;
    Ok((StatusCode::CREATED, Json(handle)))
}

async fn list_runs(State(reg): State<AppState>) -> Json<Vec<RunHandle>> {
    Json(reg.handles())
}

async fn get_run(State(reg): State<AppState>, Path(id): Path<String>) -> Result<Json<RunHandle>, ApiError> {
    Ok(Json(reg.run(&id)?.handle()))
}

/// One recorded step as served by `/state` and the event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepView {
    pub step: u64,
    pub reward: f64,
    pub state: TransponderStateView,
}

impl StepView {
    pub fn new(point: &Point, run: &Run) -> Self {
        Self { step: point.step, reward: point.reward, state: TransponderStateView::new(&point.state, &run.profile) }
    }
}

#[derive(Debug, Deserialize)]
struct StepQuery {
    step: Option<u64>,
}

async fn get_state(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<StepQuery>,
) -> Result<Json<StepView>, ApiError> {
    let run = reg.run(&id)?;
    let point = run.point_at(q.step).ok_or_else(|| match q.step {
        Some(k) => ApiError::NotFound(format!("step {k} of run '{id}'")),
        None => ApiError::NotFound(format!("run '{id}' has not recorded a step yet")),
    })?;
    Ok(Json(StepView::new(&point, &run)))
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    /// Same as `Last-Event-ID`, for clients that cannot set headers.
    after: Option<u64>,
}

/// Points a stream fetches per lock acquisition.
const EVENT_CHUNK: usize = 512;

struct Cursor {
    run: Arc<Run>,
    after: Option<u64>,
    changes: watch::Receiver<u64>,
    pending: VecDeque<Point>,
    ended: bool,
}

fn json_event(name: &str, data: &impl Serialize) -> Event {
    Event::default().event(name).data(serde_json::to_string(data).expect("views serialize"))
}

async fn next_event(mut c: Cursor) -> Option<(Result<Event, Infallible>, Cursor)> {
    loop {
        if c.ended {
            return None;
        }
        if let Some(point) = c.pending.pop_front() {
            c.after = Some(point.step);
            let event = json_event("point", &StepView::new(&point, &c.run)).id(point.step.to_string());
            return Some((Ok(event), c));
        }
        c.changes.borrow_and_update();
        let finished = c.run.status().is_finished();
        c.pending.extend(c.run.points_after(c.after, EVENT_CHUNK));
        if !c.pending.is_empty() {
            continue;
        }
        if finished {
            c.ended = true;
            return Some((Ok(json_event("end", &c.run.handle())), c));
        }
        if c.changes.changed().await.is_err() {
            // the run was dropped; nothing more will arrive
            c.ended = true;
        }
    }
}

async fn stream_events(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let last_seen = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok())
        .or(q.after);
    let stream: std::pin::Pin<Box<dyn Stream<Item = _> + Send>> = match reg.run(&id) {
        Ok(run) => {
            let changes = run.subscribe();
            let cursor = Cursor { run, after: last_seen, changes, pending: VecDeque::new(), ended: false };
            Box::pin(stream::unfold(cursor, next_event))
        }
        Err(e) => Box::pin(stream::once(async move {
            Ok(json_event("error", &serde_json::json!({ "error": e.to_string() })))
        })),
    };
    Sse::new(stream).keep_alive(KeepAlive::default())
}

async fn get_weights(State(reg): State<AppState>) -> Json<MetricWeights> {
    Json(reg.profile().weights)
}

async fn put_weights(State(reg): State<AppState>, body: Bytes) -> Result<Json<MetricWeights>, ApiError> {
    let weights: MetricWeights = parse_body(&body)?;
    reg.set_weights(weights)?;
    Ok(Json(reg.profile().weights))
}

async fn get_profile(State(reg): State<AppState>) -> Json<Profile> {
    Json(reg.profile())
}

async fn list_checkpoints(State(reg): State<AppState>) -> Json<Vec<String>> {
    Json(reg.checkpoint_ids())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferResponse {
    pub checkpoint: String,
    pub mean: f64,
    pub std: f64,
    pub final_rewards: Vec<f64>,
    pub proposal_reward: f64,
    /// Final configuration of the best episode.
    pub proposal: TransponderStateView,
}

async fn infer_checkpoint(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<InferResponse>, ApiError> {
    let cfg: InferConfig = parse_body(&body)?;
    if cfg.episodes == 0 {
        return Err(ApiError::BadRequest("episodes must be positive".into()));
    }
    let ckpt = reg.checkpoint(&id)?;
    let profile = Arc::new(reg.inference_profile(&ckpt));
    let response = tokio::task::spawn_blocking(move || -> Result<InferResponse, ApiError> {
        let net = ckpt.net().map_err(|e| ApiError::Internal(e.to_string()))?;
        let r = inference(&net, profile.clone(), ckpt.space, cfg.episodes, cfg.seed, cfg.mode)
            .map_err(|e| ApiError::Internal(e.to_string()))?;
        Ok(InferResponse {
            checkpoint: id,
            mean: r.mean,
            std: r.std,
            final_rewards: r.final_rewards,
            proposal_reward: r.proposal_reward,
            proposal: TransponderStateView::new(&r.proposal, &profile),
        })
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(response))
}
