use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use coevo_core::challenges::{
    run_episode, ChallengeId, ChallengeSpec, EpisodeResult, FrameCapture, DEFAULT_SEED,
};
use coevo_core::evolve::{init_run, run_control, EvoParams, RunCommand};
use coevo_core::physics::{Frame, DEFAULT_FRAME_INTERVAL};
use coevo_core::shape::{design_to_wire, ActionLog, DesignWire};
use coevo_core::store::{LeaderboardEntry, RunSummary, SessionRecord};
use coevo_core::{Action, ActorId, BrickChain};
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, ErrorCode};
use crate::runs::{ensure_worker, lock, require_active, RunView};
use crate::AppState;

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::new(ErrorCode::InvalidRequest, e.body_text()))
}

fn challenge_id(raw: &str) -> Result<ChallengeId, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::new(ErrorCode::UnknownChallenge, format!("unknown challenge {raw:?}")))
}

fn spec(app: &AppState, id: ChallengeId) -> Result<ChallengeSpec, ApiError> {
    app.0
        .specs
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::new(ErrorCode::UnknownChallenge, id.to_string()))
}

fn design(wire: &DesignWire) -> Result<BrickChain, ApiError> {
    if wire.angles.is_empty() {
        return Err(ApiError::new(
            ErrorCode::InvalidDesign,
            "design must contain at least one brick",
        ));
    }
    Ok(BrickChain::from_wire(wire)?)
}

async fn blocking<T: Send + 'static>(
    app: &AppState,
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let _permit = app.0.evaluations.acquire().await.map_err(ApiError::internal)?;
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)?
}

/// Runs an episode off the async runtime, storing frames when asked.
async fn evaluate_design(
    app: &AppState,
    spec: ChallengeSpec,
    design: BrickChain,
    seed: u64,
    frames: bool,
) -> Result<EpisodeResult, ApiError> {
    let store = app.0.store.clone();
    blocking(app, move || {
        let capture = if frames {
            FrameCapture::Every(DEFAULT_FRAME_INTERVAL)
        } else {
            FrameCapture::Off
        };
        let mut result = run_episode(&spec, &design, seed, capture)?;
        if let Some(frames) = result.frames.take() {
            let id = store.save_frames(&frames)?;
            result.frames_ref = Some(format!("/v1/frames/{id}"));
        }
        Ok(result)
    })
    .await
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/challenges", get(list_challenges))
        .route("/v1/challenges/{id}", get(get_challenge))
        .route("/v1/evaluate", post(evaluate))
        .route("/v1/frames/{id}", get(get_frames))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/actions", post(append_action))
        .route("/v1/sessions/{id}/replay", get(replay))
        .route("/v1/sessions/{id}/evaluate", post(evaluate_session))
        .route("/v1/runs", post(create_run).get(list_runs))
        .route("/v1/runs/{id}", get(get_run))
        .route("/v1/runs/{id}/advance", post(advance_run))
        .route("/v1/runs/{id}/pause", post(pause_run))
        .route("/v1/runs/{id}/resume", post(resume_run))
        .route("/v1/runs/{id}/stop", post(stop_run))
        .route("/v1/runs/{id}/inject", post(inject_run))
        .route("/v1/runs/{id}/archive", get(get_archive))
        .route("/v1/leaderboard/{challenge_id}", get(get_leaderboard).post(post_leaderboard))
        .fallback(not_found)
        .method_not_allowed_fallback(not_found)
        .with_state(state)
}

async fn not_found() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such route")
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok" })
}

#[derive(Serialize)]
struct ChallengeSummary {
    id: ChallengeId,
    version: String,
    episode_steps: u64,
    spec: ChallengeSpec,
}

async fn list_challenges(State(app): State<AppState>) -> Json<Vec<ChallengeSummary>> {
    Json(
        app.0
            .specs
            .values()
            .map(|s| ChallengeSummary {
                id: s.id,
                version: s.version.clone(),
                episode_steps: s.episode_steps,
                spec: s.clone(),
            })
            .collect(),
    )
}

async fn get_challenge(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<ChallengeSpec> {
    Ok(Json(spec(&app, challenge_id(&id)?)?))
}

#[derive(Deserialize)]
struct EvaluateRequest {
    challenge_id: String,
    design: DesignWire,
    seed: Option<u64>,
    #[serde(default)]
    frames: bool,
}

async fn evaluate(
    State(app): State<AppState>,
    payload: Result<Json<EvaluateRequest>, JsonRejection>,
) -> ApiResult<EpisodeResult> {
    let req = body(payload)?;
    let spec = spec(&app, challenge_id(&req.challenge_id)?)?;
    let design = design(&req.design)?;
    let result = evaluate_design(&app, spec, design, req.seed.unwrap_or(DEFAULT_SEED), req.frames).await?;
    Ok(Json(result))
}

#[derive(Serialize)]
struct FramesBody {
    frames: Vec<Frame>,
}

async fn get_frames(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<FramesBody> {
    let store = app.0.store.clone();
    let frames = blocking(&app, move || Ok(store.load_frames(&id)?)).await?;
    Ok(Json(FramesBody { frames }))
}

// ---- sessions ----

#[derive(Deserialize)]
struct CreateSession {
    actor: ActorId,
    challenge_id: String,
}

#[derive(Serialize)]
struct SessionCreated {
    session_id: String,
}

async fn create_session(
    State(app): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    let id = challenge_id(&req.challenge_id)?;
    let record = app.0.store.create_session(req.actor, id)?;
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            session_id: record.session_id,
        }),
    )
        .into_response())
}

#[derive(Serialize)]
struct SessionView {
    session_id: String,
    actor: ActorId,
    challenge_id: ChallengeId,
    log: ActionLog,
    chain: DesignWire,
    best_result: Option<EpisodeResult>,
    created_at: u64,
    updated_at: u64,
}

impl From<SessionRecord> for SessionView {
    fn from(r: SessionRecord) -> Self {
        SessionView {
            chain: design_to_wire(r.final_design.as_ref()),
            session_id: r.session_id,
            actor: r.actor,
            challenge_id: r.challenge_id,
            log: r.log,
            best_result: r.best_result,
            created_at: r.created_at,
            updated_at: r.updated_at,
        }
    }
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionView> {
    Ok(Json(app.0.store.get_session(&id)?.into()))
}

#[derive(Deserialize)]
struct AppendAction {
    action: Action,
    actor: Option<ActorId>,
}

#[derive(Serialize)]
struct ActionApplied {
    seq: u64,
    chain: DesignWire,
}

async fn append_action(
    State(app): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<AppendAction>, JsonRejection>,
) -> ApiResult<ActionApplied> {
    let req = body(payload)?;
    let actor = match req.actor {
        Some(a) => a,
        None => app.0.store.get_session(&id)?.actor,
    };
    let (seq, chain) = app.0.store.append_action(&id, req.action, actor)?;
    Ok(Json(ActionApplied {
        seq,
        chain: design_to_wire(chain.as_ref()),
    }))
}

#[derive(Deserialize)]
struct ReplayQuery {
    upto: Option<u64>,
}

#[derive(Serialize)]
struct ReplayBody {
    log: ActionLog,
    chain: DesignWire,
}

async fn replay(
    State(app): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<ReplayQuery>, QueryRejection>,
) -> ApiResult<ReplayBody> {
    let Query(q) = query.map_err(|e| ApiError::new(ErrorCode::InvalidRequest, e.body_text()))?;
    let (log, chain) = app.0.store.get_replay(&id, q.upto)?;
    Ok(Json(ReplayBody {
        log,
        chain: design_to_wire(chain.as_ref()),
    }))
}

#[derive(Deserialize, Default)]
struct EvaluateSession {
    seed: Option<u64>,
    #[serde(default)]
    frames: bool,
}

#[derive(Serialize)]
struct SessionEvaluated {
    result: EpisodeResult,
    rank: usize,
    improved: bool,
}

/// Scores the session's current design and offers it to the leaderboard.
async fn evaluate_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<EvaluateSession>, JsonRejection>,
) -> ApiResult<SessionEvaluated> {
    let req = body(payload)?;
    let record = app.0.store.get_session(&id)?;
    let design = record.final_design.ok_or_else(|| {
        ApiError::new(ErrorCode::InvalidDesign, "session design is empty")
    })?;
    let spec = spec(&app, record.challenge_id)?;
    let result = evaluate_design(&app, spec, design, req.seed.unwrap_or(DEFAULT_SEED), req.frames).await?;
    let improved = app.0.store.record_session_result(&id, &result)?;
    let rank = app.0.store.record_result(record.challenge_id, &record.actor, &result)?;
    Ok(Json(SessionEvaluated {
        result,
        rank,
        improved,
    }))
}

// ---- runs ----

#[derive(Deserialize)]
struct CreateRun {
    challenge_id: String,
    params: Option<EvoParams>,
}

async fn create_run(
    State(app): State<AppState>,
    payload: Result<Json<CreateRun>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    let spec = spec(&app, challenge_id(&req.challenge_id)?)?;
    // Without explicit params the run is still reproducible: seed 0.
    let params = req.params.unwrap_or_else(|| EvoParams::with_seed(0));
    params.validate()?;
    let run_id = app.0.store.new_run_id();
    let store = app.0.store.clone();
    let state = blocking(&app, move || {
        let mut state = init_run(spec, params)?;
        state.run_id = run_id;
        store.save_run(&state)?;
        Ok(state)
    })
    .await?;
    let entry = app.0.runs.insert(state);
    let view = lock(&entry).view();
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn list_runs(State(app): State<AppState>) -> ApiResult<Vec<RunSummary>> {
    let store = app.0.store.clone();
    Ok(Json(blocking(&app, move || Ok(store.list_runs()?)).await?))
}

async fn get_run(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<RunView> {
    let entry = app.0.runs.get(&id, &app.0.store)?;
    let view = lock(&entry).view();
    Ok(Json(view))
}

#[derive(Deserialize)]
struct Advance {
    generations: u64,
}

async fn advance_run(
    State(app): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<Advance>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    if req.generations == 0 || req.generations > 10_000 {
        return Err(ApiError::new(ErrorCode::InvalidParams, "generations must be in 1..=10000"));
    }
    let entry = app.0.runs.get(&id, &app.0.store)?;
    {
        let mut e = lock(&entry);
        require_active(&e)?;
        e.pending += req.generations;
    }
    ensure_worker(&app.0.store, &entry);
    let view = lock(&entry).view();
    Ok((StatusCode::ACCEPTED, Json(view)).into_response())
}

async fn control(app: AppState, id: String, command: RunCommand) -> ApiResult<RunView> {
    let entry = app.0.runs.get(&id, &app.0.store)?;
    {
        let mut e = lock(&entry);
        let next = run_control(e.state.clone(), command)?;
        e.state = next;
        if command == RunCommand::Stop {
            e.pending = 0;
            e.injections.clear();
        }
        app.0.store.save_run(&e.state)?;
    }
    ensure_worker(&app.0.store, &entry);
    let view = lock(&entry).view();
    Ok(Json(view))
}

async fn pause_run(State(app): State<AppState>, Path(id): Path<String>, _body: Bytes) -> ApiResult<RunView> {
    control(app, id, RunCommand::Pause).await
}

async fn resume_run(State(app): State<AppState>, Path(id): Path<String>, _body: Bytes) -> ApiResult<RunView> {
    control(app, id, RunCommand::Resume).await
}

async fn stop_run(State(app): State<AppState>, Path(id): Path<String>, _body: Bytes) -> ApiResult<RunView> {
    control(app, id, RunCommand::Stop).await
}

#[derive(Deserialize)]
struct InjectRequest {
    design: DesignWire,
    actor: ActorId,
}

#[derive(Serialize)]
struct Injected {
    /// True when the injection waits for the in-flight generation to finish.
    queued: bool,
    run: RunView,
}

async fn inject_run(
    State(app): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<InjectRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    let entry = app.0.runs.get(&id, &app.0.store)?;
    require_active(&lock(&entry))?;
    let design = design(&req.design)?;
    let actor = req.actor;
    {
        let mut e = lock(&entry);
        if e.worker_active {
            e.injections.push_back((design, actor));
            drop(e);
            let run = lock(&entry).view();
            return Ok((StatusCode::ACCEPTED, Json(Injected { queued: true, run })).into_response());
        }
    }
    let queued = false;
    let worker_entry = entry.clone();
    let store = app.0.store.clone();
    blocking(&app, move || {
        let mut e = lock(&worker_entry);
        let next = coevo_core::evolve::inject(e.state.clone(), Some(design), actor)?;
        e.state = next;
        store.save_run(&e.state)?;
        Ok(())
    })
    .await?;
    let run = lock(&entry).view();
    Ok(Json(Injected { queued, run }).into_response())
}

#[derive(Serialize)]
struct ArchiveBody {
    run_id: String,
    archive_score_min: f64,
    archive_distance_min: f64,
    archive: Vec<coevo_core::evolve::Individual>,
}

async fn get_archive(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<ArchiveBody> {
    let entry = app.0.runs.get(&id, &app.0.store)?;
    let e = lock(&entry);
    Ok(Json(ArchiveBody {
        run_id: e.state.run_id.clone(),
        archive_score_min: e.state.params.archive_score_min,
        archive_distance_min: e.state.params.archive_distance_min,
        archive: e.state.archive.clone(),
    }))
}

// ---- leaderboard ----

async fn get_leaderboard(
    State(app): State<AppState>,
    Path(raw): Path<String>,
) -> ApiResult<Vec<LeaderboardEntry>> {
    let id = challenge_id(&raw)?;
    Ok(Json(app.0.store.leaderboard(id)?))
}

#[derive(Deserialize)]
struct Submit {
    actor: ActorId,
    design: DesignWire,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct Submitted {
    rank: usize,
    result: EpisodeResult,
}

/// Evaluates the submitted design server-side, then records the score.
async fn post_leaderboard(
    State(app): State<AppState>,
    Path(raw): Path<String>,
    payload: Result<Json<Submit>, JsonRejection>,
) -> ApiResult<Submitted> {
    let req = body(payload)?;
    let id = challenge_id(&raw)?;
    let spec = spec(&app, id)?;
    let design = design(&req.design)?;
    let result = evaluate_design(&app, spec, design, req.seed.unwrap_or(DEFAULT_SEED), false).await?;
    let rank = app.0.store.record_result(id, &req.actor, &result)?;
    Ok(Json(Submitted { rank, result }))
}
