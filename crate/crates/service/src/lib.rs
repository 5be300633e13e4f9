//! HTTP/JSON API over the design platform: challenges, evaluation, design
//! sessions with replay, evolutionary runs and the leaderboard.
//!
//! Every route lives under `/v1`. Errors share one body shape,
//! [`ApiError`], with a code from [`ErrorCode`].

mod error;
mod routes;
mod runs;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use coevo_core::challenges::{default_specs, ChallengeId, ChallengeSpec};
use coevo_core::store::{Store, StoreError};
use tokio::net::TcpListener;
use tokio::sync::Semaphore;

pub use error::{ApiError, ErrorCode};
pub use routes::router;
pub use runs::RunView;

pub const DEFAULT_ADDR: &str = "127.0.0.1:8711";
/// The JSON schema for every request and response body.
pub const API_SCHEMA: &str = include_str!("../schema/api.schema.json");

#[derive(Debug, Clone)]
pub struct Config {
    pub addr: SocketAddr,
    pub data_dir: PathBuf,
    pub max_evaluations: usize,
}

impl Config {
    pub fn new(addr: SocketAddr, data_dir: impl Into<PathBuf>) -> Self {
        Self {
            addr,
            data_dir: data_dir.into(),
            max_evaluations: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug)]
pub struct Inner {
    pub store: Arc<Store>,
    pub specs: BTreeMap<ChallengeId, ChallengeSpec>,
    pub runs: runs::Runs,
    pub evaluations: Semaphore,
}

#[derive(Debug, Clone)]
pub struct AppState(pub Arc<Inner>);

impl AppState {
    pub fn new(store: Store, max_evaluations: usize) -> Self {
        AppState(Arc::new(Inner {
            store: Arc::new(store),
            specs: default_specs(),
            runs: runs::Runs::default(),
            evaluations: Semaphore::new(max_evaluations.max(1)),
        }))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot open data directory: {0}")]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Serves on an already bound listener until the future is dropped.
pub async fn serve_listener(listener: TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Serves until `shutdown` resolves, then drains open connections.
pub async fn serve_until(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds `config.addr` and serves until interrupted (Ctrl-C).
pub async fn serve(config: Config) -> Result<(), ServeError> {
    let store = Store::open(&config.data_dir)?;
    let state = AppState::new(store, config.max_evaluations);
    let listener = TcpListener::bind(config.addr).await?;
    serve_until(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
