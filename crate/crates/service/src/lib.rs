//! JSON service over a history fitted once at startup.
//!
//! Routes:
//! * `POST /api/forecast` takes a scenario and returns the forecast summary.
//! * `GET /api/countries` lists the activation profiles.
//! * `GET /api/accrual-model` returns the fitted accrual model.
//! * `GET /healthz` answers 503 until the history is loaded.

mod api;
mod state;

use std::future::Future;
use std::io;

use axum::http::HeaderValue;
use enrollcast::{FitOptions, FittedHistory, HistoryPaths, ProfileOptions};
use thiserror::Error;
use tokio::net::TcpListener;

pub use api::{router, ApiError};
pub use state::ServiceState;

/// Largest replicate count a single request may ask for.
pub const DEFAULT_MAX_REPLICATES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    /// Browser origin allowed to call the API, e.g. `http://localhost:5173`.
    pub cors_origin: Option<String>,
    pub max_replicates: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            cors_origin: None,
            max_replicates: DEFAULT_MAX_REPLICATES,
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("invalid CORS origin {0:?}")]
    InvalidOrigin(String),
    #[error("loading history: {0}")]
    Load(#[from] enrollcast::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("background task failed: {0}")]
    Task(#[from] tokio::task::JoinError),
}

pub(crate) fn parse_origin(origin: &str) -> Result<HeaderValue, ServeError> {
    HeaderValue::from_str(origin).map_err(|_| ServeError::InvalidOrigin(origin.to_string()))
}

/// Serves on `listener` while the history loads in the background, so
/// `/healthz` reports 503 until fitting finishes. A load failure stops the
/// server and is returned.
pub async fn run(
    listener: TcpListener,
    paths: HistoryPaths,
    fit: FitOptions,
    profile: ProfileOptions,
    config: ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let state = ServiceState::loading();
    let app = router(state.clone(), &config)?;
    log::info!("listening on {}", listener.local_addr()?);
    let server = tokio::spawn(async move { axum::serve(listener, app).with_graceful_shutdown(shutdown).await });

    match tokio::task::spawn_blocking(move || FittedHistory::load(&paths, fit, &profile)).await? {
        Ok(history) => {
            log::info!(
                "history ready: psm {:.4}, {} countries",
                history.model().psm(),
                history.profiles().len()
            );
            state.install(history);
        }
        Err(e) => {
            server.abort();
            return Err(e.into());
        }
    }
    server.await??;
    Ok(())
}
