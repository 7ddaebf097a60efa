//! HTTP facade over `larf-core`: annotation, bionic formatting and scoring,
//! with every job appended to a JSON Lines log.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/api/annotate` | `{text, mode, categories?, temperature?, max_output_tokens?, style?}` |
//! | POST | `/api/bionic` | `{text, fixation?, saccade?, style?}` |
//! | POST | `/api/score` | `{article, answer}` |
//! | GET | `/api/jobs/{id}` | one job with its reviews |
//! | GET | `/api/jobs?kind=&limit=&offset=` | newest first |
//! | POST | `/api/jobs/{id}/review` | `{adjusted_score?, reviewer?, note?}` |
//! | GET | `/health` | `{status, name, version}` |
//!
//! Errors are `{"code": ..., "message": ...}` with a matching status.

pub mod api;
pub mod config;
pub mod jobs;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

pub use api::{router, ApiError, AppState};
pub use config::ServiceConfig;
pub use jobs::{JobKind, JobRecord, JobStatus, JobStore, JobView, JsonlJobStore, LogEntry, MemoryJobStore, Review};

use thiserror::Error;
use tokio::net::TcpListener;
use tracing::info;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] jobs::StoreError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Opens the job log and binds the listener. Returns the bound address
/// (useful with port 0) and a future that serves until `shutdown` resolves.
pub async fn bind(
    config: &ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(SocketAddr, impl Future<Output = Result<(), ServeError>>), ServeError> {
    let store = Arc::new(JsonlJobStore::open(&config.job_log).await?);
    let state = AppState::from_config(store, &config.llm);
    let app = router(state, config.ui_origin.as_deref());
    let listener = TcpListener::bind(config.listen_addr).await.map_err(|source| ServeError::Bind {
        addr: config.listen_addr,
        source,
    })?;
    let addr = listener.local_addr()?;
    info!(%addr, log = %config.job_log.display(), "listening");
    let server = async move {
        axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
        Ok(())
    };
    Ok((addr, server))
}

/// Serves until Ctrl-C.
pub async fn serve(config: &ServiceConfig) -> Result<(), ServeError> {
    let (_, server) = bind(config, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    server.await
}
