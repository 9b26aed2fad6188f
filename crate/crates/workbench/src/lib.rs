//! Validation workbench: persistent rounds, candidates and decisions behind
//! a small JSON API.

pub mod http;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use http::router;
pub use store::{
    Candidate, Decision, Promotion, Resources, Round, RoundStats, Snippet, State, Store, StoreError, Verdict,
};

pub const DEFAULT_DATA_DIR: &str = "./data";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8737";

/// Data directory and listen address from `PARAFACT_DATA_DIR` and
/// `PARAFACT_LISTEN`.
pub fn env_config() -> Result<(PathBuf, SocketAddr), String> {
    let dir = std::env::var("PARAFACT_DATA_DIR").unwrap_or_else(|_| DEFAULT_DATA_DIR.into());
    let listen = std::env::var("PARAFACT_LISTEN").unwrap_or_else(|_| DEFAULT_LISTEN.into());
    let addr = listen.parse().map_err(|e| format!("PARAFACT_LISTEN `{listen}`: {e}"))?;
    Ok((PathBuf::from(dir), addr))
}

pub async fn serve(store: Arc<Store>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, dir = %store.dir().display(), "workbench listening");
    axum::serve(listener, router(store)).await
}
