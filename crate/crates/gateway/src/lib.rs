//! HTTP gateway in front of the diff risk scorers.
//!
//! Routes: `GET /health`, `POST /seq-cls/predict`, `/seq-cls/predict_batch`,
//! `/seq-cls/predict_by_sha`, and the opt-in `/clm/predict` and
//! `/clm/predict_by_sha`.

mod app;
pub mod config;
pub mod error;
pub mod hosting;
pub mod wire;

use tokio::net::TcpListener;

pub use app::{router, AppState, StartupError};
pub use config::GatewayConfig;

/// Serve on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
