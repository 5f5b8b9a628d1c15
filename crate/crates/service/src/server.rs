//! Running the HTTP service.

use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use tokio::net::TcpListener;

use crate::api;
use crate::config::ServiceConfig;
use crate::service::{Service, StartupError};

/// Binds the configured address.
pub async fn bind(config: &ServiceConfig) -> Result<TcpListener, StartupError> {
    let addr = config.socket_addr();
    TcpListener::bind(addr)
        .await
        .map_err(|source| StartupError::PortUnavailable { addr, source })
}

/// Serves `service` on `listener` until `shutdown` resolves, writing queued
/// mail to the outbox in the background.
pub async fn serve(
    service: Arc<Service>,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let period = Duration::from_millis(service.config().flush_interval_ms.max(10));
    let flusher = {
        let service = service.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                let s = service.clone();
                match tokio::task::spawn_blocking(move || s.flush_notifications()).await {
                    Ok(Ok(n)) if n > 0 => tracing::info!(sent = n, "wrote notifications"),
                    Ok(Err(e)) => tracing::warn!(error = %e, "notification flush failed"),
                    _ => {}
                }
            }
        })
    };
    let result = axum::serve(listener, api::router(service)).with_graceful_shutdown(shutdown).await;
    flusher.abort();
    result
}
