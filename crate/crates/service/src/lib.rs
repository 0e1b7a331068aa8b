//! HTTP/JSON facade over a snapshot, its uncertainty analysis and the fitted
//! predictors.
//!
//! Handlers read an immutable [`ServiceState`] behind an `Arc`; training
//! builds a new state off the request path and swaps it in whole.

mod error;
mod routes;
mod state;

pub use error::ApiError;
pub use routes::{router, TrainReport, WhatIfRequest, DEFAULT_QUANTILES};
pub use state::{AppState, ServiceState, TrainingGuard};

use std::net::SocketAddr;

use tower_http::cors::{AllowOrigin, CorsLayer};

/// Allowed browser origins for cross-origin requests.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum CorsPolicy {
    #[default]
    Disabled,
    Any,
    Origins(Vec<String>),
}

impl CorsPolicy {
    fn layer(&self) -> std::io::Result<Option<CorsLayer>> {
        let origin = match self {
            CorsPolicy::Disabled => return Ok(None),
            CorsPolicy::Any => AllowOrigin::any(),
            CorsPolicy::Origins(list) => {
                let values = list
                    .iter()
                    .map(|o| {
                        o.parse().map_err(|_| {
                            std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("bad origin {o:?}"))
                        })
                    })
                    .collect::<std::io::Result<Vec<_>>>()?;
                AllowOrigin::list(values)
            }
        };
        Ok(Some(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods(tower_http::cors::Any)
                .allow_headers(tower_http::cors::Any),
        ))
    }
}

/// Router with the configured CORS layer applied.
pub fn app(state: AppState, cors: &CorsPolicy) -> std::io::Result<axum::Router> {
    let router = router(state);
    Ok(match cors.layer()? {
        Some(layer) => router.layer(layer),
        None => router,
    })
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: AppState, cors: &CorsPolicy) -> std::io::Result<()> {
    let app = app(state, cors)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
