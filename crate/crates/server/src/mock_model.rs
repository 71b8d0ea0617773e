//! Echo model for local runs and tests. `POST /generate` answers with the prompt
//! as text; `POST /fail` always answers 500.

use std::net::SocketAddr;

use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use tabgenie_core::pipeline::{PromptRequest, TextResponse};
use tokio::net::TcpListener;

pub fn router() -> Router {
    Router::new()
        .route("/generate", post(echo))
        .route("/", post(echo))
        .route("/fail", post(fail))
}

async fn echo(Json(req): Json<PromptRequest>) -> Json<TextResponse> {
    Json(TextResponse { text: req.prompt })
}

async fn fail() -> (StatusCode, &'static str) {
    (StatusCode::INTERNAL_SERVER_ERROR, "mock failure")
}

pub struct MockModel {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
}

impl MockModel {
    pub fn endpoint(&self) -> String {
        format!("http://{}/generate", self.addr)
    }

    pub fn stop(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

/// Binds `addr` and serves the echo model on the current runtime.
pub async fn spawn(addr: SocketAddr) -> std::io::Result<MockModel> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel();
    tokio::spawn(async move {
        let _ = axum::serve(listener, router())
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
    });
    Ok(MockModel {
        addr,
        shutdown: Some(tx),
    })
}
