//! HTTP service over loaded datasets, system outputs, pipelines, exports and
//! the notes/favorites session.

pub mod api;
pub mod config;
pub mod mock_model;
pub mod session;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use tabgenie_core::adapters::{AdapterError, Catalog, Dataset};
use tabgenie_core::outputs::{scan_output_dir, OutputStore};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use config::{ConfigError, PipelineConfig, ServiceConfig};
pub use session::{
    load_session, persist_session, ExampleKey, SessionError, SessionState, SessionStore,
};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("dataset directory {0} does not exist")]
    MissingDatasetDir(String),
    #[error("failed to load datasets: {0}")]
    Load(#[from] AdapterError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    session: Arc<SessionStore>,
    shutdown: Option<oneshot::Sender<()>>,
    join: JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    /// Stops accepting, drains in-flight requests, then flushes the session.
    pub async fn shutdown(mut self) -> Result<(), ServeError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match (&mut self.join).await {
            Ok(r) => r?,
            Err(e) => return Err(ServeError::Io(std::io::Error::other(e))),
        }
        self.session.flush().await?;
        tracing::info!(file = %self.session.path().display(), "session flushed");
        Ok(())
    }

    pub fn session(&self) -> &SessionStore {
        &self.session
    }
}

/// Loads everything the service needs, failing fast on dataset errors.
pub fn load_state(config: &ServiceConfig) -> Result<api::AppState, ServeError> {
    config.validate()?;
    if !config.dataset_dir.is_dir() {
        return Err(ServeError::MissingDatasetDir(
            config.dataset_dir.display().to_string(),
        ));
    }
    let datasets: BTreeMap<String, Dataset> = Catalog::new(&config.dataset_dir).load_all()?;
    for d in datasets.values() {
        let splits: Vec<String> = d
            .info()
            .split_sizes
            .iter()
            .map(|(s, n)| format!("{s}={n}"))
            .collect();
        tracing::info!(dataset = d.id(), data_type = ?d.info().data_type, splits = %splits.join(" "), "loaded dataset");
    }

    let outputs = if config.output_dir.is_dir() {
        match scan_output_dir(&config.output_dir, &datasets) {
            Ok((store, warnings)) => {
                for w in &warnings {
                    tracing::warn!("{w}");
                }
                store
            }
            Err(e) => {
                tracing::warn!("cannot read outputs: {e}");
                OutputStore::default()
            }
        }
    } else {
        tracing::warn!(dir = %config.output_dir.display(), "output directory not found; no system outputs");
        OutputStore::default()
    };
    tracing::info!(systems = %outputs.all_systems().join(", "), "output systems");

    let session = Arc::new(SessionStore::open(config.session_file.clone())?);
    Ok(api::AppState {
        datasets: Arc::new(datasets),
        outputs,
        pipelines: config.pipeline_registry()?,
        session,
    })
}

/// Binds `config.host:config.port` and serves in the background.
pub async fn serve(config: ServiceConfig) -> Result<ServerHandle, ServeError> {
    config.validate()?;
    let addr = format!("{}:{}", config.host, config.port);
    let listener = TcpListener::bind(&addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    serve_on(listener, config).await
}

/// Serves on an already bound listener.
pub async fn serve_on(
    listener: TcpListener,
    config: ServiceConfig,
) -> Result<ServerHandle, ServeError> {
    let cfg = config.clone();
    let state = tokio::task::spawn_blocking(move || load_state(&cfg))
        .await
        .map_err(|e| ServeError::Io(std::io::Error::other(e)))??;
    let session = state.session.clone();
    let app = api::router(Arc::new(state), config.static_dir.as_deref());
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let join = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    tracing::info!(%addr, "listening");
    Ok(ServerHandle {
        addr,
        session,
        shutdown: Some(tx),
        join,
    })
}
