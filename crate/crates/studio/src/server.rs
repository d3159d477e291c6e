use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use heritage_core::corpus::{load_corpus, CorpusError};
use heritage_core::imaging::{
    backend_from_env, ImageBackendPort, ImagePipeline, ImageStore, PipelineConfig, WorkflowDescriptor,
};
use heritage_core::scaffold::{port_from_env, LanguageModelPort};
use heritage_core::store::SessionStore;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tower_http::cors::CorsLayer;

use crate::state::{AppState, Settings, Shared};
use crate::{content, create, sessions};

pub fn router(state: Shared) -> Router {
    let api = Router::new()
        .route("/health", get(content::health))
        .route("/sites", get(content::sites))
        .route("/sites/{id}", get(content::site))
        .route("/taxonomy/categories", get(content::categories))
        .route("/taxonomy/categories/{id}/options", get(content::category_options))
        .route("/knowledge/{section}", get(content::knowledge))
        .route("/renderings/{asset}", get(content::rendering))
        .route("/persona/chat", post(content::persona_chat))
        .route("/guardrails/validate", post(create::validate))
        .route("/generate", post(create::generate))
        .route("/jobs/{id}", get(create::job))
        .route("/images/{id}", get(create::image))
        .route("/sessions", post(sessions::create_session))
        .route("/sessions/{id}/iterations/save-image", post(sessions::save_image))
        .route("/sessions/{id}/creations", get(sessions::creations))
        .route(
            "/sessions/{id}/creations/{cid}/exhibit-card",
            get(sessions::exhibit_card),
        )
        .route("/analytics/summary", get(sessions::summary))
        .route("/offline-manifest", get(content::offline_manifest));
    Router::new()
        .route("/", get(content::shell))
        .nest(content::API, api)
        .fallback(content::not_found)
        .layer(CorsLayer::permissive())
        .with_state(state)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("corpus failed to load")]
    CorpusLoadFailure(#[from] CorpusError),
    #[error("data directory unusable: {0}")]
    StorageFailure(String),
    #[error("workflow descriptor: {0}")]
    Workflow(String),
    #[error("cannot bind {addr}")]
    BindFailure {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub corpus_dir: PathBuf,
    pub data_dir: PathBuf,
    pub bind: SocketAddr,
    pub workflow: PathBuf,
    pub settings: Settings,
    pub pipeline: PipelineConfig,
}

/// The two external services. `from_env` falls back to the offline
/// implementations when their endpoints are not configured.
#[derive(Clone)]
pub struct Backends {
    pub language_model: Arc<dyn LanguageModelPort>,
    pub images: Arc<dyn ImageBackendPort>,
}

impl Backends {
    pub fn from_env(workflow: &std::path::Path) -> Result<Backends, ServeError> {
        let wf = WorkflowDescriptor::load(workflow).map_err(|e| ServeError::Workflow(e.to_string()))?;
        Ok(Backends {
            language_model: port_from_env(),
            images: backend_from_env(wf),
        })
    }
}

pub fn build_state(config: &ServerConfig, backends: Backends) -> Result<Shared, ServeError> {
    let corpus = Arc::new(load_corpus(&config.corpus_dir)?);
    let sessions = SessionStore::open(&config.data_dir).map_err(|e| ServeError::StorageFailure(e.to_string()))?;
    let images =
        ImageStore::open(config.data_dir.join("images")).map_err(|e| ServeError::StorageFailure(e.to_string()))?;
    let pipeline = ImagePipeline::new(corpus.clone(), backends.images, Arc::new(images), config.pipeline);
    Ok(AppState::new(
        corpus,
        backends.language_model,
        Arc::new(pipeline),
        Arc::new(sessions),
        config.settings,
    ))
}

pub struct ServiceHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl ServiceHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn shutdown(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        self.task.await.unwrap_or_else(|e| Err(std::io::Error::other(e)))
    }

    /// Runs until the server stops on its own (or the process is signalled).
    pub async fn wait(mut self) -> std::io::Result<()> {
        let stop = self.stop.take();
        let r = self.task.await.unwrap_or_else(|e| Err(std::io::Error::other(e)));
        drop(stop);
        r
    }
}

pub async fn serve_state(state: Shared, bind: SocketAddr) -> Result<ServiceHandle, ServeError> {
    let listener = TcpListener::bind(bind)
        .await
        .map_err(|source| ServeError::BindFailure { addr: bind, source })?;
    let addr = listener
        .local_addr()
        .map_err(|source| ServeError::BindFailure { addr: bind, source })?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(state).into_make_service_with_connect_info::<SocketAddr>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = rx.await;
            })
            .await
    });
    tracing::info!(%addr, "studio gateway listening");
    Ok(ServiceHandle {
        addr,
        stop: Some(tx),
        task,
    })
}

pub async fn serve(config: &ServerConfig, backends: Backends) -> Result<ServiceHandle, ServeError> {
    let state = build_state(config, backends)?;
    serve_state(state, config.bind).await
}
