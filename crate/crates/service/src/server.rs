use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use faqmatch_core::model_store::{self, PairRecord};
use faqmatch_core::{
    load_model, parse_faq, EmbedderRegistry, EmbedderSpec, FormatError, KnowledgeBase,
    MatchError, Matcher, ParseError, QaPair, DEFAULT_THRESHOLD,
};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::config::{ConfigError, Mode, ServiceConfig};
use crate::engine::{EngineClient, EngineError};
use crate::fetch::{fetch_url, FetchError};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error("parsing FAQ page: {0}")]
    Parse(#[from] ParseError),
    #[error("loading model: {0}")]
    Model(#[from] FormatError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
    #[error("knowledge base build was aborted")]
    Aborted,
}

/// Knowledge-base lifecycle as seen by request handlers.
#[derive(Debug, Clone)]
pub enum Readiness {
    Loading,
    Ready(Matcher),
    Failed(String),
}

#[derive(Debug)]
struct AppState {
    mode: &'static str,
    kb: RwLock<Readiness>,
    engine: Option<EngineClient>,
    threshold: Option<f64>,
    fallback: String,
}

/// Shared handle to the service state; cloning is cheap.
#[derive(Debug, Clone)]
pub struct Service {
    state: Arc<AppState>,
    cors: CorsLayer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskRequest {
    pub question: String,
    #[serde(default)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResponse {
    /// The matched answer, or the fallback message when rejected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub source: String,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub ready: bool,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub questions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub timeout: bool,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    let body = ErrorBody {
        error: message.into(),
        timeout: status == StatusCode::GATEWAY_TIMEOUT,
    };
    (status, Json(body)).into_response()
}

fn cors_layer(origins: &[String]) -> Result<CorsLayer, ConfigError> {
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        let values = origins
            .iter()
            .map(|o| {
                HeaderValue::from_str(o)
                    .map_err(|_| ConfigError::Invalid(format!("bad origin {o:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        AllowOrigin::list(values)
    };
    Ok(CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE]))
}

impl Service {
    /// Creates the service in the `Loading` state (or ready, in engine mode).
    pub fn new(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let mode = config.validate()?;
        let engine = match &mode {
            Mode::Engine(e) => Some(EngineClient::new(e.clone())?),
            _ => None,
        };
        Ok(Service {
            state: Arc::new(AppState {
                mode: mode.name(),
                kb: RwLock::new(Readiness::Loading),
                engine,
                threshold: config.threshold,
                fallback: config.fallback_message.clone(),
            }),
            cors: cors_layer(&config.allowed_origins)?,
        })
    }

    pub fn mode(&self) -> &'static str {
        self.state.mode
    }

    pub fn readiness(&self) -> Readiness {
        self.state.kb.read().unwrap().clone()
    }

    pub fn is_ready(&self) -> bool {
        self.state.engine.is_some() || matches!(self.readiness(), Readiness::Ready(_))
    }

    /// Publishes a new knowledge base, replacing any previous one at once.
    pub fn install(&self, matcher: Matcher) {
        *self.state.kb.write().unwrap() = Readiness::Ready(matcher);
    }

    fn fail(&self, reason: String) {
        *self.state.kb.write().unwrap() = Readiness::Failed(reason);
    }

    /// Builds the knowledge base for `config`'s mode and installs it.
    pub async fn initialize(
        &self,
        config: &ServiceConfig,
        registry: Arc<EmbedderRegistry>,
    ) -> Result<(), ServiceError> {
        if self.state.engine.is_some() {
            return Ok(());
        }
        match build_matcher(config, registry).await {
            Ok(m) => {
                tracing::info!(questions = m.knowledge_base().len(), "knowledge base ready");
                self.install(m);
                Ok(())
            }
            Err(e) => {
                tracing::error!("knowledge base build failed: {e}");
                self.fail(e.to_string());
                Err(e)
            }
        }
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/ask", post(ask))
            .route("/questions", get(questions))
            .route("/model", get(model))
            .route("/health", get(health))
            .with_state(self.state.clone())
            .layer(self.cors.clone())
    }
}

/// Produces the matcher for a knowledge-base mode. Parsing and embedding run
/// on the blocking pool.
pub async fn build_matcher(
    config: &ServiceConfig,
    registry: Arc<EmbedderRegistry>,
) -> Result<Matcher, ServiceError> {
    let threshold = config.threshold.unwrap_or(DEFAULT_THRESHOLD);
    let spec = config.embedder.clone();
    match config.mode()? {
        Mode::FaqModel(path) => blocking(move || {
            let kb = load_model(&path)?;
            Ok(Matcher::from_registry(Arc::new(kb), &registry)?)
        })
        .await,
        Mode::FaqWeb(url) => {
            let html = fetch_url(&url, config.proxy_prefix.as_deref()).await?;
            blocking(move || {
                let report = parse_faq(&html, Some(&url))?;
                build_kb(report.pairs, &spec, &registry, threshold, url)
            })
            .await
        }
        Mode::FaqCustom(records) => blocking(move || {
            build_kb(pairs_from_records(records), &spec, &registry, threshold, "custom".into())
        })
        .await,
        Mode::Engine(_) => Err(ConfigError::Invalid("engine mode has no knowledge base".into()).into()),
    }
}

async fn blocking<F>(f: F) -> Result<Matcher, ServiceError>
where
    F: FnOnce() -> Result<Matcher, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|_| ServiceError::Aborted)?
}

fn build_kb(
    pairs: Vec<QaPair>,
    spec: &EmbedderSpec,
    registry: &EmbedderRegistry,
    threshold: f64,
    source: String,
) -> Result<Matcher, ServiceError> {
    let embedder = registry.build(spec).map_err(MatchError::from)?;
    let kb = KnowledgeBase::build(pairs, embedder.as_ref(), threshold, source)?;
    Ok(Matcher::new(Arc::new(kb), embedder)?)
}

pub fn pairs_from_records(records: Vec<PairRecord>) -> Vec<QaPair> {
    records
        .into_iter()
        .enumerate()
        .map(|(index, r)| QaPair {
            question: r.question,
            answer: r.answer,
            index,
            source_url: None,
        })
        .collect()
}

#[allow(clippy::result_large_err)]
fn current(state: &AppState) -> Result<Matcher, Response> {
    if state.engine.is_some() {
        return Err(error(
            StatusCode::NOT_FOUND,
            "engine mode has no local knowledge base",
        ));
    }
    match &*state.kb.read().unwrap() {
        Readiness::Ready(m) => Ok(m.clone()),
        Readiness::Loading => Err(error(
            StatusCode::SERVICE_UNAVAILABLE,
            "knowledge base is still loading",
        )),
        Readiness::Failed(e) => Err(error(
            StatusCode::SERVICE_UNAVAILABLE,
            format!("knowledge base unavailable: {e}"),
        )),
    }
}

async fn ask(
    State(state): State<Arc<AppState>>,
    body: Result<Json<AskRequest>, JsonRejection>,
) -> Response {
    let request = match body {
        Ok(Json(r)) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    if request.question.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "question is empty");
    }
    if let Some(t) = request.threshold {
        if !(-1.0..=1.0).contains(&t) {
            return error(StatusCode::BAD_REQUEST, format!("threshold {t} outside [-1, 1]"));
        }
    }
    if let Some(engine) = &state.engine {
        return match engine.query(&request.question).await {
            Ok(answer) => Json(AskResponse {
                answer: Some(answer),
                matched_question: None,
                confidence: None,
                source: engine.config().webhook_url.clone(),
                rejected: false,
            })
            .into_response(),
            Err(e @ EngineError::Timeout(_)) => error(StatusCode::GATEWAY_TIMEOUT, e.to_string()),
            Err(e) => error(StatusCode::BAD_GATEWAY, e.to_string()),
        };
    }
    let matcher = match current(&state) {
        Ok(m) => m,
        Err(r) => return r,
    };
    match matcher.answer(&request.question, request.threshold.or(state.threshold)) {
        Ok(r) => {
            let rejected = r.is_rejected();
            Json(AskResponse {
                answer: Some(r.answer.unwrap_or_else(|| state.fallback.clone())),
                matched_question: r.matched_question,
                confidence: Some(r.confidence),
                source: r.source,
                rejected,
            })
            .into_response()
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn questions(State(state): State<Arc<AppState>>) -> Response {
    match current(&state) {
        Ok(m) => {
            let list: Vec<&str> = m.knowledge_base().questions().collect();
            Json(list).into_response()
        }
        Err(r) => r,
    }
}

async fn model(State(state): State<Arc<AppState>>) -> Response {
    let matcher = match current(&state) {
        Ok(m) => m,
        Err(r) => return r,
    };
    match model_store::to_bytes(matcher.knowledge_base()) {
        Ok(bytes) => ([(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    let mut health = Health {
        ready: state.engine.is_some(),
        mode: state.mode.to_string(),
        questions: None,
        error: None,
    };
    match &*state.kb.read().unwrap() {
        Readiness::Ready(m) => {
            health.ready = true;
            health.questions = Some(m.knowledge_base().len());
        }
        Readiness::Failed(e) => health.error = Some(e.clone()),
        Readiness::Loading => {}
    }
    Json(health)
}

/// A service bound to a socket and serving in the background.
#[derive(Debug)]
pub struct RunningService {
    pub addr: SocketAddr,
    pub service: Service,
    shutdown: Option<oneshot::Sender<()>>,
    server: JoinHandle<std::io::Result<()>>,
    build: Option<JoinHandle<Result<(), ServiceError>>>,
}

impl RunningService {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    /// Waits for the background knowledge-base build, if any.
    pub async fn wait_ready(&mut self) -> Result<(), ServiceError> {
        match self.build.take() {
            Some(h) => h.await.map_err(|_| ServiceError::Aborted)?,
            None => Ok(()),
        }
    }

    pub async fn shutdown(mut self) -> Result<(), ServiceError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(b) = self.build.take() {
            b.abort();
        }
        self.server.await.map_err(|_| ServiceError::Aborted)??;
        Ok(())
    }

    /// Serves until the server task ends.
    pub async fn join(&mut self) -> Result<(), ServiceError> {
        (&mut self.server).await.map_err(|_| ServiceError::Aborted)??;
        Ok(())
    }
}

/// Binds, then serves. A model file is loaded before the socket accepts
/// requests; pages and inline pairs are embedded in the background while
/// requests get 503.
pub async fn start(
    config: ServiceConfig,
    registry: Arc<EmbedderRegistry>,
) -> Result<RunningService, ServiceError> {
    let service = Service::new(&config)?;
    let mode = config.mode()?;
    if let Mode::FaqModel(_) = mode {
        service.initialize(&config, registry.clone()).await?;
    }
    let listener = TcpListener::bind(config.bind_address)
        .await
        .map_err(|source| ServiceError::Bind {
            addr: config.bind_address,
            source,
        })?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = service.router();
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    let build = match mode {
        Mode::FaqWeb(_) | Mode::FaqCustom(_) => {
            let service = service.clone();
            Some(tokio::spawn(async move { service.initialize(&config, registry).await }))
        }
        _ => None,
    };
    tracing::info!(%addr, mode = service.mode(), "listening");
    Ok(RunningService {
        addr,
        service,
        shutdown: Some(tx),
        server,
        build,
    })
}
