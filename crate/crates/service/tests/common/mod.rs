#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use axum::extract::{Path as UrlPath, State};
use axum::http::{StatusCode, Uri};
use axum::response::{IntoResponse, Redirect, Response};
use axum::routing::{get, post};
use axum::{Form, Json, Router};
use faqmatch_core::{Embedder, EmbedderSpec, EmbeddingVector, NgramHashEmbedder};
use serde_json::{json, Value};

pub fn core_fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(rel)
}

pub async fn serve(app: Router) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

/// Reference knowledge engine. Every route reads the `question` field.
pub fn mock_engine() -> Router {
    async fn answer(Form(f): Form<Vec<(String, String)>>) -> Json<Value> {
        let q = f.iter().find(|(k, _)| k == "question").map(|(_, v)| v.clone()).unwrap_or_default();
        Json(json!({ "answer": format!("echo: {q}") }))
    }
    async fn answer_json(Json(v): Json<Value>) -> Json<Value> {
        Json(json!({ "answer": format!("echo: {}", v["q"].as_str().unwrap_or("")) }))
    }
    Router::new()
        .route("/single", post(|| async { Json(json!({ "answer": "42" })) }))
        .route("/echo", post(answer))
        .route("/echo-json", post(answer_json))
        .route("/multi", post(|| async { Json(json!({ "a": "x", "b": "y" })) }))
        .route("/text", post(|| async { "plain words" }))
        .route("/broken", post(|| async { (StatusCode::INTERNAL_SERVER_ERROR, "boom") }))
        .route(
            "/stall",
            post(|| async {
                tokio::time::sleep(Duration::from_secs(3)).await;
                Json(json!({ "answer": "late" }))
            }),
        )
}

#[derive(Clone, Default)]
pub struct Recorder(pub Arc<Mutex<Vec<String>>>);

impl Recorder {
    pub fn requests(&self) -> Vec<String> {
        self.0.lock().unwrap().clone()
    }
}

/// Static page server that records every request target.
pub fn page_server(pages: Vec<(&'static str, Vec<u8>)>, recorder: Recorder) -> Router {
    async fn hop(UrlPath(n): UrlPath<u32>) -> Redirect {
        Redirect::temporary(&format!("/hop/{}", n + 1))
    }
    async fn chain(UrlPath(n): UrlPath<u32>) -> Response {
        if n == 0 {
            "arrived".into_response()
        } else {
            Redirect::temporary(&format!("/chain/{}", n - 1)).into_response()
        }
    }
    let pages = Arc::new(pages);
    let fallback = move |State(rec): State<Recorder>, uri: Uri| {
        let pages = pages.clone();
        async move {
            let target = uri.path_and_query().map(|p| p.as_str().to_string()).unwrap_or_default();
            rec.0.lock().unwrap().push(target.clone());
            match pages.iter().find(|(p, _)| target.ends_with(p)) {
                Some((_, body)) => ([("content-type", "text/html")], body.clone()).into_response(),
                None => StatusCode::NOT_FOUND.into_response(),
            }
        }
    };
    Router::new()
        .route("/hop/{n}", get(hop))
        .route("/chain/{n}", get(chain))
        .fallback(fallback)
        .with_state(recorder)
}

/// Wraps the baseline embedder; every call blocks until the gate opens.
pub struct GatedEmbedder {
    inner: NgramHashEmbedder,
    spec: EmbedderSpec,
    gate: Gate,
}

#[derive(Clone, Default)]
pub struct Gate(Arc<(Mutex<bool>, Condvar)>);

impl Gate {
    pub fn open(&self) {
        *self.0 .0.lock().unwrap() = true;
        self.0 .1.notify_all();
    }

    fn wait(&self) {
        let mut open = self.0 .0.lock().unwrap();
        while !*open {
            open = self.0 .1.wait(open).unwrap();
        }
    }
}

pub const GATED_ID: &str = "gated-test-embedder";

pub fn gated_registry(gate: Gate) -> faqmatch_core::EmbedderRegistry {
    let mut registry = faqmatch_core::EmbedderRegistry::with_builtins();
    registry.register(GATED_ID, move |spec| {
        Ok(Arc::new(GatedEmbedder {
            inner: NgramHashEmbedder::new(EmbedderSpec::baseline(spec.dimension))?,
            spec: spec.clone(),
            gate: gate.clone(),
        }) as Arc<dyn Embedder>)
    });
    registry
}

impl Embedder for GatedEmbedder {
    fn spec(&self) -> &EmbedderSpec {
        &self.spec
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        self.gate.wait();
        self.inner.embed(text)
    }
}
