//! HTTP facade over the FAQ matcher, plus the webhook client used in
//! knowledge-engine mode and the page fetcher used in faq-web mode.
//!
//! Endpoints: `POST /ask`, `GET /questions`, `GET /model`, `GET /health`.
//! All responses carry CORS headers for the configured origins.

pub mod config;
pub mod engine;
pub mod fetch;
pub mod server;

pub use config::{ConfigError, Mode, ServiceConfig, DEFAULT_FALLBACK};
pub use engine::{query_engine, BodyEncoding, EngineClient, EngineConfig, EngineError};
pub use fetch::{fetch_url, FetchError};
pub use server::{
    start, AskRequest, AskResponse, ErrorBody, Health, Readiness, RunningService, Service,
    ServiceError,
};
