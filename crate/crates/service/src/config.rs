use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use faqmatch_core::model_store::PairRecord;
use faqmatch_core::EmbedderSpec;
use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_FALLBACK: &str = "I could not find a confident answer to that question.";

pub const ENV_BIND: &str = "FAQMATCH_BIND";
pub const ENV_THRESHOLD: &str = "FAQMATCH_THRESHOLD";
pub const ENV_MODEL: &str = "FAQMATCH_MODEL";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

/// How the service obtains its answers. Exactly one is active.
#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    FaqModel(PathBuf),
    FaqWeb(String),
    FaqCustom(Vec<PairRecord>),
    Engine(EngineConfig),
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::FaqModel(_) => "faq-model",
            Mode::FaqWeb(_) => "faq-web",
            Mode::FaqCustom(_) => "faq-custom",
            Mode::Engine(_) => "engine",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind_address: SocketAddr,
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    #[serde(default)]
    pub faq_url: Option<String>,
    #[serde(default)]
    pub pairs: Option<Vec<PairRecord>>,
    #[serde(default)]
    pub engine: Option<EngineConfig>,
    /// Overrides the knowledge base's stored threshold when set.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// `"*"` admits any origin.
    #[serde(default = "default_origins")]
    pub allowed_origins: Vec<String>,
    #[serde(default)]
    pub proxy_prefix: Option<String>,
    #[serde(default = "default_fallback")]
    pub fallback_message: String,
    /// Embedder for knowledge bases built at startup (faq-web, faq-custom).
    #[serde(default)]
    pub embedder: EmbedderSpec,
}

fn default_bind() -> SocketAddr {
    DEFAULT_BIND.parse().unwrap()
}

fn default_origins() -> Vec<String> {
    vec!["*".to_string()]
}

fn default_fallback() -> String {
    DEFAULT_FALLBACK.to_string()
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind_address: default_bind(),
            model_path: None,
            faq_url: None,
            pairs: None,
            engine: None,
            threshold: None,
            allowed_origins: default_origins(),
            proxy_prefix: None,
            fallback_message: default_fallback(),
            embedder: EmbedderSpec::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Applies `FAQMATCH_BIND`, `FAQMATCH_THRESHOLD` and `FAQMATCH_MODEL`.
    /// A model path from the environment switches the service to faq-model.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(bind) = var(ENV_BIND) {
            self.bind_address = bind
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{ENV_BIND}={bind:?} is not host:port")))?;
        }
        if let Some(t) = var(ENV_THRESHOLD) {
            self.threshold = Some(
                t.parse()
                    .map_err(|_| ConfigError::Invalid(format!("{ENV_THRESHOLD}={t:?} is not a number")))?,
            );
        }
        if let Some(model) = var(ENV_MODEL) {
            self.model_path = Some(model.into());
            self.faq_url = None;
            self.pairs = None;
            self.engine = None;
        }
        Ok(())
    }

    pub fn mode(&self) -> Result<Mode, ConfigError> {
        let mut modes = Vec::new();
        if let Some(p) = &self.model_path {
            modes.push(Mode::FaqModel(p.clone()));
        }
        if let Some(u) = &self.faq_url {
            modes.push(Mode::FaqWeb(u.clone()));
        }
        if let Some(p) = &self.pairs {
            modes.push(Mode::FaqCustom(p.clone()));
        }
        if let Some(e) = &self.engine {
            modes.push(Mode::Engine(e.clone()));
        }
        match modes.len() {
            1 => Ok(modes.pop().unwrap()),
            0 => Err(ConfigError::Invalid(
                "no mode selected: set one of model_path, faq_url, pairs, engine".into(),
            )),
            _ => Err(ConfigError::Invalid(format!(
                "several modes selected: {}",
                modes.iter().map(Mode::name).collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    pub fn validate(&self) -> Result<Mode, ConfigError> {
        if let Some(t) = self.threshold {
            if !(-1.0..=1.0).contains(&t) {
                return Err(ConfigError::Invalid(format!("threshold {t} outside [-1, 1]")));
            }
        }
        if self.allowed_origins.is_empty() {
            return Err(ConfigError::Invalid("allowed_origins is empty".into()));
        }
        let mode = self.mode()?;
        match &mode {
            Mode::FaqCustom(pairs) if pairs.is_empty() => {
                return Err(ConfigError::Invalid("pairs is empty".into()));
            }
            Mode::Engine(e) => {
                e.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            }
            _ => {}
        }
        Ok(mode)
    }
}
