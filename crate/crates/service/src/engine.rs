//! Client for external knowledge engines reached over an HTTP webhook.
//!
//! The question is POSTed under a configurable parameter key and the engine
//! answers with a flat JSON object. Each call carries its own deadline and is
//! never retried.

use std::time::Duration;

use reqwest::Url;
use serde::{Deserialize, Serialize};

pub const DEFAULT_QUESTION_KEY: &str = "question";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_millis(2000);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyEncoding {
    /// `application/x-www-form-urlencoded`
    #[default]
    Form,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub webhook_url: String,
    #[serde(default = "default_question_key")]
    pub question_param_key: String,
    #[serde(default)]
    pub response_value_key: Option<String>,
    #[serde(rename = "timeout_ms", with = "millis", default = "default_timeout")]
    pub timeout: Duration,
    #[serde(default)]
    pub body: BodyEncoding,
}

fn default_question_key() -> String {
    DEFAULT_QUESTION_KEY.to_string()
}

fn default_timeout() -> Duration {
    DEFAULT_TIMEOUT
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

impl EngineConfig {
    pub fn new(webhook_url: impl Into<String>) -> Self {
        EngineConfig {
            webhook_url: webhook_url.into(),
            question_param_key: default_question_key(),
            response_value_key: None,
            timeout: DEFAULT_TIMEOUT,
            body: BodyEncoding::Form,
        }
    }

    pub fn validate(&self) -> Result<Url, EngineError> {
        if self.timeout.is_zero() {
            return Err(EngineError::InvalidConfig("timeout must be positive".into()));
        }
        if self.question_param_key.is_empty() {
            return Err(EngineError::InvalidConfig("question_param_key is empty".into()));
        }
        Url::parse(&self.webhook_url)
            .map_err(|e| EngineError::InvalidConfig(format!("webhook_url {:?}: {e}", self.webhook_url)))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("knowledge engine did not answer within {} ms", .0.as_millis())]
    Timeout(Duration),
    #[error("knowledge engine returned status {status}")]
    Status { status: u16, body: String },
    #[error("knowledge engine response has keys {keys:?} and no response_value_key is configured")]
    AmbiguousResponse { keys: Vec<String> },
    #[error("malformed knowledge engine response: {0}")]
    MalformedResponse(String),
    #[error("knowledge engine request failed: {0}")]
    Transport(String),
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
    #[error("question is empty")]
    EmptyQuestion,
}

/// Reusable client; cheap to clone.
#[derive(Debug, Clone)]
pub struct EngineClient {
    config: EngineConfig,
    url: Url,
    http: reqwest::Client,
}

impl EngineClient {
    pub fn new(config: EngineConfig) -> Result<Self, EngineError> {
        let url = config.validate()?;
        let http = reqwest::Client::builder()
            .retry(reqwest::retry::never())
            .build()
            .map_err(|e| EngineError::Transport(e.to_string()))?;
        Ok(EngineClient { config, url, http })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub async fn query(&self, question: &str) -> Result<String, EngineError> {
        if question.trim().is_empty() {
            return Err(EngineError::EmptyQuestion);
        }
        let budget = self.config.timeout;
        tokio::time::timeout(budget, self.exchange(question))
            .await
            .map_err(|_| EngineError::Timeout(budget))?
    }

    async fn exchange(&self, question: &str) -> Result<String, EngineError> {
        let field = [(self.config.question_param_key.as_str(), question)];
        let request = self.http.post(self.url.clone());
        let request = match self.config.body {
            BodyEncoding::Form => request.form(&field),
            BodyEncoding::Json => request.json(&serde_json::Map::from_iter([(
                field[0].0.to_string(),
                serde_json::Value::from(question),
            )])),
        };
        let response = request.send().await.map_err(|e| EngineError::Transport(e.to_string()))?;
        let status = response.status();
        let body = response.bytes().await.map_err(|e| EngineError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(EngineError::Status {
                status: status.as_u16(),
                body: String::from_utf8_lossy(&body).into_owned(),
            });
        }
        extract_value(&body, self.config.response_value_key.as_deref())
    }
}

/// Pulls the answer out of a key-value response body.
pub fn extract_value(body: &[u8], key: Option<&str>) -> Result<String, EngineError> {
    let value: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| EngineError::MalformedResponse(e.to_string()))?;
    let serde_json::Value::Object(map) = value else {
        return Err(EngineError::MalformedResponse("expected a JSON object".into()));
    };
    let value = match key {
        Some(k) => map
            .get(k)
            .ok_or_else(|| EngineError::MalformedResponse(format!("missing key {k:?}")))?,
        None if map.len() == 1 => map.values().next().unwrap(),
        None if map.is_empty() => {
            return Err(EngineError::MalformedResponse("empty object".into()));
        }
        None => {
            return Err(EngineError::AmbiguousResponse {
                keys: map.keys().cloned().collect(),
            })
        }
    };
    match value {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        serde_json::Value::Bool(b) => Ok(b.to_string()),
        other => Err(EngineError::MalformedResponse(format!(
            "answer is not a scalar: {other}"
        ))),
    }
}

pub async fn query_engine(config: &EngineConfig, question: &str) -> Result<String, EngineError> {
    EngineClient::new(config.clone())?.query(question).await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_key_is_the_answer() {
        assert_eq!(extract_value(br#"{"answer": "42"}"#, None).unwrap(), "42");
        assert_eq!(extract_value(br#"{"n": 42}"#, None).unwrap(), "42");
    }

    #[test]
    fn configured_key_wins() {
        let body = br#"{"a": "x", "b": "y"}"#;
        assert_eq!(extract_value(body, Some("b")).unwrap(), "y");
        assert!(matches!(
            extract_value(body, None),
            Err(EngineError::AmbiguousResponse { keys }) if keys == ["a", "b"]
        ));
        assert!(matches!(extract_value(body, Some("c")), Err(EngineError::MalformedResponse(_))));
    }

    #[test]
    fn malformed_bodies() {
        for body in [&b"not json"[..], b"[1]", b"{}", br#"{"a": null}"#, br#"{"a": {"b": 1}}"#] {
            assert!(matches!(extract_value(body, None), Err(EngineError::MalformedResponse(_))));
        }
    }

    #[test]
    fn config_validation() {
        assert!(EngineConfig::new("http://localhost:1/hook").validate().is_ok());
        assert!(EngineConfig::new("/relative").validate().is_err());
        let mut c = EngineConfig::new("http://localhost:1/hook");
        c.timeout = Duration::ZERO;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_from_toml() {
        let c: EngineConfig = toml::from_str(
            "webhook_url = \"http://e/x\"\ntimeout_ms = 1500\nbody = \"json\"",
        )
        .unwrap();
        assert_eq!(c.timeout, Duration::from_millis(1500));
        assert_eq!(c.question_param_key, "question");
        assert_eq!(c.body, BodyEncoding::Json);
    }
}
