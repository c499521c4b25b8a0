use std::time::Duration;

use reqwest::Url;

pub const MAX_REDIRECTS: usize = 5;
pub const FETCH_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("not an absolute URL: {0}")]
    InvalidUrl(String),
    #[error("GET {url} returned status {status}")]
    Status { url: String, status: u16 },
    #[error("more than {MAX_REDIRECTS} redirects fetching {url}")]
    TooManyRedirects { url: String },
    #[error("GET {url} timed out")]
    Timeout { url: String },
    #[error("GET {url} failed: {reason}")]
    Transport { url: String, reason: String },
}

/// The URL actually requested. A proxy prefix is prepended verbatim, so
/// `https://proxy.example/` + `https://site/faq` becomes
/// `https://proxy.example/https://site/faq`.
pub fn request_url(url: &str, proxy_prefix: Option<&str>) -> Result<Url, FetchError> {
    Url::parse(url).map_err(|_| FetchError::InvalidUrl(url.to_string()))?;
    let full = match proxy_prefix {
        Some(p) => format!("{p}{url}"),
        None => url.to_string(),
    };
    Url::parse(&full).map_err(|_| FetchError::InvalidUrl(full))
}

pub async fn fetch_url(url: &str, proxy_prefix: Option<&str>) -> Result<Vec<u8>, FetchError> {
    let target = request_url(url, proxy_prefix)?;
    let url = target.to_string();
    let client = reqwest::Client::builder()
        .redirect(reqwest::redirect::Policy::limited(MAX_REDIRECTS))
        .timeout(FETCH_TIMEOUT)
        .build()
        .map_err(|e| FetchError::Transport { url: url.clone(), reason: e.to_string() })?;
    let classify = |e: reqwest::Error| {
        if e.is_redirect() {
            FetchError::TooManyRedirects { url: url.clone() }
        } else if e.is_timeout() {
            FetchError::Timeout { url: url.clone() }
        } else {
            FetchError::Transport { url: url.clone(), reason: e.to_string() }
        }
    };
    let response = client.get(target.clone()).send().await.map_err(classify)?;
    let status = response.status();
    if !status.is_success() {
        return Err(FetchError::Status { url: url.clone(), status: status.as_u16() });
    }
    Ok(response.bytes().await.map_err(classify)?.to_vec())
}
