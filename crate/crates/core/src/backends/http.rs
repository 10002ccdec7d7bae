use std::time::Duration;

use reqwest::blocking::Client;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::BackendError;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
const ATTEMPTS: usize = 2;

/// Joins a base URL and an endpoint path unless the base already names it.
pub fn endpoint_url(base: &str, path: &str) -> String {
    let base = base.trim_end_matches('/');
    let path = path.trim_start_matches('/');
    if base.ends_with(&format!("/{path}")) {
        base.to_string()
    } else {
        format!("{base}/{path}")
    }
}

/// Blocking JSON-over-HTTP client shared by every remote backend.
///
/// Each call has a timeout and is retried once on transport errors, timeouts
/// and 5xx answers. Client errors (4xx) and unparsable bodies fail at once.
#[derive(Debug, Clone)]
pub struct HttpClient {
    client: Client,
    bearer: Option<String>,
}

impl HttpClient {
    pub fn new(timeout: Duration) -> Result<HttpClient, BackendError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport { endpoint: String::new(), message: e.to_string() })?;
        Ok(HttpClient { client, bearer: None })
    }

    /// Sends `Authorization: Bearer <token>` with every request.
    pub fn with_bearer(mut self, token: Option<String>) -> HttpClient {
        self.bearer = token;
        self
    }

    pub fn post_json<Req, Rep>(&self, url: &str, payload: &Req) -> Result<Rep, BackendError>
    where
        Req: Serialize + ?Sized,
        Rep: DeserializeOwned,
    {
        let body = self.post_text(url, payload)?;
        serde_json::from_str(&body).map_err(|e| BackendError::MalformedReply { reason: e.to_string(), body })
    }

    fn post_text<Req: Serialize + ?Sized>(&self, url: &str, payload: &Req) -> Result<String, BackendError> {
        let mut last = None;
        for attempt in 1..=ATTEMPTS {
            match self.attempt(url, payload) {
                Ok(body) => return Ok(body),
                Err((err, retryable)) => {
                    log::warn!("{url} attempt {attempt} failed: {err}");
                    if !retryable {
                        return Err(err);
                    }
                    last = Some(err);
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn attempt<Req: Serialize + ?Sized>(
        &self,
        url: &str,
        payload: &Req,
    ) -> Result<String, (BackendError, bool)> {
        let mut request = self.client.post(url).json(payload);
        if let Some(token) = &self.bearer {
            request = request.bearer_auth(token);
        }
        let transport = |e: reqwest::Error| {
            if e.is_timeout() {
                BackendError::Timeout { endpoint: url.to_string() }
            } else {
                BackendError::Transport { endpoint: url.to_string(), message: e.to_string() }
            }
        };
        let response = request.send().map_err(|e| (transport(e), true))?;
        let status = response.status();
        let body = response.text().map_err(|e| (transport(e), true))?;
        if !status.is_success() {
            let err = BackendError::BadStatus { endpoint: url.to_string(), status: status.as_u16(), body };
            return Err((err, status.is_server_error()));
        }
        Ok(body)
    }
}
