//! Blocking JSON-over-HTTP client shared by the remote tagger and the
//! remote masked-LM backend.

use std::io::Read;
use std::thread;
use std::time::Duration;

/// Retry schedule for retriable transport failures.
///
/// The first attempt is followed by up to `max_retries` retries, waiting
/// `base_delay`, `2 * base_delay`, `4 * base_delay`, ... between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(200),
        }
    }
}

impl RetryPolicy {
    pub fn delay_before_retry(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum PostError {
    /// Connection refused, timeout, 5xx. Retries exhausted.
    Transport(String),
    /// The server answered with a 4xx status.
    Rejected { status: u16, body: String },
}

pub(crate) struct JsonClient {
    agent: ureq::Agent,
    endpoint: String,
    retry: RetryPolicy,
}

impl JsonClient {
    pub(crate) fn new(endpoint: impl Into<String>, timeout: Duration, retry: RetryPolicy) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        JsonClient {
            agent: config.into(),
            endpoint: endpoint.into(),
            retry,
        }
    }

    pub(crate) fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// POST `body` and return the response body, retrying transport failures.
    pub(crate) fn post(&self, body: &str) -> Result<String, PostError> {
        let mut attempt = 0;
        loop {
            match self.post_once(body) {
                Err(PostError::Transport(msg)) if attempt < self.retry.max_retries => {
                    log_retry(&self.endpoint, attempt, &msg);
                    thread::sleep(self.retry.delay_before_retry(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn post_once(&self, body: &str) -> Result<String, PostError> {
        let response = self
            .agent
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .send(body);
        let mut response = match response {
            Ok(r) => r,
            Err(e) => return Err(PostError::Transport(e.to_string())),
        };
        let status = response.status().as_u16();
        let mut text = String::new();
        response
            .body_mut()
            .as_reader()
            .read_to_string(&mut text)
            .map_err(|e| PostError::Transport(e.to_string()))?;
        match status {
            200..=299 => Ok(text),
            400..=499 => Err(PostError::Rejected { status, body: text }),
            _ => Err(PostError::Transport(format!("HTTP {status}: {text}"))),
        }
    }
}

fn log_retry(endpoint: &str, attempt: u32, msg: &str) {
    eprintln!("warning: {endpoint}: attempt {} failed ({msg}), retrying", attempt + 1);
}
