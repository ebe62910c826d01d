//! Blocking JSON client for OpenAI-compatible endpoints.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde_json::Value;

use crate::error::{Error, Result};

pub const API_KEY_ENV: &str = "SLIMRAG_API_KEY";
pub const API_BASE_ENV: &str = "SLIMRAG_API_BASE";
pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub base_url: String,
    pub api_key: String,
}

impl Endpoint {
    /// Credentials come only from the environment.
    pub fn from_env() -> Result<Self> {
        let api_key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or(Error::MissingEnv(API_KEY_ENV))?;
        let base_url = std::env::var(API_BASE_ENV)
            .ok()
            .filter(|b| !b.trim().is_empty())
            .unwrap_or_else(|| DEFAULT_API_BASE.to_owned());
        Ok(Endpoint { base_url, api_key })
    }
}

/// Shared pacing: consecutive requests start at least `min_interval` apart
/// across every thread using the client.
#[derive(Debug)]
struct Pacer {
    min_interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl Pacer {
    fn wait(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let sleep_for = {
            let mut slot = self.next_slot.lock().unwrap_or_else(|p| p.into_inner());
            let now = Instant::now();
            let start = slot.map_or(now, |s| s.max(now));
            *slot = Some(start + self.min_interval);
            start - now
        };
        if !sleep_for.is_zero() {
            std::thread::sleep(sleep_for);
        }
    }
}

#[derive(Debug)]
pub struct HttpClient {
    endpoint: Endpoint,
    agent: ureq::Agent,
    max_attempts: u32,
    pacer: Pacer,
}

impl HttpClient {
    pub fn new(endpoint: Endpoint) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpClient {
            endpoint,
            agent,
            max_attempts: 3,
            pacer: Pacer {
                min_interval: Duration::ZERO,
                next_slot: Mutex::new(None),
            },
        }
    }

    pub fn with_max_attempts(mut self, n: u32) -> Self {
        self.max_attempts = n.max(1);
        self
    }

    /// Cap the request rate shared by all callers of this client.
    pub fn with_requests_per_second(mut self, rps: f64) -> Self {
        self.pacer.min_interval = if rps > 0.0 {
            Duration::from_secs_f64(1.0 / rps)
        } else {
            Duration::ZERO
        };
        self
    }

    pub fn base_url(&self) -> &str {
        &self.endpoint.base_url
    }

    /// POST `body` to `{base}/{path}`; retries transport errors, 429 and 5xx.
    pub fn post_json(&self, path: &str, body: &Value) -> Result<Value> {
        let url = format!("{}/{}", self.endpoint.base_url.trim_end_matches('/'), path);
        let mut last_err = String::new();
        for attempt in 0..self.max_attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(250 << attempt.min(6)));
            }
            self.pacer.wait();
            let sent = self
                .agent
                .post(&url)
                .header("Authorization", &format!("Bearer {}", self.endpoint.api_key))
                .send_json(body);
            let mut resp = match sent {
                Ok(r) => r,
                Err(e) => {
                    last_err = format!("POST {url}: {e}");
                    continue;
                }
            };
            let status = resp.status().as_u16();
            if status == 429 || status >= 500 {
                last_err = format!("POST {url}: HTTP {status}");
                continue;
            }
            if !(200..300).contains(&status) {
                let text = resp.body_mut().read_to_string().unwrap_or_default();
                return Err(Error::Provider(format!("POST {url}: HTTP {status}: {text}")));
            }
            return resp
                .body_mut()
                .read_json::<Value>()
                .map_err(|e| Error::Provider(format!("POST {url}: invalid JSON response: {e}")));
        }
        Err(Error::Provider(format!(
            "{last_err} (gave up after {} attempts)",
            self.max_attempts
        )))
    }
}
