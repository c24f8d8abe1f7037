//! Clients for the fill-mask and pair-scoring services.
//!
//! Wire format (JSON over HTTP):
//!
//! * `POST /fill` `{"tokens":[..],"blank_index":i,"top_k":k}` returns
//!   `{"entries":[[token,prob],..],"residual_mass":r}`. Unfilled blank
//!   positions carry [`BLANK_TOKEN`].
//! * `POST /score` `{"sent_a":[..],"sent_b":[..]}` returns
//!   `{"accept_prob":p}`.
//! * `GET /healthz` returns any 2xx when the service is up.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TokenDistribution;

/// Placeholder for a position the backend is asked to (eventually) fill.
pub const BLANK_TOKEN: &str = "[BLANK]";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend returned HTTP {0}")]
    Status(u16),
    #[error("backend protocol error: {0}")]
    Protocol(String),
}

impl BackendError {
    /// Transport failures and 5xx responses are worth retrying.
    fn is_transient(&self) -> bool {
        match self {
            BackendError::Unreachable(_) => true,
            BackendError::Status(code) => *code >= 500,
            BackendError::Protocol(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillRequest {
    pub tokens: Vec<String>,
    pub blank_index: usize,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillResponse {
    pub entries: Vec<(String, f64)>,
    pub residual_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub sent_a: Vec<String>,
    pub sent_b: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub accept_prob: f64,
}

/// Predicts a word-level distribution for the leftmost blank.
pub trait FillMaskClient: Send + Sync {
    fn fill(&self, request: &FillRequest) -> Result<TokenDistribution, BackendError>;
}

/// Scores whether `sent_b` is an acceptable augmentation of `sent_a`.
pub trait PairScorerClient: Send + Sync {
    fn accept_prob(&self, sent_a: &[String], sent_b: &[String]) -> Result<f64, BackendError>;
}

impl<F> FillMaskClient for F
where
    F: Fn(&FillRequest) -> Result<TokenDistribution, BackendError> + Send + Sync,
{
    fn fill(&self, request: &FillRequest) -> Result<TokenDistribution, BackendError> {
        self(request)
    }
}

impl<F> PairScorerClient for F
where
    F: Fn(&[String], &[String]) -> Result<f64, BackendError> + Send + Sync,
{
    fn accept_prob(&self, sent_a: &[String], sent_b: &[String]) -> Result<f64, BackendError> {
        self(sent_a, sent_b)
    }
}

/// HTTP client for both services, sharing one base URL.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    base_url: String,
    agent: ureq::Agent,
    retries: u32,
    backoff: Duration,
}

impl HttpBackend {
    pub const DEFAULT_RETRIES: u32 = 2;

    pub fn new(base_url: impl Into<String>) -> Self {
        Self::with_timeout(base_url, Duration::from_secs(30))
    }

    pub fn with_timeout(base_url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpBackend {
            base_url: base_url.into().trim_end_matches('/').to_owned(),
            agent,
            retries: Self::DEFAULT_RETRIES,
            backoff: Duration::from_millis(200),
        }
    }

    pub fn retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Probes `GET /healthz` once, without retries.
    pub fn health(&self) -> Result<(), BackendError> {
        self.agent
            .get(format!("{}/healthz", self.base_url))
            .call()
            .map(drop)
            .map_err(map_ureq)
    }

    fn with_retries<T>(
        &self,
        mut call: impl FnMut() -> Result<T, BackendError>,
    ) -> Result<T, BackendError> {
        let mut attempt = 0;
        loop {
            match call() {
                Err(e) if e.is_transient() && attempt < self.retries => {
                    log::debug!("backend call failed ({e}), retrying");
                    thread::sleep(self.backoff * 2u32.pow(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let url = format!("{}{path}", self.base_url);
        self.with_retries(|| {
            let mut resp = self.agent.post(&url).send_json(body).map_err(map_ureq)?;
            resp.body_mut()
                .read_json::<Resp>()
                .map_err(|e| BackendError::Protocol(e.to_string()))
        })
    }
}

fn map_ureq(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::StatusCode(code) => BackendError::Status(code),
        ureq::Error::Json(e) => BackendError::Protocol(e.to_string()),
        other => BackendError::Unreachable(other.to_string()),
    }
}

impl FillMaskClient for HttpBackend {
    fn fill(&self, request: &FillRequest) -> Result<TokenDistribution, BackendError> {
        let resp: FillResponse = self.post("/fill", request)?;
        TokenDistribution::new(resp.entries, resp.residual_mass)
            .map_err(|e| BackendError::Protocol(e.to_string()))
    }
}

impl PairScorerClient for HttpBackend {
    fn accept_prob(&self, sent_a: &[String], sent_b: &[String]) -> Result<f64, BackendError> {
        let req = ScoreRequest {
            sent_a: sent_a.to_vec(),
            sent_b: sent_b.to_vec(),
        };
        let resp: ScoreResponse = self.post("/score", &req)?;
        if !resp.accept_prob.is_finite() || !(0.0..=1.0).contains(&resp.accept_prob) {
            return Err(BackendError::Protocol(format!(
                "accept_prob {} outside [0, 1]",
                resp.accept_prob
            )));
        }
        Ok(resp.accept_prob)
    }
}
