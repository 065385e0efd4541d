//! Thin async client for the stargraph HTTP service.

use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;

use stargraph_core::api::{
    ConditionsRequest, ConditionsResponse, ErrorBody, ResonanceRequest, ResonanceResponse,
    SolveRequest, SolveResponse,
};
use stargraph_core::{ConvergenceReport, SweepSpec};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("bad server url {0:?}")]
    Url(String),

    #[error(transparent)]
    Http(#[from] reqwest::Error),

    /// The service answered with an error body.
    #[error("server error {status} ({}): {}", body.kind, body.message)]
    Server { status: StatusCode, body: ErrorBody },
}

impl ClientError {
    /// The request itself was rejected (bad input rather than a failed
    /// computation or transport).
    pub fn is_input_error(&self) -> bool {
        matches!(self, ClientError::Server { status, .. } if status.is_client_error())
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Clone, Debug)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is e.g. `http://127.0.0.1:8080`.
    pub fn new(base: &str) -> Result<Self> {
        let base = base.trim_end_matches('/');
        if !(base.starts_with("http://") || base.starts_with("https://")) {
            return Err(ClientError::Url(base.to_string()));
        }
        Ok(Client {
            base: base.to_string(),
            http: reqwest::Client::new(),
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    pub async fn health(&self) -> Result<()> {
        let resp = self.http.get(format!("{}/health", self.base)).send().await?;
        decode::<serde::de::IgnoredAny>(resp).await.map(|_| ())
    }

    pub async fn scenarios(&self) -> Result<Vec<SweepSpec>> {
        let resp = self.http.get(format!("{}/scenarios", self.base)).send().await?;
        decode(resp).await
    }

    pub async fn resonance(&self, req: &ResonanceRequest) -> Result<ResonanceResponse> {
        self.post("resonance", req).await
    }

    pub async fn conditions(&self, req: &ConditionsRequest) -> Result<ConditionsResponse> {
        self.post("conditions", req).await
    }

    pub async fn solve(&self, req: &SolveRequest) -> Result<SolveResponse> {
        self.post("solve", req).await
    }

    pub async fn sweep(&self, spec: &SweepSpec) -> Result<ConvergenceReport> {
        self.post("sweep", spec).await
    }

    async fn post<T: Serialize, R: DeserializeOwned>(&self, path: &str, body: &T) -> Result<R> {
        let resp = self
            .http
            .post(format!("{}/{path}", self.base))
            .json(body)
            .send()
            .await?;
        decode(resp).await
    }
}

async fn decode<R: DeserializeOwned>(resp: reqwest::Response) -> Result<R> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp.json().await?);
    }
    let text = resp.text().await?;
    let body = serde_json::from_str(&text).unwrap_or(ErrorBody {
        kind: "http".into(),
        message: text,
    });
    Err(ClientError::Server { status, body })
}
