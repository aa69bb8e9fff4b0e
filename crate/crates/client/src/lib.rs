//! Thin typed client for the postgen HTTP service.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Serialize)]
pub struct GenerateRequest {
    pub api_url: String,
    pub count: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct GenerateResponse {
    pub script_text: String,
    pub download_id: String,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("service returned {status}: {message}")]
    Api { status: u16, message: String },
    #[error("transport error: {0}")]
    Transport(String),
}

pub struct ApiClient {
    base_url: String,
    http: reqwest::Client,
}

impl ApiClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        let base_url = base_url.into().trim_end_matches('/').to_string();
        ApiClient { base_url, http: reqwest::Client::new() }
    }

    pub async fn usage(&self) -> Result<serde_json::Value, ClientError> {
        let resp = self
            .http
            .get(&self.base_url)
            .send()
            .await
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        resp.json().await.map_err(|e| ClientError::Transport(e.to_string()))
    }

    pub async fn generate(&self, req: &GenerateRequest) -> Result<GenerateResponse, ClientError> {
        let resp = self
            .http
            .post(format!("{}/chat", self.base_url))
            .json(req)
            .send()
            .await
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let message = api_message(resp).await;
            return Err(ClientError::Api { status, message });
        }
        resp.json().await.map_err(|e| ClientError::Transport(e.to_string()))
    }

    /// Fetch exported collection bytes, exactly as the service stores them.
    pub async fn download(&self, id: &str) -> Result<Vec<u8>, ClientError> {
        let resp = self
            .http
            .get(format!("{}/download/{id}", self.base_url))
            .send()
            .await
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let message = api_message(resp).await;
            return Err(ClientError::Api { status, message });
        }
        resp.bytes()
            .await
            .map(|b| b.to_vec())
            .map_err(|e| ClientError::Transport(e.to_string()))
    }
}

async fn api_message(resp: reqwest::Response) -> String {
    match resp.json::<serde_json::Value>().await {
        Ok(v) => v
            .get("error")
            .and_then(serde_json::Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| v.to_string()),
        Err(_) => "no error detail".to_string(),
    }
}
