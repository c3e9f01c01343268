//! LLM clients: a chat-completion HTTP client for real endpoints and a
//! fixture-driven deterministic mock used by tests and offline runs.

use serde::Deserialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("llm endpoint error: {0}")]
    Http(String),
    #[error("llm response has no message content")]
    EmptyResponse,
    #[error("mock fixture exhausted after {calls} calls")]
    FixtureExhausted { calls: usize },
    #[error("cannot read fixture: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture is not valid JSON: {0}")]
    Fixture(#[from] serde_json::Error),
}

/// A completion backend. Implementations must be safe for concurrent calls.
pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, LlmError>;
}

pub fn prompt_hash(prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Fixture file: `{"responses": [...], "by_hash": {"<sha256>": "..."}}`.
/// Hash lookups win; otherwise responses are served in call order.
#[derive(Debug, Deserialize, Default)]
struct Fixture {
    #[serde(default)]
    responses: Vec<String>,
    #[serde(default)]
    by_hash: HashMap<String, String>,
}

pub struct MockLlmClient {
    fixture: Fixture,
    cursor: Mutex<usize>,
}

impl MockLlmClient {
    pub fn from_fixture_file(path: &Path) -> Result<MockLlmClient, LlmError> {
        let text = std::fs::read_to_string(path)?;
        let fixture: Fixture = serde_json::from_str(&text)?;
        Ok(MockLlmClient { fixture, cursor: Mutex::new(0) })
    }

    pub fn from_responses(responses: Vec<String>) -> MockLlmClient {
        MockLlmClient {
            fixture: Fixture { responses, by_hash: HashMap::new() },
            cursor: Mutex::new(0),
        }
    }

    pub fn with_hashed(mut self, hash: &str, response: &str) -> MockLlmClient {
        self.fixture.by_hash.insert(hash.to_string(), response.to_string());
        self
    }
}

impl LlmClient for MockLlmClient {
    fn complete(&self, prompt: &str, _temperature: f64) -> Result<String, LlmError> {
        if let Some(hit) = self.fixture.by_hash.get(&prompt_hash(prompt)) {
            return Ok(hit.clone());
        }
        let mut cursor = self.cursor.lock().expect("mock cursor poisoned");
        match self.fixture.responses.get(*cursor) {
            Some(r) => {
                *cursor += 1;
                Ok(r.clone())
            }
            None => Err(LlmError::FixtureExhausted { calls: *cursor }),
        }
    }
}

/// Chat-completion wire protocol client: posts
/// `{model, messages[{role, content}], temperature}` and reads
/// `{choices[{message{content}}]}`.
pub struct HttpLlmClient {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpLlmClient {
    pub fn new(endpoint: &str, model: &str, api_key: Option<&str>) -> Result<HttpLlmClient, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| LlmError::Http(e.to_string()))?;
        Ok(HttpLlmClient {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key: api_key.map(str::to_string),
            client,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, LlmError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        });
        let mut request = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| LlmError::Http(e.to_string()))?;
        if !response.status().is_success() {
            return Err(LlmError::Http(format!(
                "status {} from {}",
                response.status(),
                self.endpoint
            )));
        }
        let parsed: ChatResponse = response.json().map_err(|e| LlmError::Http(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .map(|c| c.trim().to_string())
            .ok_or(LlmError::EmptyResponse)
    }
}
