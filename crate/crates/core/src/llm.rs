//! Minimal chat-completion client used by the live extractor and repair agent.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

pub const ENV_BASE_URL: &str = "DUPLEX_ENDPOINT";
pub const ENV_API_KEY: &str = "DUPLEX_API_KEY";
pub const ENV_EXTRACT_MODEL: &str = "DUPLEX_EXTRACT_MODEL";
pub const ENV_REPAIR_MODEL: &str = "DUPLEX_REPAIR_MODEL";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("endpoint error: {0}")]
pub struct EndpointError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
}

impl EndpointConfig {
    /// Reads base URL and key from the environment with the given model variable.
    pub fn from_env(model_var: &str, default_model: &str) -> Option<Self> {
        let base_url = std::env::var(ENV_BASE_URL).ok()?;
        Some(EndpointConfig {
            base_url,
            model: std::env::var(model_var).unwrap_or_else(|_| default_model.to_string()),
            api_key: std::env::var(ENV_API_KEY).ok(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ChatClient {
    config: EndpointConfig,
    timeout: Duration,
}

impl ChatClient {
    pub fn new(config: EndpointConfig, timeout: Duration) -> Self {
        ChatClient { config, timeout }
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// Sends one system + user exchange and returns the assistant text.
    pub fn complete(&self, system: &str, user: &str) -> Result<String, EndpointError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .http_status_as_error(true)
            .build()
            .into();
        let mut request = agent.post(&url);
        if let Some(key) = &self.config.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(|e| EndpointError(e.to_string()))?;
        let reply: Value = response.body_mut().read_json().map_err(|e| EndpointError(e.to_string()))?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| EndpointError("response has no choices[0].message.content".into()))
    }
}

/// Body of the first fenced code block, or the whole text when there is none.
pub fn first_fenced_block(text: &str) -> &str {
    let Some(start) = text.find("```") else {
        return text.trim();
    };
    let after = &text[start + 3..];
    // skip an info string such as ```json
    let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
    let body = &after[body_start..];
    match body.find("```") {
        Some(end) => body[..end].trim(),
        None => body.trim(),
    }
}


/// One-shot HTTP server answering chat-completion requests with canned replies.
#[cfg(test)]
pub(crate) mod fake_server {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread::JoinHandle;

    pub struct FakeServer {
        pub url: String,
        handle: JoinHandle<Vec<String>>,
    }

    impl FakeServer {
        /// Waits for all replies to be served and returns the raw requests.
        pub fn join(self) -> Vec<String> {
            self.handle.join().unwrap()
        }
    }

    pub fn serve(replies: Vec<String>) -> FakeServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for reply in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut head = String::new();
                let mut content_length = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap() == 0 {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        content_length = v.trim().parse().unwrap();
                    }
                    head.push_str(&line);
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut body = vec![0u8; content_length];
                reader.read_exact(&mut body).unwrap();
                head.push_str(&String::from_utf8_lossy(&body));
                seen.push(head);
                let payload = serde_json::json!({
                    "choices": [{"message": {"role": "assistant", "content": reply}}]
                })
                .to_string();
                let resp = format!(
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    payload.len(),
                    payload
                );
                let mut stream = reader.into_inner();
                stream.write_all(resp.as_bytes()).unwrap();
            }
            seen
        });
        FakeServer { url, handle }
    }
}
