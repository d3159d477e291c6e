//! Language-model port: a remote chat-completion client, a fallback that is
//! always unavailable (callers then use their deterministic templates), and a
//! scripted double for tests.

use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::gate::Gate;

pub const DEFAULT_TIMEOUT_SECONDS: u64 = 20;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_MODEL: &str = "deepseek-chat";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PortError {
    #[error("language model unavailable: {0}")]
    Unavailable(String),
    #[error("language model request timed out")]
    Timeout,
    #[error("language model request failed: {0}")]
    Failed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnRole {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: TurnRole,
    pub text: String,
}

impl ChatTurn {
    pub fn user(text: impl Into<String>) -> ChatTurn {
        ChatTurn {
            role: TurnRole::User,
            text: text.into(),
        }
    }
}

pub trait LanguageModelPort: Send + Sync {
    /// Completes a conversation; `max_length` bounds the reply in chars.
    fn complete(&self, system_prompt: &str, turns: &[ChatTurn], max_length: usize) -> Result<String, PortError>;

    fn name(&self) -> &'static str;
}

/// Used when no endpoint is configured.
#[derive(Debug, Clone, Copy, Default)]
pub struct FallbackPort;

impl LanguageModelPort for FallbackPort {
    fn complete(&self, _: &str, _: &[ChatTurn], _: usize) -> Result<String, PortError> {
        Err(PortError::Unavailable("no language model endpoint configured".into()))
    }

    fn name(&self) -> &'static str {
        "fallback"
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    /// Reads `LM_ENDPOINT`, `LM_API_KEY`, `LM_TIMEOUT_SECONDS` and `LM_MODEL`;
    /// `None` when no endpoint is set.
    pub fn from_env() -> Option<RemoteConfig> {
        let endpoint = std::env::var("LM_ENDPOINT").ok().filter(|s| !s.trim().is_empty())?;
        let timeout = std::env::var("LM_TIMEOUT_SECONDS")
            .ok()
            .and_then(|s| s.trim().parse::<u64>().ok())
            .unwrap_or(DEFAULT_TIMEOUT_SECONDS);
        Some(RemoteConfig {
            endpoint,
            api_key: std::env::var("LM_API_KEY").ok().filter(|s| !s.is_empty()),
            model: std::env::var("LM_MODEL").unwrap_or_else(|_| DEFAULT_MODEL.to_string()),
            timeout: Duration::from_secs(timeout),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        })
    }
}

/// OpenAI-style chat-completions client.
pub struct RemotePort {
    config: RemoteConfig,
    client: OnceLock<reqwest::blocking::Client>,
    gate: Gate,
}

impl RemotePort {
    pub fn new(config: RemoteConfig) -> RemotePort {
        let gate = Gate::new(config.max_in_flight);
        RemotePort {
            config,
            client: OnceLock::new(),
            gate,
        }
    }

    fn client(&self) -> Result<&reqwest::blocking::Client, PortError> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let c = reqwest::blocking::Client::builder()
            .timeout(self.config.timeout)
            .build()
            .map_err(|e| PortError::Unavailable(e.to_string()))?;
        Ok(self.client.get_or_init(|| c))
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, PortError> {
        let mut req = self.client()?.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                PortError::Timeout
            } else {
                PortError::Unavailable(e.to_string())
            }
        })?;
        if !resp.status().is_success() {
            return Err(PortError::Failed(format!("status {}", resp.status())));
        }
        let v: serde_json::Value = resp.json().map_err(|e| PortError::Failed(e.to_string()))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| PortError::Failed("response has no message content".into()))
    }
}

impl LanguageModelPort for RemotePort {
    fn complete(&self, system_prompt: &str, turns: &[ChatTurn], max_length: usize) -> Result<String, PortError> {
        let mut messages = vec![json!({"role": "system", "content": system_prompt})];
        messages.extend(turns.iter().map(|t| json!({"role": t.role, "content": t.text})));
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            // rough chars-to-tokens bound
            "max_tokens": max_length.div_ceil(2).max(16),
        });
        let _slot = self.gate.enter();
        let out = match self.attempt(&body) {
            Ok(text) => Ok(text),
            Err(first) => {
                tracing::warn!(error = %first, "language model request failed, retrying once");
                self.attempt(&body)
            }
        }?;
        Ok(out.chars().take(max_length).collect())
    }

    fn name(&self) -> &'static str {
        "remote"
    }
}

/// Remote port when `LM_ENDPOINT` is set, fallback otherwise.
pub fn port_from_env() -> Arc<dyn LanguageModelPort> {
    match RemoteConfig::from_env() {
        Some(cfg) => Arc::new(RemotePort::new(cfg)),
        None => Arc::new(FallbackPort),
    }
}

/// Replays canned replies in order and records every request.
#[derive(Default)]
pub struct ScriptedPort {
    replies: Mutex<VecDeque<Result<String, PortError>>>,
    requests: Mutex<Vec<(String, Vec<ChatTurn>)>>,
}

impl ScriptedPort {
    pub fn new(replies: impl IntoIterator<Item = Result<String, PortError>>) -> ScriptedPort {
        ScriptedPort {
            replies: Mutex::new(replies.into_iter().collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<(String, Vec<ChatTurn>)> {
        self.requests.lock().clone()
    }
}

impl LanguageModelPort for ScriptedPort {
    fn complete(&self, system_prompt: &str, turns: &[ChatTurn], max_length: usize) -> Result<String, PortError> {
        self.requests.lock().push((system_prompt.to_string(), turns.to_vec()));
        let next = self
            .replies
            .lock()
            .pop_front()
            .unwrap_or_else(|| Err(PortError::Unavailable("script exhausted".into())));
        next.map(|s| s.chars().take(max_length).collect())
    }

    fn name(&self) -> &'static str {
        "scripted"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Serves `responses` to successive connections, one each.
    fn serve(responses: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let Ok((stream, _)) = listener.accept() else { return };
                counter.fetch_add(1, Ordering::SeqCst);
                let mut reader = BufReader::new(stream);
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                let mut stream = reader.into_inner();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        (format!("http://{addr}/v1/chat/completions"), hits)
    }

    fn config(endpoint: String) -> RemoteConfig {
        RemoteConfig {
            endpoint,
            api_key: Some("k".into()),
            model: "m".into(),
            timeout: Duration::from_secs(5),
            max_in_flight: 2,
        }
    }

    #[test]
    fn remote_reads_chat_completion() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"a quiet lane"}}]}"#;
        let (url, hits) = serve(vec![(200, body.into())]);
        let port = RemotePort::new(config(url));
        assert_eq!(
            port.complete("sys", &[ChatTurn::user("hi")], 100).unwrap(),
            "a quiet lane"
        );
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn remote_retries_once() {
        let ok = r#"{"choices":[{"message":{"content":"second try"}}]}"#;
        let (url, hits) = serve(vec![(500, "{}".into()), (200, ok.into())]);
        let port = RemotePort::new(config(url));
        assert_eq!(port.complete("s", &[], 100).unwrap(), "second try");
        assert_eq!(hits.load(Ordering::SeqCst), 2);

        let (url, hits) = serve(vec![(500, "{}".into()), (503, "{}".into())]);
        let port = RemotePort::new(config(url));
        assert!(matches!(port.complete("s", &[], 100), Err(PortError::Failed(_))));
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn unreachable_endpoint_is_unavailable() {
        let port = RemotePort::new(config("http://127.0.0.1:9/none".into()));
        assert!(matches!(port.complete("s", &[], 10), Err(PortError::Unavailable(_))));
    }

    #[test]
    fn fallback_is_always_unavailable() {
        assert!(matches!(
            FallbackPort.complete("s", &[], 10),
            Err(PortError::Unavailable(_))
        ));
    }

    #[test]
    fn scripted_port_replays_and_truncates() {
        let p = ScriptedPort::new([Ok("abcdef".to_string())]);
        assert_eq!(p.complete("sys", &[ChatTurn::user("q")], 3).unwrap(), "abc");
        assert!(p.complete("sys", &[], 3).is_err());
        assert_eq!(p.requests().len(), 2);
    }
}
