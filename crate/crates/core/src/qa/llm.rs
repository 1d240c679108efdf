//! Chat endpoint client and completion replay.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::prompt::{build_prompt, PromptTemplate};
use super::QaError;

pub const DEFAULT_KEY_ENV_VAR: &str = "CADQUERY_LLM_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EndpointMode {
    Live,
    /// Completions are read from `<dir>/<replay_key(question)>.md`.
    Replay {
        dir: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatEndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub api_key_env_var: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    /// Minimum spacing between live requests.
    pub min_request_interval_ms: u64,
    pub mode: EndpointMode,
}

impl Default for ChatEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model_name: "gpt-4o".into(),
            api_key_env_var: DEFAULT_KEY_ENV_VAR.into(),
            temperature: 0.0,
            max_tokens: 2048,
            timeout_secs: 120,
            min_request_interval_ms: 0,
            mode: EndpointMode::Live,
        }
    }
}

impl ChatEndpointConfig {
    pub fn replay(dir: impl Into<PathBuf>) -> Self {
        Self {
            mode: EndpointMode::Replay { dir: dir.into() },
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self, QaError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| QaError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| QaError::Config(format!("{}: {e}", path.display())))
    }
}

/// Replay file stem for a question: the first 16 hex digits of its SHA-256.
pub fn replay_key(question: &str) -> String {
    let digest = Sha256::digest(question.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn replay_path(dir: &Path, question: &str) -> PathBuf {
    dir.join(format!("{}.md", replay_key(question)))
}

/// Body of the last fenced code block, or `None` if there is none. The info
/// string after the opening fence is ignored.
pub fn extract_last_code_block(completion: &str) -> Option<String> {
    let mut last = None;
    let mut current: Option<Vec<&str>> = None;
    for line in completion.lines() {
        let fence = line.trim_start().starts_with("```");
        match (&mut current, fence) {
            (None, true) => current = Some(Vec::new()),
            (Some(body), true) => {
                last = Some(body.join("\n"));
                current = None;
            }
            (Some(body), false) => body.push(line),
            (None, false) => {}
        }
    }
    last
}

fn live_completion(prompt: &str, cfg: &ChatEndpointConfig) -> Result<String, QaError> {
    let key = std::env::var(&cfg.api_key_env_var).ok();
    let agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
        .http_status_as_error(false)
        .build()
        .new_agent();
    let url = format!("{}/chat/completions", cfg.base_url.trim_end_matches('/'));
    let body = json!({
        "model": cfg.model_name,
        "temperature": cfg.temperature,
        "max_tokens": cfg.max_tokens,
        "messages": [{"role": "user", "content": prompt}],
    });
    let mut req = agent.post(&url).header("Content-Type", "application/json");
    if let Some(key) = key {
        req = req.header("Authorization", &format!("Bearer {key}"));
    }
    let mut resp = req
        .send(body.to_string())
        .map_err(|e| QaError::Endpoint(format!("POST {url}: {e}")))?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| QaError::Endpoint(format!("reading response: {e}")))?;
    if status != 200 {
        return Err(QaError::Endpoint(format!(
            "HTTP {status}: {}",
            text.chars().take(200).collect::<String>()
        )));
    }
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| QaError::Endpoint(format!("invalid JSON: {e}")))?;
    v["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| QaError::Endpoint("response has no choices[0].message.content".into()))
}

/// Raw completion for `question`, from the endpoint or from the replay
/// directory.
pub fn complete(
    question: &str,
    endpoint: &ChatEndpointConfig,
    template: &PromptTemplate,
) -> Result<String, QaError> {
    match &endpoint.mode {
        EndpointMode::Replay { dir } => {
            let path = replay_path(dir, question);
            std::fs::read_to_string(&path).map_err(|_| QaError::MissingReplay(path))
        }
        EndpointMode::Live => {
            template.validate()?;
            live_completion(&build_prompt(question, template), endpoint)
        }
    }
}

/// Program text generated for `question`: the last fenced block of the
/// completion.
pub fn ask(
    question: &str,
    endpoint: &ChatEndpointConfig,
    template: &PromptTemplate,
) -> Result<String, QaError> {
    let completion = complete(question, endpoint, template)?;
    extract_last_code_block(&completion).ok_or(QaError::NoCodeBlock)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_block_wins() {
        let text = "Think.\n```\nlet a = 1;\n```\nThen:\n```cadq\nsolution = 2;\n```\n";
        assert_eq!(
            extract_last_code_block(text).as_deref(),
            Some("solution = 2;")
        );
    }

    #[test]
    fn prose_only_has_no_block() {
        assert_eq!(extract_last_code_block("The answer is 4."), None);
        assert_eq!(extract_last_code_block("```\nunterminated"), None);
    }

    #[test]
    fn replay_returns_recorded_block() {
        let dir = tempfile::tempdir().unwrap();
        let q = "How many holes?";
        std::fs::write(
            replay_path(dir.path(), q),
            "Count.\n```\nsolution = 4;\n```\n",
        )
        .unwrap();
        let cfg = ChatEndpointConfig::replay(dir.path());
        let t = PromptTemplate::default();
        assert_eq!(ask(q, &cfg, &t).unwrap(), "solution = 4;");
        assert!(matches!(
            ask("other", &cfg, &t),
            Err(QaError::MissingReplay(_))
        ));
    }

    #[test]
    fn replay_key_is_stable() {
        assert_eq!(replay_key("abc"), "ba7816bf8f01cfea");
    }
}
