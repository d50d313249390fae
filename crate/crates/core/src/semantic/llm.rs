use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Text completion service.
pub trait LlmClient {
    fn complete(&self, prompt: &str) -> Result<String>;
}

/// Returns pre-scripted responses in order and records every prompt.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    responses: Mutex<VecDeque<Result<String>>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedClient {
    pub fn new(responses: impl IntoIterator<Item = String>) -> Self {
        Self::with_results(responses.into_iter().map(Ok))
    }

    /// Scripted results, errors included.
    pub fn with_results(results: impl IntoIterator<Item = Result<String>>) -> Self {
        Self {
            responses: Mutex::new(results.into_iter().collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("prompt log").clone()
    }
}

impl LlmClient for ScriptedClient {
    fn complete(&self, prompt: &str) -> Result<String> {
        self.prompts.lock().expect("prompt log").push(prompt.to_string());
        self.responses
            .lock()
            .expect("script")
            .pop_front()
            .unwrap_or_else(|| Err(Error::Llm("script exhausted".into())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayRecord {
    pub prompt_sha256: String,
    pub response: String,
}

fn prompt_hash(prompt: &str) -> String {
    Sha256::digest(prompt.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Answers prompts from recorded responses keyed by prompt hash.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    records: BTreeMap<String, String>,
}

impl ReplayClient {
    pub fn new(records: Vec<ReplayRecord>) -> Self {
        Self {
            records: records.into_iter().map(|r| (r.prompt_sha256, r.response)).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let records: Vec<ReplayRecord> = serde_json::from_slice(&fs::read(path)?)?;
        Ok(Self::new(records))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl LlmClient for ReplayClient {
    fn complete(&self, prompt: &str) -> Result<String> {
        self.records
            .get(&prompt_hash(prompt))
            .cloned()
            .ok_or_else(|| Error::Llm("no recorded response for this prompt".into()))
    }
}

/// Wraps a client and keeps every successful exchange for later replay.
#[derive(Debug)]
pub struct RecordingClient<C> {
    inner: C,
    log: Mutex<Vec<ReplayRecord>>,
}

impl<C: LlmClient> RecordingClient<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn records(&self) -> Vec<ReplayRecord> {
        self.log.lock().expect("record log").clone()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(&self.records())?)?;
        Ok(())
    }
}

impl<C: LlmClient> LlmClient for RecordingClient<C> {
    fn complete(&self, prompt: &str) -> Result<String> {
        let response = self.inner.complete(prompt)?;
        self.log.lock().expect("record log").push(ReplayRecord {
            prompt_sha256: prompt_hash(prompt),
            response: response.clone(),
        });
        Ok(response)
    }
}

/// OpenAI-compatible chat-completions client configured from the
/// environment: `GESTURE_LLM_ENDPOINT` (full URL), `GESTURE_LLM_API_KEY` and
/// optionally `GESTURE_LLM_MODEL`.
#[derive(Debug, Clone)]
pub struct LiveClient {
    endpoint: String,
    api_key: String,
    model: String,
}

impl LiveClient {
    pub fn new(endpoint: String, api_key: String, model: String) -> Self {
        Self {
            endpoint,
            api_key,
            model,
        }
    }

    /// `None` unless both endpoint and key are set.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var("GESTURE_LLM_ENDPOINT").ok().filter(|s| !s.is_empty())?;
        let api_key = std::env::var("GESTURE_LLM_API_KEY").ok().filter(|s| !s.is_empty())?;
        let model = std::env::var("GESTURE_LLM_MODEL").unwrap_or_else(|_| "gpt-4o-mini".into());
        Some(Self::new(endpoint, api_key, model))
    }
}

impl LlmClient for LiveClient {
    fn complete(&self, prompt: &str) -> Result<String> {
        let body = serde_json::json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{ "role": "user", "content": prompt }],
        });
        let mut resp = ureq::post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| Error::Llm(e.to_string()))?;
        let value: serde_json::Value = resp.body_mut().read_json().map_err(|e| Error::Llm(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Llm("response has no message content".into()))
    }
}
