//! Uniform completion interface over interchangeable backends (remote HTTP
//! chat endpoint, replay fixtures, deterministic rule engine), with per-stage
//! call accounting.

mod http;
mod replay;
mod rule;

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::LlmConfig;
use crate::error::{Error, Result};
use crate::types::Stage;

pub use http::HttpBackend;
pub use replay::{ReplayBackend, RecordingBackend};
pub use rule::RuleBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

/// An append-only conversation bound to one pipeline stage and one owner
/// (the API or function the dialogue is about, for per-API accounting).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmDialogue {
    pub messages: Vec<Message>,
    pub stage: Stage,
    pub owner: String,
}

impl LlmDialogue {
    pub fn new(stage: Stage, owner: impl Into<String>) -> Self {
        LlmDialogue {
            messages: Vec::new(),
            stage,
            owner: owner.into(),
        }
    }

    fn push(&mut self, role: Role, content: impl Into<String>) -> Result<()> {
        let ok = match role {
            Role::System => self.messages.is_empty(),
            Role::User => !matches!(self.last_role(), Some(Role::User)),
            Role::Assistant => matches!(self.last_role(), Some(Role::User)),
        };
        if !ok {
            return Err(Error::Dialogue(format!(
                "cannot append {} after {:?}",
                role.as_str(),
                self.last_role().map(|r| r.as_str())
            )));
        }
        self.messages.push(Message {
            role,
            content: content.into(),
        });
        Ok(())
    }

    pub fn push_system(&mut self, content: impl Into<String>) -> Result<()> {
        self.push(Role::System, content)
    }

    pub fn push_user(&mut self, content: impl Into<String>) -> Result<()> {
        self.push(Role::User, content)
    }

    pub fn push_assistant(&mut self, content: impl Into<String>) -> Result<()> {
        self.push(Role::Assistant, content)
    }

    pub fn last_role(&self) -> Option<Role> {
        self.messages.last().map(|m| m.role)
    }

    /// Convenience for the common single-user-message dialogues the prompt
    /// builders produce.
    pub fn single_user(stage: Stage, owner: impl Into<String>, content: impl Into<String>) -> Self {
        let mut d = LlmDialogue::new(stage, owner);
        d.push_user(content).expect("first user message is always valid");
        d
    }
}

/// Stable content hash over (role, whitespace-normalized content) pairs;
/// the replay-fixture key. Stage and owner do not participate.
pub fn canonical_hash(dialogue: &LlmDialogue) -> String {
    let mut hasher = Sha256::new();
    for message in &dialogue.messages {
        hasher.update(message.role.as_str().as_bytes());
        hasher.update([0x1f]);
        let normalized = message.content.split_whitespace().collect::<Vec<_>>().join(" ");
        hasher.update(normalized.as_bytes());
        hasher.update([0x1e]);
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_id: String,
}

/// Invocation counts per stage and per owner. The stage totals always equal
/// the sums over owners.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CallLedger {
    pub counters: BTreeMap<Stage, u64>,
    pub per_api: BTreeMap<String, BTreeMap<Stage, u64>>,
}

impl CallLedger {
    fn record(&mut self, stage: Stage, owner: &str) {
        *self.counters.entry(stage).or_insert(0) += 1;
        *self
            .per_api
            .entry(owner.to_string())
            .or_default()
            .entry(stage)
            .or_insert(0) += 1;
    }

    pub fn stage_total(&self, stage: Stage) -> u64 {
        self.counters.get(&stage).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counters.values().sum()
    }

    pub fn api_total(&self, owner: &str, stage: Stage) -> u64 {
        self.per_api
            .get(owner)
            .and_then(|m| m.get(&stage))
            .copied()
            .unwrap_or(0)
    }

    /// Total calls for one owner across all stages.
    pub fn api_calls(&self, owner: &str) -> u64 {
        self.per_api
            .get(owner)
            .map(|m| m.values().sum())
            .unwrap_or(0)
    }

    pub fn conserved(&self) -> bool {
        let mut by_stage: BTreeMap<Stage, u64> = BTreeMap::new();
        for stages in self.per_api.values() {
            for (stage, n) in stages {
                *by_stage.entry(*stage).or_insert(0) += n;
            }
        }
        Stage::ALL
            .iter()
            .all(|s| by_stage.get(s).copied().unwrap_or(0) == self.stage_total(*s))
    }
}

/// A completion provider. Implementations must be deterministic given
/// identical inputs unless they wrap a live service.
pub trait Backend: Send + Sync {
    fn complete(&self, dialogue: &LlmDialogue, params: &CompletionParams) -> Result<String>;
    fn name(&self) -> &'static str;
}

/// Shared front door: validates dialogues, resolves per-stage parameters,
/// delegates to the configured backend, and keeps the call ledger.
pub struct Gateway {
    backend: Box<dyn Backend>,
    config: LlmConfig,
    ledger: Mutex<CallLedger>,
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>, config: LlmConfig) -> Self {
        Gateway {
            backend,
            config,
            ledger: Mutex::new(CallLedger::default()),
        }
    }

    /// Builds the backend named in the config.
    pub fn from_config(config: &LlmConfig) -> Result<Self> {
        let inner: Box<dyn Backend> = match config.backend.as_str() {
            "http" => Box::new(HttpBackend::new(config)?),
            "replay" => {
                let path = config.fixtures_path.as_ref().ok_or_else(|| {
                    Error::Config("replay backend requires llm.fixtures_path".into())
                })?;
                Box::new(ReplayBackend::load(path)?)
            }
            "rule" => Box::new(RuleBackend::new(config.rule.clone())),
            other => {
                return Err(Error::Config(format!(
                    "unknown llm backend `{other}` (expected http, replay, or rule)"
                )))
            }
        };
        let backend: Box<dyn Backend> = match &config.record_path {
            Some(path) => Box::new(RecordingBackend::create(inner, path)?),
            None => inner,
        };
        Ok(Gateway::new(backend, config.clone()))
    }

    pub fn params_for(&self, stage: Stage) -> CompletionParams {
        CompletionParams {
            temperature: self
                .config
                .temperature_by_stage
                .get(stage.as_str())
                .copied()
                .unwrap_or(0.0),
            max_tokens: self.config.max_tokens,
            model_id: self.config.model_id.clone(),
        }
    }

    pub fn complete(&self, dialogue: &LlmDialogue) -> Result<String> {
        if dialogue.messages.is_empty() {
            return Err(Error::Dialogue("dialogue is empty".into()));
        }
        if dialogue.last_role() != Some(Role::User) {
            return Err(Error::Dialogue("last message must be from the user".into()));
        }
        let params = self.params_for(dialogue.stage);
        let text = self.backend.complete(dialogue, &params)?;
        self.ledger
            .lock()
            .expect("ledger lock")
            .record(dialogue.stage, &dialogue.owner);
        Ok(text)
    }

    pub fn ledger(&self) -> CallLedger {
        self.ledger.lock().expect("ledger lock").clone()
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }
}
