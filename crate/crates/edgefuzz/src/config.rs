//! Run configuration: one JSON file with per-section blocks. Flags override
//! config values; secrets only ever come from the environment.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const API_KEY_ENV: &str = "LLM_API_KEY";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub miner: MinerConfig,
    pub llm: LlmConfig,
    pub target: TargetConfig,
    pub policy: PolicyConfig,
    pub synthesis: SynthesisSettings,
    /// Path to the API catalog JSON consumed by gen/fuzz stages.
    pub catalog: Option<PathBuf>,
    /// Directory stage artifacts are written to.
    pub out_dir: PathBuf,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MinerConfig {
    pub src: Option<PathBuf>,
    pub macros: Vec<String>,
    pub extensions: Vec<String>,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            src: None,
            macros: vec!["TORCH_CHECK".into(), "AT_CHECK".into()],
            extensions: vec![".cc".into(), ".cpp".into(), ".h".into()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// One of `http`, `replay`, `rule`.
    pub backend: String,
    pub base_url: String,
    pub model_id: String,
    /// Stage name -> temperature. Unlisted stages run at 0.
    pub temperature_by_stage: BTreeMap<String, f64>,
    pub max_tokens: u32,
    /// Replay fixture file (JSONL of {hash, response}).
    pub fixtures_path: Option<PathBuf>,
    /// When set, every completed call is appended here as a replay fixture.
    pub record_path: Option<PathBuf>,
    pub rate_limit_per_s: f64,
    pub max_retries: u32,
    pub rule: RuleConfig,
    /// Extra type names admitted beyond the built-in seven.
    pub extra_types: Vec<String>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            backend: "rule".into(),
            base_url: "http://localhost:8000/v1".into(),
            model_id: "gpt-3.5-turbo".into(),
            temperature_by_stage: BTreeMap::new(),
            max_tokens: 1024,
            fixtures_path: None,
            record_path: None,
            rate_limit_per_s: 1.0,
            max_retries: 3,
            rule: RuleConfig::default(),
            extra_types: Vec::new(),
        }
    }
}

/// Settings for the deterministic rule backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    /// Module the generated programs import and call into.
    pub import_module: String,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            import_module: "mocktorch".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetConfig {
    pub interpreter_cmd: Vec<String>,
    pub env: BTreeMap<String, String>,
    pub timeout_s: f64,
    /// Two device names compared by the consistency check, e.g. ["cpu","gpu"].
    pub device_tokens: Option<(String, String)>,
    /// Substrings of stderr that mark a runtime-error-class bug.
    pub runtime_error_patterns: Vec<String>,
    pub consistency_tolerance: f64,
    pub program_extension: String,
    /// Host language name used in prompts.
    pub language: String,
    /// Per-stream capture cap; the tail is kept.
    pub capture_cap_bytes: usize,
    /// Byte budget for extracted error info fed back to the model.
    pub error_info_budget: usize,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig {
            interpreter_cmd: vec!["python3".into()],
            env: BTreeMap::new(),
            timeout_s: 30.0,
            device_tokens: None,
            runtime_error_patterns: vec![
                "INTERNAL ASSERT FAILED".into(),
                "MKL FFT error".into(),
                "cuFFT error".into(),
            ],
            consistency_tolerance: 1e-3,
            program_extension: ".py".into(),
            language: "Python".into(),
            capture_cap_bytes: 64 * 1024,
            error_info_budget: 2048,
        }
    }
}

/// Edge-case selection rates by parameter position.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub rate_pos_1_2: f64,
    pub rate_pos_3_4: f64,
    pub rate_pos_5_plus: f64,
    pub compound_rate: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            rate_pos_1_2: 1.0,
            rate_pos_3_4: 0.25,
            rate_pos_5_plus: 0.125,
            compound_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisSettings {
    pub init_max: u32,
    pub debug_max: u32,
    pub exec_timeout_s: f64,
}

impl Default for SynthesisSettings {
    fn default() -> Self {
        SynthesisSettings {
            init_max: 2,
            debug_max: 3,
            exec_timeout_s: 30.0,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Config = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for (stage, t) in &self.llm.temperature_by_stage {
            if !(0.0..=2.0).contains(t) {
                return Err(Error::Config(format!(
                    "temperature for stage `{stage}` must lie in [0, 2], got {t}"
                )));
            }
        }
        for (name, rate) in [
            ("rate_pos_1_2", self.policy.rate_pos_1_2),
            ("rate_pos_3_4", self.policy.rate_pos_3_4),
            ("rate_pos_5_plus", self.policy.rate_pos_5_plus),
            ("compound_rate", self.policy.compound_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Config(format!(
                    "policy.{name} must lie in [0, 1], got {rate}"
                )));
            }
        }
        if self.synthesis.init_max == 0 || self.synthesis.debug_max == 0 {
            return Err(Error::Config(
                "synthesis.init_max and synthesis.debug_max must be positive".into(),
            ));
        }
        if self.synthesis.exec_timeout_s <= 0.0 || self.target.timeout_s <= 0.0 {
            return Err(Error::Config("timeouts must be positive".into()));
        }
        if self.target.interpreter_cmd.is_empty() {
            return Err(Error::Config("target.interpreter_cmd must not be empty".into()));
        }
        if let Some((a, b)) = &self.target.device_tokens {
            if a == b {
                return Err(Error::Config("device_tokens must be distinct".into()));
            }
        }
        if self.llm.rate_limit_per_s <= 0.0 {
            return Err(Error::Config("llm.rate_limit_per_s must be positive".into()));
        }
        if self.llm.max_tokens == 0 {
            return Err(Error::Config("llm.max_tokens must be positive".into()));
        }
        Ok(())
    }
}

impl Default for Config {
    fn default() -> Self {
        Config {
            miner: MinerConfig::default(),
            llm: LlmConfig::default(),
            target: TargetConfig::default(),
            policy: PolicyConfig::default(),
            synthesis: SynthesisSettings::default(),
            catalog: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_match_documented_values() {
        let cfg = Config::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.synthesis.init_max, 2);
        assert_eq!(cfg.synthesis.debug_max, 3);
        assert_eq!(cfg.policy.rate_pos_1_2, 1.0);
        assert_eq!(cfg.policy.rate_pos_3_4, 0.25);
        assert_eq!(cfg.policy.rate_pos_5_plus, 0.125);
        assert_eq!(cfg.policy.compound_rate, 1.0);
        assert_eq!(cfg.miner.macros, vec!["TORCH_CHECK", "AT_CHECK"]);
        assert!(cfg
            .target
            .runtime_error_patterns
            .iter()
            .any(|p| p == "INTERNAL ASSERT FAILED"));
    }

    #[test]
    fn partial_config_files_fill_in_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"llm": {"backend": "replay", "fixtures_path": "fx.jsonl"}}"#).unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.llm.backend, "replay");
        assert_eq!(cfg.synthesis.debug_max, 3);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut cfg = Config::default();
        cfg.policy.rate_pos_3_4 = 1.5;
        assert!(cfg.validate().is_err());

        let mut cfg = Config::default();
        cfg.llm.temperature_by_stage.insert("analysis".into(), 3.0);
        assert!(cfg.validate().is_err());

        let mut cfg = Config::default();
        cfg.target.device_tokens = Some(("cpu".into(), "cpu".into()));
        assert!(cfg.validate().is_err());
    }
}
