//! Initial program synthesis: one valid test program per API via a bounded
//! generate-and-debug loop. An invalid program's error info is fed back to
//! the model up to `debug_max` times; after that a fresh dialogue restarts
//! the attempt, up to `init_max` rounds.

use serde::{Deserialize, Serialize};

use crate::catalog::ApiSignature;
use crate::config::{SynthesisSettings, TargetConfig};
use crate::error::Result;
use crate::harness::{ExecutionOutcome, ExitStatus, Harness, OutcomeClass, DEVICE_PLACEHOLDER};
use crate::llm::{Gateway, LlmDialogue};
use crate::miner::contains_word;
use crate::types::Stage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProgramStatus {
    Valid,
    Failed,
}

/// A synthesized test program plus its generation lineage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestProgram {
    pub api_name: String,
    pub source_text: String,
    pub lineage: LlmDialogue,
    /// (init rounds used, debug rounds used within the final init round).
    pub attempts: (u32, u32),
    pub status: ProgramStatus,
    /// Populated when status is `Failed`.
    pub failure_cause: Option<String>,
}

/// Builds the generation prompt for one API. Deterministic per API and
/// target configuration.
pub fn build_generation_prompt(api: &ApiSignature, target: &TargetConfig) -> LlmDialogue {
    let mut prompt = format!(
        "Write a minimal, self-contained {language} test program for the API below.\n\
         \n\
         API: {definition}\n",
        language = target.language,
        definition = api.definition(),
    );
    if let Some(hint) = &api.doc_hint {
        prompt.push_str(&format!("Note: {hint}\n"));
    }
    prompt.push_str(
        "\nRequirements:\n\
         - Construct valid inputs for every parameter and pass all parameters explicitly.\n\
         - Call the API exactly once and print its result as one line: RESULT: [v1, v2, ...] \
         with decimal numbers.\n",
    );
    if target.device_tokens.is_some() {
        prompt.push_str(&format!(
            "- Wherever a device is needed, use the literal string \"{DEVICE_PLACEHOLDER}\" as \
             the device name.\n"
        ));
    }
    prompt.push_str(
        "- No command-line arguments, no file or network access.\n\
         \n\
         Respond with the complete program in a single code block.",
    );
    LlmDialogue::single_user(Stage::Generation, api.name.clone(), prompt)
}

/// First fenced code block of a completion; chat models wrap code
/// inconsistently, so a fence-less reply is taken whole.
pub fn extract_code_block(response: &str) -> String {
    if let Some(start) = response.find("```") {
        let after = &response[start + 3..];
        if let Some(nl) = after.find('\n') {
            let body = &after[nl + 1..];
            if let Some(end) = body.find("```") {
                return body[..end].trim_end().to_string() + "\n";
            }
        }
    }
    response.trim().to_string() + "\n"
}

/// Condenses a failed run into the feedback line fed back to the model:
/// exception class + message + innermost stack frame, truncated to the byte
/// budget (tail kept).
pub fn extract_error_info(outcome: &ExecutionOutcome, budget: usize) -> String {
    let text = match &outcome.status {
        ExitStatus::TimedOut => format!("timeout after {:.0}s", outcome.wall_time_s.round()),
        ExitStatus::Signaled { signal } => format!("process killed by {signal}"),
        status => {
            let exception = last_exception_line(&outcome.stderr);
            let frame = innermost_frame(&outcome.stderr);
            match (exception, frame) {
                (Some(exc), Some(frame)) => format!("{exc} in {frame}"),
                (Some(exc), None) => exc,
                (None, _) => {
                    let tail = outcome.stderr.trim();
                    if tail.is_empty() {
                        match status {
                            ExitStatus::NonzeroExit { code } => {
                                format!("exit code {code}, no diagnostic")
                            }
                            _ => "no diagnostic".to_string(),
                        }
                    } else {
                        tail.to_string()
                    }
                }
            }
        }
    };
    truncate_tail(&text, budget)
}

fn truncate_tail(text: &str, budget: usize) -> String {
    if text.len() <= budget {
        return text.to_string();
    }
    let mut start = text.len() - budget;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    text[start..].to_string()
}

/// Last `Class: message` line whose head looks like a dotted identifier,
/// the final line of a traceback.
fn last_exception_line(stderr: &str) -> Option<String> {
    stderr.lines().rev().find_map(|line| {
        let line = line.trim();
        let (head, _) = line.split_once(':')?;
        let head = head.trim();
        let looks_like_class = !head.is_empty()
            && head.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            && head
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.');
        looks_like_class.then(|| line.to_string())
    })
}

/// Innermost `File "...", line N, in name` frame of a traceback.
fn innermost_frame(stderr: &str) -> Option<String> {
    stderr.lines().rev().find_map(|line| {
        let line = line.trim();
        let rest = line.strip_prefix("File \"")?;
        let (_file, rest) = rest.split_once("\", line ")?;
        let (number, func) = match rest.split_once(", in ") {
            Some((n, f)) => (n.trim(), f.trim()),
            None => (rest.trim(), "<module>"),
        };
        Some(format!("{func}, line {number}"))
    })
}

/// Validity per the exit-clean proxy: the run classified as success and the
/// program text actually names the API (last dotted component as a whole
/// word).
pub fn program_is_valid(program: &str, class: OutcomeClass, api: &ApiSignature) -> bool {
    let token = api.name.rsplit('.').next().unwrap_or(&api.name);
    class == OutcomeClass::Success && contains_word(program, token)
}

/// Runs the bounded generate-and-debug loop for one API.
///
/// Per init round: one generation call, then up to `debug_max` debug calls,
/// each appending the failing program and its error info to the dialogue. A
/// round that exhausts its debug budget discards the dialogue and starts
/// fresh. LLM calls are bounded by init_max * (1 + debug_max). Gateway
/// failures mark the API failed rather than aborting the batch; environment
/// errors propagate.
pub fn generate_initial(
    api: &ApiSignature,
    gateway: &Gateway,
    harness: &Harness,
    settings: &SynthesisSettings,
) -> Result<TestProgram> {
    let mut last_dialogue = None;
    let mut last_cause = String::from("no valid program within budget");

    for init_round in 1..=settings.init_max {
        let mut dialogue = build_generation_prompt(api, &harness.target);
        let mut program = match step(gateway, &dialogue) {
            Ok(text) => text,
            Err(StepError::Gateway(cause)) => {
                return Ok(failed(api, dialogue, (init_round, 0), cause))
            }
        };
        dialogue.push_assistant(program.clone())?;
        let mut outcome = harness.execute_source(&program, settings.exec_timeout_s)?;

        if program_is_valid(&program, harness.classify(&outcome), api) {
            return Ok(valid(api, program, dialogue, (init_round, 0)));
        }

        // Subsequent calls on this dialogue are debug-stage calls.
        dialogue.stage = Stage::Debug;
        for debug_round in 1..=settings.debug_max {
            let error_info = extract_error_info(&outcome, harness.target.error_info_budget);
            last_cause = error_info.clone();
            dialogue.push_user(format!("{error_info}\nRegenerate"))?;
            program = match step(gateway, &dialogue) {
                Ok(text) => text,
                Err(StepError::Gateway(cause)) => {
                    return Ok(failed(api, dialogue, (init_round, debug_round), cause))
                }
            };
            dialogue.push_assistant(program.clone())?;
            outcome = harness.execute_source(&program, settings.exec_timeout_s)?;
            if program_is_valid(&program, harness.classify(&outcome), api) {
                return Ok(valid(api, program, dialogue, (init_round, debug_round)));
            }
        }
        last_dialogue = Some(dialogue);
    }

    Ok(failed(
        api,
        last_dialogue.expect("init_max >= 1"),
        (settings.init_max, settings.debug_max),
        last_cause,
    ))
}

enum StepError {
    Gateway(String),
}

fn step(gateway: &Gateway, dialogue: &LlmDialogue) -> std::result::Result<String, StepError> {
    match gateway.complete(dialogue) {
        Ok(response) => Ok(extract_code_block(&response)),
        Err(e) => Err(StepError::Gateway(e.to_string())),
    }
}

fn valid(
    api: &ApiSignature,
    source_text: String,
    lineage: LlmDialogue,
    attempts: (u32, u32),
) -> TestProgram {
    TestProgram {
        api_name: api.name.clone(),
        source_text,
        lineage,
        attempts,
        status: ProgramStatus::Valid,
        failure_cause: None,
    }
}

fn failed(
    api: &ApiSignature,
    lineage: LlmDialogue,
    attempts: (u32, u32),
    cause: String,
) -> TestProgram {
    TestProgram {
        api_name: api.name.clone(),
        source_text: String::new(),
        lineage,
        attempts,
        status: ProgramStatus::Failed,
        failure_cause: Some(cause),
    }
}

/// Per-API entry of the synthesis report artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisEntry {
    pub api: String,
    pub status: ProgramStatus,
    pub init_rounds: u32,
    pub debug_rounds: u32,
    pub llm_calls: u64,
}
