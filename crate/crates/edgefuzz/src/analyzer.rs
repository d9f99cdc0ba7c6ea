//! Turns check blocks into structured context-based edge cases via the
//! four-question analysis prompt and strict JSON validation of the reply.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{Gateway, LlmDialogue};
use crate::miner::CheckBlock;
use crate::types::{BaseType, Stage, TypeVocabulary, Warning};

/// Where an edge case came from; carried through to corpus provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckRef {
    pub file: String,
    pub line: usize,
    pub function: String,
    #[serde(rename = "macro")]
    pub macro_name: String,
}

/// Edge-case taxonomy, inferred by keyword rules over the description so the
/// classification stays auditable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Category {
    SpecialType,
    AbnormalValue,
    SpecialTypeAttribute,
    MultiParamConstraint,
    Other,
}

/// An edge case still phrased in terms of source variable names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextEdgeCase {
    pub source: CheckRef,
    pub variables: Vec<(String, BaseType)>,
    pub description: String,
    pub category: Category,
}

const ATTRIBUTE_KEYWORDS: [&str; 14] = [
    "dtype",
    "complex",
    "sparse",
    "dense",
    "conjugate",
    "contiguous",
    "layout",
    "floating",
    "quantized",
    "dimensional",
    "dimension",
    "shape",
    "empty",
    "undefined",
];

const VALUE_KEYWORDS: [&str; 12] = [
    "negative",
    "zero",
    "less than",
    "greater than",
    "exceeds",
    "out of range",
    "nan",
    "infinite",
    "inf",
    "overflow",
    "positive",
    "bound",
];

const TYPE_KEYWORDS: [&str; 9] = [
    "is a string",
    "is a str",
    "is an int",
    "is a bool",
    "is a list",
    "is a float",
    "not a tensor",
    "not a number",
    "wrong type",
];

pub fn categorize(description: &str, variable_count: usize) -> Category {
    if variable_count >= 2 {
        return Category::MultiParamConstraint;
    }
    let lower = description.to_ascii_lowercase();
    if ATTRIBUTE_KEYWORDS.iter().any(|k| lower.contains(k)) {
        Category::SpecialTypeAttribute
    } else if VALUE_KEYWORDS.iter().any(|k| lower.contains(k)) {
        Category::AbnormalValue
    } else if TYPE_KEYWORDS.iter().any(|k| lower.contains(k)) {
        Category::SpecialType
    } else {
        Category::Other
    }
}

/// Builds the four-step analysis prompt for one block. Deterministic: the
/// same block always yields byte-identical prompt text.
pub fn build_analysis_prompt(block: &CheckBlock, vocab: &TypeVocabulary) -> LlmDialogue {
    let n = block.checks.len();
    let mut macros: Vec<&str> = block.checks.iter().map(|c| c.macro_name.as_str()).collect();
    macros.sort_unstable();
    macros.dedup();
    let macro_label = macros.join(" / ");
    let type_list = vocab.names().join(", ");

    let prompt = format!(
        "You are analyzing input-validation checks in a native library function to find edge \
         cases for API fuzzing.\n\
         \n\
         Code block:\n\
         ```\n\
         {block}\n\
         ```\n\
         \n\
         The block contains exactly {n} check statement(s). Work through these four steps for \
         each check, in source order:\n\
         1. What variables does the {macro_label} examine?\n\
         2. What are the data types of these variables? Use only these types: {type_list}.\n\
         3. What edge cases does the {macro_label} check? If a check encodes an expected \
         condition, state the edge case that violates it. When the error-message string and the \
         checked predicate disagree, trust the predicate.\n\
         4. To standardize the output and reduce irrelevant information, summarize the output in \
         JSON format.\n\
         \n\
         Reply with a JSON array of exactly {n} entries, one per check in source order. Each \
         entry must have this shape:\n\
         {{\"variables\": [{{\"name\": \"<parameter name>\", \"type\": \"<one of the types \
         above>\"}}], \"edge_case\": \"<one sentence naming the variables>\"}}\n\
         \n\
         Only list variables that are input parameters of the function. Example: for the block\n\
         ```\n\
         Tensor& abs_(Tensor& self) {{\n\
         \x20 TORCH_CHECK(!self.is_complex(), \"In-place abs is not supported for complex \
         tensors.\");\n\
         }}\n\
         ```\n\
         the correct reply is\n\
         [{{\"variables\": [{{\"name\": \"self\", \"type\": \"Tensor\"}}], \"edge_case\": \
         \"Tensor self is a complex tensor\"}}]\n\
         \n\
         Reply with the JSON array only.",
        block = block.block_text,
        n = n,
        macro_label = macro_label,
        type_list = type_list,
    );

    LlmDialogue::single_user(Stage::Analysis, block.interface.name.clone(), prompt)
}

#[derive(Debug, Deserialize)]
struct ReplyEntry {
    #[serde(default)]
    variables: Vec<ReplyVariable>,
    #[serde(default, alias = "description")]
    edge_case: String,
}

#[derive(Debug, Deserialize)]
struct ReplyVariable {
    name: String,
    #[serde(rename = "type")]
    ty: String,
}

/// First well-formed JSON array anywhere in the text (prose and markdown
/// fences around it are fine).
fn first_json_array(text: &str) -> Option<serde_json::Value> {
    for (idx, _) in text.match_indices('[') {
        let mut stream =
            serde_json::Deserializer::from_str(&text[idx..]).into_iter::<serde_json::Value>();
        if let Some(Ok(value)) = stream.next() {
            if value.is_array() {
                return Some(value);
            }
        }
    }
    None
}

/// Extracts and validates the analysis reply for `block`. Entries that fail
/// validation are dropped with a warning; survivors come back in check
/// order. No JSON array at all is an error so the caller can re-ask.
pub fn parse_analysis_json(
    text: &str,
    block: &CheckBlock,
    vocab: &TypeVocabulary,
) -> Result<(Vec<ContextEdgeCase>, Vec<Warning>)> {
    let array = first_json_array(text).ok_or_else(|| Error::NoJsonArray {
        raw: text.to_string(),
    })?;

    let mut warnings = Vec::new();
    let mut cases = Vec::new();
    // Same variable name must resolve to one type across the whole block.
    let mut bound: std::collections::BTreeMap<String, BaseType> = std::collections::BTreeMap::new();

    let entries = array.as_array().expect("checked is_array");
    for (idx, raw_entry) in entries.iter().enumerate() {
        let context = format!("{}#check{}", block.interface.name, idx + 1);
        let Some(check) = block.checks.get(idx) else {
            warnings.push(Warning::new(
                "analyze",
                context,
                "reply has more entries than the block has checks; extra entry dropped",
            ));
            continue;
        };
        let entry: ReplyEntry = match serde_json::from_value(raw_entry.clone()) {
            Ok(e) => e,
            Err(e) => {
                warnings.push(Warning::new(
                    "analyze",
                    context,
                    format!("malformed entry dropped: {e}"),
                ));
                continue;
            }
        };
        if entry.edge_case.trim().is_empty() {
            warnings.push(Warning::new("analyze", context, "empty edge case dropped"));
            continue;
        }

        let mut variables: Vec<(String, BaseType)> = Vec::new();
        let mut valid = true;
        for var in &entry.variables {
            if !block
                .interface
                .parameters
                .iter()
                .any(|(name, _)| name == &var.name)
            {
                warnings.push(Warning::new(
                    "analyze",
                    context.clone(),
                    format!("variable `{}` is not an interface parameter; entry dropped", var.name),
                ));
                valid = false;
                break;
            }
            let ty = match vocab.resolve(&var.ty) {
                Ok(t) => t,
                Err(_) => {
                    warnings.push(Warning::new(
                        "analyze",
                        context.clone(),
                        format!("type `{}` not in vocabulary; entry dropped", var.ty),
                    ));
                    valid = false;
                    break;
                }
            };
            if let Some(previous) = bound.get(&var.name) {
                if previous != &ty {
                    warnings.push(Warning::new(
                        "analyze",
                        context.clone(),
                        format!(
                            "variable `{}` already typed {previous}, entry retyping it to {ty} dropped",
                            var.name
                        ),
                    ));
                    valid = false;
                    break;
                }
            }
            if !variables.iter().any(|(n, _)| n == &var.name) {
                variables.push((var.name.clone(), ty));
            }
        }
        if !valid {
            continue;
        }
        if variables.is_empty() {
            warnings.push(Warning::new(
                "analyze",
                context,
                "entry names no interface parameter; dropped",
            ));
            continue;
        }
        for (name, ty) in &variables {
            bound.insert(name.clone(), ty.clone());
        }

        let description = entry.edge_case.trim().to_string();
        let category = categorize(&description, variables.len());
        cases.push(ContextEdgeCase {
            source: CheckRef {
                file: block.file_path.display().to_string(),
                line: check.line,
                function: block.interface.name.clone(),
                macro_name: check.macro_name.clone(),
            },
            variables,
            description,
            category,
        });
    }

    Ok((cases, warnings))
}

/// Prompt → complete → parse, with up to `retries` re-asks when the reply
/// carries no JSON array.
pub fn analyze_block(
    block: &CheckBlock,
    gateway: &Gateway,
    vocab: &TypeVocabulary,
    retries: u32,
) -> Result<(Vec<ContextEdgeCase>, Vec<Warning>)> {
    let mut dialogue = build_analysis_prompt(block, vocab);
    let mut attempts_left = retries;
    loop {
        let reply = gateway.complete(&dialogue)?;
        match parse_analysis_json(&reply, block, vocab) {
            Ok(result) => return Ok(result),
            Err(Error::NoJsonArray { .. }) if attempts_left > 0 => {
                attempts_left -= 1;
                dialogue.push_assistant(reply)?;
                dialogue.push_user(
                    "Your reply did not contain the required JSON array. Reply with the JSON \
                     array only.",
                )?;
            }
            Err(e) => return Err(e),
        }
    }
}

/// JSON Lines record for one context-based edge case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseRecord {
    pub function: String,
    pub file: String,
    pub check_line: usize,
    #[serde(rename = "macro")]
    pub macro_name: String,
    pub variables: Vec<VariableRecord>,
    pub description: String,
    pub category: Category,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableRecord {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: BaseType,
}

impl From<&ContextEdgeCase> for CaseRecord {
    fn from(case: &ContextEdgeCase) -> Self {
        CaseRecord {
            function: case.source.function.clone(),
            file: case.source.file.clone(),
            check_line: case.source.line,
            macro_name: case.source.macro_name.clone(),
            variables: case
                .variables
                .iter()
                .map(|(name, ty)| VariableRecord {
                    name: name.clone(),
                    ty: ty.clone(),
                })
                .collect(),
            description: case.description.clone(),
            category: case.category,
        }
    }
}

impl CaseRecord {
    pub fn into_case(self) -> ContextEdgeCase {
        ContextEdgeCase {
            source: CheckRef {
                file: self.file,
                line: self.check_line,
                function: self.function,
                macro_name: self.macro_name,
            },
            variables: self.variables.into_iter().map(|v| (v.name, v.ty)).collect(),
            description: self.description,
            category: self.category,
        }
    }
}

pub fn write_cases_jsonl(path: &Path, cases: &[ContextEdgeCase]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for case in cases {
        serde_json::to_writer(&mut file, &CaseRecord::from(case))?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_cases_jsonl(path: &Path) -> Result<Vec<ContextEdgeCase>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut cases = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CaseRecord = serde_json::from_str(&line).map_err(|e| Error::Record {
            path: path.to_path_buf(),
            line: idx + 1,
            detail: e.to_string(),
        })?;
        cases.push(record.into_case());
    }
    Ok(cases)
}
