//! Deterministic rule backend: answers the pipeline's prompts from fixed
//! tables instead of a model. Analysis prompts are answered by pattern rules
//! over the embedded check block; generation, debug, and mutation prompts by
//! program templates keyed off the `API:` and `Edge case:` lines the prompt
//! builders emit.
//!
//! The engine is intentionally narrow: it understands the check idioms and
//! value conventions of the bundled fixtures and mock targets, which is
//! exactly what deterministic end-to-end runs need.

use super::{Backend, CompletionParams, LlmDialogue};
use crate::config::RuleConfig;
use crate::error::{Error, Result};
use crate::miner::contains_word;
use crate::types::Stage;

pub struct RuleBackend {
    config: RuleConfig,
}

impl RuleBackend {
    pub fn new(config: RuleConfig) -> Self {
        RuleBackend { config }
    }
}

impl Backend for RuleBackend {
    fn complete(&self, dialogue: &LlmDialogue, _params: &CompletionParams) -> Result<String> {
        let first_user = dialogue
            .messages
            .iter()
            .find(|m| m.role == super::Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or_default();
        match dialogue.stage {
            Stage::Analysis => analyze(first_user),
            Stage::Generation => generate(first_user, &self.config, 0),
            Stage::Debug => {
                // Retry with the next value variant; the dialogue's assistant
                // turns count the attempts so far.
                let attempt = dialogue
                    .messages
                    .iter()
                    .filter(|m| m.role == super::Role::Assistant)
                    .count();
                generate(first_user, &self.config, attempt)
            }
            Stage::Mutation => mutate(first_user, &self.config),
        }
    }

    fn name(&self) -> &'static str {
        "rule"
    }
}

// ---------------------------------------------------------------------------
// Analysis rules
// ---------------------------------------------------------------------------

fn analyze(prompt: &str) -> Result<String> {
    let block = fenced_block(prompt)
        .ok_or_else(|| Error::Dialogue("analysis prompt carries no code block".into()))?;
    let (params, checks) = parse_block(&block);

    let mut entries = Vec::new();
    for check in &checks {
        let referenced: Vec<(String, String)> = params
            .iter()
            .filter(|(name, _)| contains_word(check, name))
            .cloned()
            .collect();
        let vars_json: Vec<serde_json::Value> = referenced
            .iter()
            .map(|(name, ty)| {
                serde_json::json!({"name": name, "type": native_to_base(ty)})
            })
            .collect();
        let edge = describe_violation(check, &referenced);
        entries.push(serde_json::json!({
            "variables": vars_json,
            "edge_case": edge,
        }));
    }
    Ok(serde_json::to_string(&entries)?)
}

/// First ``` fenced block in the prompt, fence lines excluded.
fn fenced_block(prompt: &str) -> Option<String> {
    let start = prompt.find("```")?;
    let after = &prompt[start + 3..];
    let nl = after.find('\n')?;
    let body = &after[nl + 1..];
    let end = body.find("```")?;
    Some(body[..end].trim_end().to_string())
}

/// Parses the miner's block shape: a `ret name(type p, ...) {` header line
/// followed by one check statement per `;`-terminated span (checks may span
/// several lines).
fn parse_block(block: &str) -> (Vec<(String, String)>, Vec<String>) {
    let mut params = Vec::new();
    let mut checks = Vec::new();
    let mut lines = block.lines();
    if let Some(header) = lines.next() {
        if let (Some(open), Some(close)) = (header.find('('), header.rfind(')')) {
            for piece in split_params(&header[open + 1..close]) {
                let piece = piece.trim();
                if piece.is_empty() {
                    continue;
                }
                if let Some(idx) = piece.rfind(|c: char| c.is_whitespace()) {
                    let name = piece[idx + 1..].trim_matches(['&', '*']).to_string();
                    let ty = piece[..idx].trim().to_string();
                    params.push((name, ty));
                }
            }
        }
    }
    let body: String = lines.collect::<Vec<_>>().join("\n");
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in body.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ';' if depth == 0 => {
                let stmt = body[start..i].trim();
                if !stmt.is_empty() && stmt != "}" {
                    checks.push(stmt.to_string());
                }
                start = i + 1;
            }
            _ => {}
        }
    }
    (params, checks)
}

/// Splits a parameter list on top-level commas; angle brackets shield
/// template arguments (comparison operators do not appear in declarations).
fn split_params(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut angle = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            '<' => angle += 1,
            '>' => angle = (angle - 1).max(0),
            ',' if depth == 0 && angle == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

/// Splits macro arguments on top-level commas. Only parentheses and
/// brackets count as nesting: conditions routinely contain `>=`-style
/// comparisons, so angle brackets must not affect depth here.
fn split_args(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut in_string = false;
    let mut start = 0;
    let bytes = text.as_bytes();
    for (i, c) in text.char_indices() {
        if in_string {
            if c == '"' && (i == 0 || bytes[i - 1] != b'\\') {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

fn native_to_base(native: &str) -> &'static str {
    let lower = native.to_ascii_lowercase();
    if lower.contains("tensor") {
        "Tensor"
    } else if lower.contains("scalar") {
        "Scalar"
    } else if lower.contains("arrayref") || lower.contains("vector") || lower.contains("list") {
        "List"
    } else if lower.contains("bool") {
        "Bool"
    } else if lower.contains("string") || lower.contains("char") {
        "Str"
    } else if lower.contains("double") || lower.contains("float") {
        "Float"
    } else {
        "Int"
    }
}

/// The first macro argument: the checked condition.
fn check_condition(check: &str) -> String {
    let Some(open) = check.find('(') else {
        return check.to_string();
    };
    let inner = &check[open + 1..check.rfind(')').unwrap_or(check.len())];
    split_args(inner)
        .first()
        .map(|s| s.trim().to_string())
        .unwrap_or_default()
}

/// Turns a check into the edge case that violates it. Checks encode either
/// the edge condition itself or the expected condition; both map to the
/// violating input here.
fn describe_violation(check: &str, vars: &[(String, String)]) -> String {
    let cond = check_condition(check);
    let first = vars.first().map(|(n, _)| n.as_str()).unwrap_or("input");
    let first_ty = vars
        .first()
        .map(|(_, t)| native_to_base(t))
        .unwrap_or("Int");

    if let Some(pos) = cond.find(".is_complex()") {
        let negated = is_negated(&cond, pos);
        return if negated {
            format!("Tensor {first} is a complex tensor")
        } else {
            format!("Tensor {first} is not a complex tensor")
        };
    }
    if let Some(pos) = cond.find(".is_floating_point()") {
        let negated = is_negated(&cond, pos);
        return if negated {
            format!("Tensor {first} is a floating-point tensor")
        } else {
            format!("Tensor {first} is not a floating-point tensor")
        };
    }
    if let Some(pos) = cond.find(".is_contiguous()") {
        let negated = is_negated(&cond, pos);
        return if negated {
            format!("Tensor {first} is contiguous")
        } else {
            format!("Tensor {first} is not contiguous")
        };
    }
    if vars.len() >= 2 && cond.contains(".sizes()") && cond.contains("==") {
        return format!(
            "Tensor {} and Tensor {} have different shapes",
            vars[0].0, vars[1].0
        );
    }
    if cond.contains(".numel() > 0") || (cond.contains('!') && cond.contains(".empty()")) {
        return format!("{first_ty} {first} is empty");
    }
    if vars.len() >= 2 && cond.contains(".size(-1)") && cond.contains(">=") {
        // a.size(-1) >= b.size(-1) expects a's last dim to cover b's.
        return format!(
            "Tensor {} has a larger last dimension than Tensor {}",
            vars[1].0, vars[0].0
        );
    }
    if vars.len() >= 2 && cond.contains(">= 0") && cond.contains("||") {
        return format!("Int {} and Int {} are both negative", vars[0].0, vars[1].0);
    }
    if let Some(dim) = cond
        .find(".dim() == ")
        .map(|p| cond[p + ".dim() == ".len()..].trim().to_string())
    {
        let n: String = dim.chars().take_while(|c| c.is_ascii_digit()).collect();
        if !n.is_empty() {
            return format!("Tensor {first} is not {n}-dimensional");
        }
    }
    if cond.contains("> 0") {
        return format!("{first_ty} {first} is less than or equal to 0");
    }
    if cond.contains(">= 0") {
        return format!("{first_ty} {first} is negative");
    }
    if cond.contains("!= 0") {
        return format!("{first_ty} {first} is zero");
    }
    // Fallback: quote every variable reference so the subject stays
    // unambiguous even for single-letter names.
    let mut quoted = cond.clone();
    for (name, _) in vars {
        quoted = quote_word(&quoted, name);
    }
    format!("'{first}' violates `{quoted}`")
}

/// Wraps every whole-word occurrence of `word` in single quotes.
fn quote_word(text: &str, word: &str) -> String {
    if word.is_empty() {
        return text.to_string();
    }
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    let mut from = 0;
    while let Some(rel) = text[from..].find(word) {
        let pos = from + rel;
        from = pos + 1;
        let left_ok = pos == 0 || !(bytes[pos - 1].is_ascii_alphanumeric() || bytes[pos - 1] == b'_');
        let end = pos + word.len();
        let right_ok =
            end >= bytes.len() || !(bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_');
        if left_ok && right_ok {
            out.push_str(&text[cursor..pos]);
            out.push('\'');
            out.push_str(word);
            out.push('\'');
            cursor = end;
            from = end;
        }
    }
    out.push_str(&text[cursor..]);
    out
}

fn is_negated(cond: &str, call_pos: usize) -> bool {
    let receiver_start = cond[..call_pos]
        .rfind(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '.'))
        .map(|p| p + 1)
        .unwrap_or(0);
    cond[..receiver_start].trim_end().ends_with('!')
}

// ---------------------------------------------------------------------------
// Program templates
// ---------------------------------------------------------------------------

/// Parses the `API: name(p1: T1, p2: T2)` line the prompt builders emit.
fn parse_api_line(prompt: &str) -> Result<(String, Vec<(String, String)>)> {
    let line = prompt
        .lines()
        .find_map(|l| l.trim().strip_prefix("API: "))
        .ok_or_else(|| Error::Dialogue("prompt carries no `API:` line".into()))?;
    let open = line
        .find('(')
        .ok_or_else(|| Error::Dialogue(format!("malformed API line: {line}")))?;
    let close = line
        .rfind(')')
        .ok_or_else(|| Error::Dialogue(format!("malformed API line: {line}")))?;
    let name = line[..open].trim().to_string();
    let mut params = Vec::new();
    for piece in split_params(&line[open + 1..close]) {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        let (pname, ty) = piece
            .split_once(':')
            .ok_or_else(|| Error::Dialogue(format!("malformed parameter `{piece}`")))?;
        params.push((pname.trim().to_string(), ty.trim().to_string()));
    }
    Ok((name, params))
}

fn root_module<'a>(api: &'a str, config: &'a RuleConfig) -> &'a str {
    match api.split_once('.') {
        Some((root, _)) if !root.is_empty() => root,
        _ => &config.import_module,
    }
}

/// Default constructor for a parameter of the given base type. `variant`
/// cycles alternate value sets for debug retries.
fn base_value(ty: &str, module: &str, device: &str, variant: usize) -> String {
    match (ty, variant % 2) {
        ("Tensor", 0) => format!("{module}.tensor([[1.0, 2.0], [3.0, 4.0]]{device})"),
        ("Tensor", _) => format!("{module}.tensor([1.0, 2.0, 3.0]{device})"),
        ("Int", 0) => "2".into(),
        ("Int", _) => "1".into(),
        ("Bool", _) => "True".into(),
        ("Str", 0) => "\"axis\"".into(),
        ("Str", _) => "\"x\"".into(),
        ("Float", 0) => "1.5".into(),
        ("Float", _) => "0.5".into(),
        ("Scalar", 0) => "2.5".into(),
        ("Scalar", _) => "1.0".into(),
        ("List", 0) => "[2, 2]".into(),
        ("List", _) => "[3]".into(),
        _ => "None".into(),
    }
}

/// Constructor satisfying an edge-case phrase, or None when no rule applies
/// and the default should stand. `role` is the variable's position among the
/// edge case's named variables (drives two-sided constraints).
fn edge_value(
    sentence: &str,
    ty: &str,
    module: &str,
    device: &str,
    role: usize,
) -> Option<String> {
    let s = sentence.to_ascii_lowercase();
    if s.contains("complex") && !s.contains("not a complex") {
        return Some(match ty {
            "Tensor" => format!("{module}.tensor([[1 + 2j, 2j], [3j, 4j]]{device})"),
            "Float" | "Scalar" => "complex(1, 2)".into(),
            _ => "complex(1, 2)".into(),
        });
    }
    if s.contains("floating-point") && !s.contains("not a floating-point") {
        return Some(format!("{module}.tensor([[1.5, 2.5], [3.5, 4.5]]{device})"));
    }
    if s.contains("not contiguous") {
        return Some(format!(
            "{module}.tensor([[1.0, 2.0], [3.0, 4.0]]{device}).transpose(0, 1)"
        ));
    }
    if s.contains("different shapes") {
        return Some(match role {
            0 => format!("{module}.tensor([[1.0, 2.0], [3.0, 4.0]]{device})"),
            _ => format!("{module}.tensor([1.0, 2.0, 3.0]{device})"),
        });
    }
    if s.contains("larger last dimension") {
        // "<X> has a larger last dimension than <Y>": X wider than Y.
        return Some(match role {
            0 => format!("{module}.tensor([[1.0, 2.0, 3.0]]{device})"),
            _ => format!("{module}.tensor([[1.0, 2.0]]{device})"),
        });
    }
    if s.contains("both negative") {
        return Some("-3".into());
    }
    if s.contains("empty") {
        return Some(match ty {
            "Tensor" => format!("{module}.tensor([]{device})"),
            "Str" => "\"\"".into(),
            _ => "[]".into(),
        });
    }
    if s.contains("negative") {
        return Some(match ty {
            "Int" => "-3".into(),
            "Float" => "-3.5".into(),
            "Scalar" => "-2.5".into(),
            "List" => "[-2, -2]".into(),
            _ => format!("{module}.tensor([[-1.0, -2.0], [-3.0, -4.0]]{device})"),
        });
    }
    if s.contains("less than or equal to 0") || s.contains("not positive") {
        return Some(match ty {
            "Float" => "0.0".into(),
            _ => "0".into(),
        });
    }
    if s.contains("zero") {
        return Some(match ty {
            "Float" => "0.0".into(),
            "Tensor" => format!("{module}.tensor([[0.0, 0.0], [0.0, 0.0]]{device})"),
            _ => "0".into(),
        });
    }
    if s.contains("is a string") || s.contains("not a tensor") {
        return Some("\"oops\"".into());
    }
    if let Some(pos) = s.find("is not ") {
        let rest = &s[pos + "is not ".len()..];
        if let Some(n) = rest.strip_suffix("-dimensional").and_then(|d| d.parse::<u32>().ok()) {
            return Some(if n == 1 {
                format!("{module}.tensor([[1.0, 2.0], [3.0, 4.0]]{device})")
            } else {
                format!("{module}.tensor([1.0, 2.0, 3.0]{device})")
            });
        }
    }
    None
}

/// Quoted variable names in an edge-case sentence, in order of appearance.
fn quoted_names(sentence: &str) -> Vec<String> {
    let mut names = Vec::new();
    let mut rest = sentence;
    while let Some(start) = rest.find('\'') {
        let after = &rest[start + 1..];
        match after.find('\'') {
            Some(end) => {
                let token = &after[..end];
                if !token.is_empty() && token.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                {
                    names.push(token.to_string());
                }
                rest = &after[end + 1..];
            }
            None => break,
        }
    }
    names
}

fn render_program(
    api: &str,
    params: &[(String, String)],
    module: &str,
    ctors: &[String],
) -> String {
    let mut out = String::new();
    out.push_str(&format!("import {module}\n\n"));
    for ((name, _), ctor) in params.iter().zip(ctors) {
        out.push_str(&format!("{name} = {ctor}\n"));
    }
    let args = params
        .iter()
        .map(|(name, _)| name.as_str())
        .collect::<Vec<_>>()
        .join(", ");
    out.push_str(&format!("result = {api}({args})\n"));
    out.push_str(
        "vals = result.tolist() if hasattr(result, \"tolist\") else result\n\
         if not isinstance(vals, list):\n\
         \x20   vals = [vals]\n\
         flat = []\n\
         for v in vals:\n\
         \x20   flat.extend(v if isinstance(v, list) else [v])\n\
         print(\"RESULT: [\" + \", \".join(\"%.6f\" % float(getattr(v, \"real\", v)) for v in flat) + \"]\")\n",
    );
    out
}

fn generate(prompt: &str, config: &RuleConfig, variant: usize) -> Result<String> {
    let (api, params) = parse_api_line(prompt)?;
    let module = root_module(&api, config);
    let device = if prompt.contains("{{DEVICE}}") {
        ", device=\"{{DEVICE}}\"".to_string()
    } else {
        String::new()
    };
    let ctors: Vec<String> = params
        .iter()
        .map(|(_, ty)| base_value(ty, module, &device, variant))
        .collect();
    let program = render_program(&api, &params, module, &ctors);
    Ok(format!("```python\n{program}```"))
}

fn mutate(prompt: &str, config: &RuleConfig) -> Result<String> {
    let (api, params) = parse_api_line(prompt)?;
    let sentence = prompt
        .lines()
        .find_map(|l| l.trim().strip_prefix("Edge case: "))
        .ok_or_else(|| Error::Dialogue("mutation prompt carries no `Edge case:` line".into()))?;
    let module = root_module(&api, config);
    let device = if prompt.contains("{{DEVICE}}") {
        ", device=\"{{DEVICE}}\"".to_string()
    } else {
        String::new()
    };

    let named = quoted_names(sentence);
    let ctors: Vec<String> = params
        .iter()
        .map(|(name, ty)| {
            match named.iter().position(|n| n == name) {
                Some(role) => edge_value(sentence, ty, module, &device, role)
                    .unwrap_or_else(|| base_value(ty, module, &device, 0)),
                None => base_value(ty, module, &device, 0),
            }
        })
        .collect();
    let program = render_program(&api, &params, module, &ctors);
    Ok(format!("```python\n{program}```"))
}
