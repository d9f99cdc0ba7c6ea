//! Context-free edge-case corpus: standardizes context-based cases into
//! variable-name-free templates keyed by etype pattern, clusters and
//! deduplicates them, and answers subset-match queries for target APIs.
//!
//! Matching depends only on the pattern and the corpus, never on the source
//! library, which is what lets edge cases mined from one library stress any
//! API with compatible parameter types.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analyzer::{Category, ContextEdgeCase};
use crate::catalog::{params_of_type, ApiSignature};
use crate::error::{Error, Result};
use crate::types::{BaseType, EtypePattern};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub file: String,
    pub line: usize,
    pub function: String,
    #[serde(rename = "macro")]
    pub macro_name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Individual,
    Compound,
}

/// An edge case with variable names replaced by indexed type slots
/// (`'Tensor_1'`, `'Int_1'`, ...), reusable across any API whose parameter
/// types cover its pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextFreeEdgeCase {
    pub id: String,
    pub pattern: EtypePattern,
    pub kind: CaseKind,
    pub template: String,
    pub category: Category,
    pub provenance: Vec<Provenance>,
}

/// Dedupe normalization: lowercase, collapsed whitespace, no terminal
/// punctuation.
pub fn normalize_template(template: &str) -> String {
    template
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .trim_end_matches(['.', '!', '?', ';', ','])
        .to_string()
}

/// Stable identifier over (pattern, normalized template); doubles as the
/// dedupe key.
fn case_id(pattern: &EtypePattern, template: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(pattern.canonical_key().as_bytes());
    hasher.update([0x1f]);
    hasher.update(normalize_template(template).as_bytes());
    hex::encode(&hasher.finalize()[..8])
}

/// Slot name for the `index`-th variable of a type (1-based).
fn slot_name(ty: &BaseType, index: u32) -> String {
    format!("{ty}_{index}")
}

/// Converts a context-based edge case into its context-free form: each
/// variable name becomes an indexed type slot, numbered per type in order of
/// first mention in the description. A redundant type word immediately
/// before the name (as in "Tensor self is ...") folds into the slot, and
/// slots are written single-quoted.
pub fn standardize(case: &ContextEdgeCase) -> Result<ContextFreeEdgeCase> {
    let description = &case.description;

    // Locate the first substitutable mention of every variable.
    let mut mentions: Vec<(usize, &str, &BaseType)> = Vec::new();
    for (name, ty) in &case.variables {
        let occs = substitutable_occurrences(description, name, ty);
        match occs.first() {
            Some(occ) => mentions.push((occ.start, name, ty)),
            None => {
                return Err(Error::Standardize {
                    description: description.clone(),
                    reason: format!("variable `{name}` is never mentioned"),
                })
            }
        }
    }
    if mentions.is_empty() {
        return Err(Error::Standardize {
            description: description.clone(),
            reason: "description names no variable".into(),
        });
    }
    mentions.sort_by_key(|(pos, _, _)| *pos);

    // Assign slot indices per type, in first-mention order.
    let mut per_type: BTreeMap<BaseType, u32> = BTreeMap::new();
    let mut slots: Vec<(&str, BaseType, String)> = Vec::new();
    for (_, name, ty) in &mentions {
        let counter = per_type.entry((*ty).clone()).or_insert(0);
        *counter += 1;
        slots.push((name, (*ty).clone(), slot_name(ty, *counter)));
    }

    let template = substitute_slots(description, &slots);
    for (name, ty, slot) in &slots {
        // A variable already named like its slot replaces into itself;
        // anything else must be gone from the template.
        if name != slot && !substitutable_occurrences(&template, name, ty).is_empty() {
            return Err(Error::Standardize {
                description: description.clone(),
                reason: format!("variable `{name}` survived substitution"),
            });
        }
    }

    let pattern = EtypePattern::from_types(case.variables.iter().map(|(_, t)| t.clone()));
    let kind = if pattern.total() == 1 {
        CaseKind::Individual
    } else {
        CaseKind::Compound
    };
    Ok(ContextFreeEdgeCase {
        id: case_id(&pattern, &template),
        pattern,
        kind,
        template,
        category: case.category,
        provenance: vec![Provenance {
            file: case.source.file.clone(),
            line: case.source.line,
            function: case.source.function.clone(),
            macro_name: case.source.macro_name.clone(),
        }],
    })
}

fn is_ident(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// One whole-word occurrence of a variable, possibly widened over
/// surrounding quotes and a redundant preceding type word.
#[derive(Debug, Clone, Copy)]
struct Occurrence {
    start: usize,
    end: usize,
    /// Type-prefixed ("Tensor self") or quoted ("'self'") occurrences are
    /// unambiguous variable references.
    anchored: bool,
}

/// Names that double as ordinary English words; these only count as
/// variable references where the text marks them as one (type prefix or
/// quotes).
const AMBIGUOUS_NAMES: [&str; 15] = [
    "a", "an", "i", "it", "is", "in", "to", "of", "on", "or", "and", "the", "not", "all", "any",
];

fn ambiguous_name(name: &str) -> bool {
    name.len() <= 1 || AMBIGUOUS_NAMES.contains(&name.to_ascii_lowercase().as_str())
}

/// Whole-word occurrences of `name` in `text`, widened to swallow wrapping
/// quotes and a directly preceding type word. Ambiguous names (variables
/// that read as English words, such as `a`) only match anchored
/// occurrences.
fn substitutable_occurrences(text: &str, name: &str, ty: &BaseType) -> Vec<Occurrence> {
    let bytes = text.as_bytes();
    let mut occurrences = Vec::new();
    if name.is_empty() {
        return occurrences;
    }
    let mut from = 0;
    while let Some(rel) = text[from..].find(name) {
        let pos = from + rel;
        from = pos + 1;
        let left_ok = pos == 0 || !is_ident(bytes[pos - 1]);
        let word_end = pos + name.len();
        let right_ok = word_end >= bytes.len() || !is_ident(bytes[word_end]);
        if !(left_ok && right_ok) {
            continue;
        }

        let mut start = pos;
        let mut end = word_end;
        let mut anchored = false;
        // Existing quotes around the name fold into the slot.
        if start > 0 && bytes[start - 1] == b'\'' && end < bytes.len() && bytes[end] == b'\'' {
            start -= 1;
            end += 1;
            anchored = true;
        }
        // A redundant type word directly before the name folds in too:
        // "Tensor self" -> "'Tensor_1'".
        let before = &text[..start];
        let prefix = before.trim_end();
        let ty_name = ty.name();
        if prefix.len() < before.len() && prefix.len() >= ty_name.len() {
            let word_start = prefix.len() - ty_name.len();
            if prefix.is_char_boundary(word_start) {
                let boundary_ok = word_start == 0 || !is_ident(prefix.as_bytes()[word_start - 1]);
                if boundary_ok && prefix[word_start..].eq_ignore_ascii_case(ty_name) {
                    start = word_start;
                    anchored = true;
                }
            }
        }
        occurrences.push(Occurrence { start, end, anchored });
    }
    if ambiguous_name(name) {
        occurrences.retain(|o| o.anchored);
    }
    occurrences
}

/// Replaces each variable's substitutable occurrences with its quoted slot.
/// All spans are collected before any text is rebuilt, so replacements
/// cannot cascade into one another.
fn substitute_slots(text: &str, slots: &[(&str, BaseType, String)]) -> String {
    struct Span {
        start: usize,
        end: usize,
        replacement: String,
    }
    let mut spans: Vec<Span> = Vec::new();
    for (name, ty, slot) in slots {
        for occ in substitutable_occurrences(text, name, ty) {
            if spans.iter().any(|s| occ.start < s.end && s.start < occ.end) {
                continue;
            }
            spans.push(Span {
                start: occ.start,
                end: occ.end,
                replacement: format!("'{slot}'"),
            });
        }
    }

    spans.sort_by_key(|s| s.start);
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for span in spans {
        out.push_str(&text[cursor..span.start]);
        out.push_str(&span.replacement);
        cursor = span.end;
    }
    out.push_str(&text[cursor..]);
    out
}

/// Rendering form for prompts: the index is stripped when the pattern holds
/// a single unit of that type, matching how a one-tensor case reads in
/// isolation ("'Tensor' is a complex tensor").
pub fn display_template(case: &ContextFreeEdgeCase) -> String {
    let mut text = case.template.clone();
    for (ty, count) in case.pattern.iter() {
        if count == 1 {
            text = text.replace(&slot_name(ty, 1), ty.name());
        }
    }
    text
}

/// The corpus: clusters of deduplicated context-free cases keyed by the
/// canonical pattern key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeCaseCorpus {
    clusters: BTreeMap<String, Vec<ContextFreeEdgeCase>>,
}

impl EdgeCaseCorpus {
    /// Deduplicates on (pattern, normalized template), merging provenance,
    /// and clusters by pattern with a stable provenance-based order.
    pub fn build(cases: impl IntoIterator<Item = ContextFreeEdgeCase>) -> Self {
        let mut by_id: BTreeMap<String, ContextFreeEdgeCase> = BTreeMap::new();
        for case in cases {
            match by_id.get_mut(&case.id) {
                Some(existing) => {
                    existing.provenance.extend(case.provenance);
                }
                None => {
                    by_id.insert(case.id.clone(), case);
                }
            }
        }
        let mut clusters: BTreeMap<String, Vec<ContextFreeEdgeCase>> = BTreeMap::new();
        for (_, mut case) in by_id {
            case.provenance.sort();
            case.provenance.dedup();
            clusters
                .entry(case.pattern.canonical_key())
                .or_default()
                .push(case);
        }
        for cases in clusters.values_mut() {
            cases.sort_by(|a, b| {
                a.provenance
                    .first()
                    .cmp(&b.provenance.first())
                    .then_with(|| a.id.cmp(&b.id))
            });
        }
        EdgeCaseCorpus { clusters }
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn case_count(&self) -> usize {
        self.clusters.values().map(Vec::len).sum()
    }

    pub fn clusters(&self) -> impl Iterator<Item = (&String, &Vec<ContextFreeEdgeCase>)> {
        self.clusters.iter()
    }

    pub fn all_cases(&self) -> impl Iterator<Item = &ContextFreeEdgeCase> {
        self.clusters.values().flatten()
    }

    /// All cases whose pattern is a multiset subset of `api_pattern`
    /// (excluding the empty pattern), in deterministic (pattern key,
    /// provenance) order.
    pub fn match_pattern(&self, api_pattern: &EtypePattern) -> Vec<&ContextFreeEdgeCase> {
        self.clusters
            .values()
            .flatten()
            .filter(|case| !case.pattern.is_empty() && case.pattern.is_subset_of(api_pattern))
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for case in self.all_cases() {
            serde_json::to_writer(&mut file, case)?;
            file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut cases = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let case: ContextFreeEdgeCase =
                serde_json::from_str(&line).map_err(|e| Error::Record {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    detail: e.to_string(),
                })?;
            cases.push(case);
        }
        Ok(EdgeCaseCorpus::build(cases))
    }
}

/// One concrete use of an edge case against an API: the template with slots
/// replaced by parameter names, plus the bound parameter positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instantiation {
    pub text: String,
    /// 1-based positions of the bound parameters, one per slot.
    pub positions: Vec<usize>,
}

fn replace_slot(text: &str, ty: &BaseType, index: u32, param_name: &str) -> String {
    let slot = slot_name(ty, index);
    let quoted = format!("'{slot}'");
    if text.contains(&quoted) {
        text.replace(&quoted, &format!("'{param_name}'"))
    } else {
        text.replace(&slot, &format!("'{param_name}'"))
    }
}

/// Concretizes a case against an API signature.
///
/// Individual cases yield one instantiation per type-compatible parameter,
/// tagged with that parameter's position. Compound cases yield a single
/// instantiation binding slots to the earliest type-compatible parameters in
/// declaration order. An unsatisfiable pattern yields no instantiations.
pub fn concretize(case: &ContextFreeEdgeCase, api: &ApiSignature) -> Vec<Instantiation> {
    if !case.pattern.is_subset_of(&crate::catalog::etype_of(api)) {
        return Vec::new();
    }
    match case.kind {
        CaseKind::Individual => {
            let (ty, _) = case.pattern.iter().next().expect("individual has one unit");
            params_of_type(api, ty)
                .into_iter()
                .map(|param| Instantiation {
                    text: replace_slot(&case.template, ty, 1, &param.name),
                    positions: vec![param.position],
                })
                .collect()
        }
        CaseKind::Compound => {
            let mut text = case.template.clone();
            let mut positions = Vec::new();
            for (ty, count) in case.pattern.iter() {
                let candidates = params_of_type(api, ty);
                for index in 1..=count {
                    let param = candidates[(index - 1) as usize];
                    text = replace_slot(&text, ty, index, &param.name);
                    positions.push(param.position);
                }
            }
            positions.sort_unstable();
            vec![Instantiation { text, positions }]
        }
    }
}
