//! Lexical groundwork for check mining: comment/string blanking, balanced
//! macro-invocation capture, and function-span recovery.
//!
//! This is a tokenizing brace/paren matcher over raw source, not a C++
//! grammar. Check macros are syntactically regular enough that spans and
//! headers can be recovered without a full parser; anything the heuristics
//! cannot classify is surfaced as a warning and excluded downstream.

use std::collections::BTreeSet;

use crate::types::Warning;

/// Replaces comment bodies and string/char literal contents with spaces.
///
/// The output has the same length and newline positions as the input, so
/// byte offsets and line numbers computed on it map directly back to the
/// original text. String delimiters are kept so tokens do not merge.
pub fn strip_comments_and_strings(src: &str) -> String {
    let bytes = src.as_bytes();
    let mut out = bytes.to_vec();
    let mut i = 0;

    while i < bytes.len() {
        match bytes[i] {
            b'/' if i + 1 < bytes.len() && bytes[i + 1] == b'/' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    out[i] = b' ';
                    i += 1;
                }
            }
            b'/' if i + 1 < bytes.len() && bytes[i + 1] == b'*' => {
                out[i] = b' ';
                out[i + 1] = b' ';
                i += 2;
                while i < bytes.len() {
                    if bytes[i] == b'*' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
                        out[i] = b' ';
                        out[i + 1] = b' ';
                        i += 2;
                        break;
                    }
                    if bytes[i] != b'\n' {
                        out[i] = b' ';
                    }
                    i += 1;
                }
            }
            b'"' if i > 0 && bytes[i - 1] == b'R' => {
                // Raw string literal: R"delim( ... )delim"
                let delim_start = i + 1;
                let mut j = delim_start;
                while j < bytes.len() && bytes[j] != b'(' && j - delim_start < 16 {
                    j += 1;
                }
                if j >= bytes.len() || bytes[j] != b'(' {
                    i += 1;
                    continue;
                }
                let delim = &bytes[delim_start..j];
                let mut closer = Vec::with_capacity(delim.len() + 2);
                closer.push(b')');
                closer.extend_from_slice(delim);
                closer.push(b'"');
                let body_start = j + 1;
                let rest = &bytes[body_start..];
                let end = rest
                    .windows(closer.len())
                    .position(|w| w == closer.as_slice())
                    .map(|p| body_start + p);
                // Blank everything up to (but not including) the final quote
                // so no stray `)` survives to confuse paren balancing.
                let blank_end = end.map(|e| e + closer.len() - 1).unwrap_or(bytes.len());
                for b in out.iter_mut().take(blank_end).skip(delim_start) {
                    if *b != b'\n' {
                        *b = b' ';
                    }
                }
                i = end.map(|e| e + closer.len()).unwrap_or(bytes.len());
            }
            b'"' | b'\'' => {
                let quote = bytes[i];
                i += 1;
                while i < bytes.len() && bytes[i] != quote {
                    if bytes[i] == b'\\' && i + 1 < bytes.len() {
                        out[i] = b' ';
                        if bytes[i + 1] != b'\n' {
                            out[i + 1] = b' ';
                        }
                        i += 2;
                        continue;
                    }
                    if bytes[i] != b'\n' {
                        out[i] = b' ';
                    }
                    i += 1;
                }
                if i < bytes.len() {
                    i += 1;
                }
            }
            _ => i += 1,
        }
    }

    String::from_utf8(out).expect("blanking preserves utf-8 for ascii replacements")
}

/// Blanks preprocessor directive lines (and their `\` continuations) so that
/// macro *definitions* are never mistaken for invocations. Branch contents
/// themselves are left in place: all conditional branches get scanned.
pub fn blank_preprocessor_lines(clean: &str) -> String {
    let mut out = String::with_capacity(clean.len());
    let mut in_directive = false;
    for line in clean.split_inclusive('\n') {
        let body = line.strip_suffix('\n').unwrap_or(line);
        let is_start = !in_directive && body.trim_start().starts_with('#');
        if is_start || in_directive {
            in_directive = body.trim_end().ends_with('\\');
            out.extend(body.chars().map(|_| ' '));
            if line.ends_with('\n') {
                out.push('\n');
            }
        } else {
            in_directive = false;
            out.push_str(line);
        }
    }
    out
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// 1-based line number of a byte offset.
pub fn line_of(text: &str, offset: usize) -> usize {
    1 + text.as_bytes()[..offset].iter().filter(|&&b| b == b'\n').count()
}

/// A macro invocation located in a source file. Offsets index into the file.
#[derive(Debug, Clone)]
pub struct MacroSite {
    pub macro_name: String,
    pub start: usize,
    pub end: usize,
    pub line: usize,
}

/// Finds every `MACRO( ... )` invocation of the given macros, capturing the
/// balanced-parenthesis argument span (which may cross lines). Sites whose
/// parentheses never balance before end-of-file are reported as warnings and
/// skipped; the scan itself never aborts.
pub fn find_macro_sites(
    clean: &str,
    macros: &BTreeSet<String>,
    file_label: &str,
    warnings: &mut Vec<Warning>,
) -> Vec<MacroSite> {
    let bytes = clean.as_bytes();
    let mut sites = Vec::new();

    for name in macros {
        let nb = name.as_bytes();
        let mut from = 0;
        while let Some(pos) = find_from(bytes, nb, from) {
            from = pos + 1;
            if pos > 0 && is_ident_byte(bytes[pos - 1]) {
                continue;
            }
            let after = pos + nb.len();
            if after < bytes.len() && is_ident_byte(bytes[after]) {
                continue;
            }
            let mut open = after;
            while open < bytes.len() && (bytes[open] == b' ' || bytes[open] == b'\t') {
                open += 1;
            }
            if open >= bytes.len() || bytes[open] != b'(' {
                continue;
            }
            match matching_paren(bytes, open) {
                Some(close) => {
                    sites.push(MacroSite {
                        macro_name: name.clone(),
                        start: pos,
                        end: close + 1,
                        line: line_of(clean, pos),
                    });
                    from = close + 1;
                }
                None => {
                    warnings.push(Warning::new(
                        "mine",
                        format!("{file_label}:{}", line_of(clean, pos)),
                        format!("unbalanced parentheses in {name} invocation; site skipped"),
                    ));
                    from = bytes.len();
                }
            }
        }
    }

    sites.sort_by_key(|s| s.start);
    sites
}

fn find_from(haystack: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if from >= haystack.len() {
        return None;
    }
    haystack[from..]
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

/// Index of the `)` matching the `(` at `open`, or None if it never closes.
pub fn matching_paren(bytes: &[u8], open: usize) -> Option<usize> {
    debug_assert_eq!(bytes[open], b'(');
    let mut depth = 0usize;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        match b {
            b'(' => depth += 1,
            b')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn matching_brace(bytes: &[u8], open: usize) -> Option<usize> {
    debug_assert_eq!(bytes[open], b'{');
    let mut depth = 0usize;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        match b {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// A recovered function definition span within one file.
#[derive(Debug, Clone)]
pub struct FnSpan {
    pub name: String,
    pub return_type: String,
    /// Raw parameter-list text between the header parentheses.
    pub params_src: String,
    /// Byte offset where the header begins (first non-whitespace after the
    /// previous declaration boundary).
    pub header_start: usize,
    pub body_open: usize,
    pub body_close: usize,
    /// Header could not be parsed confidently; excluded downstream.
    pub ambiguous: bool,
}

const CONTROL_KEYWORDS: [&str; 9] = [
    "if", "for", "while", "switch", "catch", "return", "sizeof", "decltype", "static_assert",
];

const TRAILING_QUALIFIERS: [&str; 6] = ["const", "noexcept", "override", "final", "mutable", "try"];

/// Recovers function definition spans from blanked source text.
///
/// Header = text between the nearest preceding declaration boundary and the
/// body's opening brace. Namespace / class / initializer braces are treated
/// as transparent contexts; recognized function bodies are skipped wholesale
/// so nested lambdas stay inside their enclosing function's span.
pub fn find_functions(clean: &str) -> Vec<FnSpan> {
    let bytes = clean.as_bytes();
    let mut spans = Vec::new();
    scan_context(clean, bytes, 0, bytes.len(), &mut spans);
    spans.sort_by_key(|s| s.body_open);
    spans
}

fn scan_context(clean: &str, bytes: &[u8], start: usize, end: usize, spans: &mut Vec<FnSpan>) {
    let mut i = start;
    let mut decl_start = start;
    // The two most recent complete top-level paren groups since the last
    // declaration boundary: (open, close) pairs, newest last.
    let mut groups: Vec<(usize, usize)> = Vec::new();

    while i < end {
        match bytes[i] {
            b'(' => match matching_paren(bytes, i) {
                Some(close) if close < end => {
                    if groups.len() == 2 {
                        groups.remove(0);
                    }
                    groups.push((i, close));
                    i = close + 1;
                }
                _ => return,
            },
            b';' => {
                decl_start = i + 1;
                groups.clear();
                i += 1;
            }
            b'{' => {
                let close = match matching_brace(bytes, i) {
                    Some(c) if c < end => c,
                    _ => return,
                };
                if let Some(span) = classify_function(clean, bytes, decl_start, i, close, &groups) {
                    spans.push(span);
                } else {
                    scan_context(clean, bytes, i + 1, close, spans);
                }
                decl_start = close + 1;
                groups.clear();
                i = close + 1;
            }
            _ => i += 1,
        }
    }
}

/// Decides whether the brace at `body_open` opens a function body, and if so
/// parses its header. Returns None for transparent blocks (namespaces,
/// classes, initializer lists).
fn classify_function(
    clean: &str,
    bytes: &[u8],
    decl_start: usize,
    body_open: usize,
    body_close: usize,
    groups: &[(usize, usize)],
) -> Option<FnSpan> {
    let (g_open, g_close) = *groups.last()?;

    // Between the parameter list and `{` only qualifiers or a trailing
    // return type may appear.
    let between = clean[g_close + 1..body_open].trim();
    if !between.is_empty() && !is_trailing_qualifiers(between) {
        return None;
    }

    // Token immediately before the parameter list.
    let head = clean[decl_start..g_open].trim_end();
    let mut name = trailing_name_token(head).to_string();
    let mut return_type = collapse_ws(&head[..head.len() - name.len()]);
    let mut ambiguous = false;

    if name.is_empty() {
        // `MACRO(name)(params) {` style: the token before the parameter list
        // is itself a paren group; recover the identifier inside it.
        if head.ends_with(')') && groups.len() == 2 {
            let (n_open, n_close) = groups[0];
            name = trailing_name_token(clean[n_open + 1..n_close].trim()).to_string();
            return_type = String::new();
            if name.is_empty() {
                ambiguous = true;
            }
        } else {
            return None;
        }
    }

    let name = name.trim_start_matches("::").to_string();
    if CONTROL_KEYWORDS.contains(&name.as_str()) {
        return None;
    }
    if name.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        ambiguous = true;
    }

    let header_start = decl_start
        + clean[decl_start..g_open]
            .find(|c: char| !c.is_whitespace())
            .unwrap_or(0);

    Some(FnSpan {
        name,
        return_type,
        params_src: clean[g_open + 1..g_close].to_string(),
        header_start,
        body_open,
        body_close,
        ambiguous: ambiguous || bytes[header_start] == b'{',
    })
}

fn is_trailing_qualifiers(text: &str) -> bool {
    let text = text.trim();
    if let Some(rest) = text.strip_prefix("->") {
        return !rest.trim().is_empty();
    }
    text.split_whitespace().all(|tok| {
        TRAILING_QUALIFIERS.contains(&tok)
            || tok == "&"
            || tok == "&&"
            || tok.strip_prefix("noexcept").is_some_and(|r| r.starts_with('('))
    })
}

/// Longest trailing `[A-Za-z0-9_:~]+` run, i.e. a (possibly qualified) name.
fn trailing_name_token(text: &str) -> &str {
    let trimmed = text.trim_end();
    let start = trimmed
        .rfind(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == ':' || c == '~'))
        .map(|p| p + 1)
        .unwrap_or(0);
    &trimmed[start..]
}

fn collapse_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits a parameter-list body on top-level commas and extracts
/// `(name, declared_type)` pairs. Unnamed parameters are skipped: a check
/// cannot reference them.
pub fn split_parameters(params_src: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for piece in split_top_level(params_src) {
        let piece = piece.trim();
        if piece.is_empty() || piece == "void" || piece == "..." {
            continue;
        }
        // Drop default arguments.
        let decl = match top_level_eq(piece) {
            Some(idx) => piece[..idx].trim_end(),
            None => piece,
        };
        let stripped = decl
            .trim_end()
            .trim_end_matches(|c: char| c == '[' || c == ']' || c.is_whitespace());
        let name_start = stripped
            .rfind(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .map(|p| p + 1)
            .unwrap_or(0);
        let name = &stripped[name_start..];
        let ty = collapse_ws(&stripped[..name_start]);
        if name.is_empty() || ty.is_empty() {
            // Single-token or anonymous parameter: nothing a check could name.
            continue;
        }
        out.push((name.to_string(), ty.trim_end_matches([' ', '&', '*']).to_string()));
    }
    out
}

fn split_top_level(text: &str) -> Vec<&str> {
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

fn top_level_eq(text: &str) -> Option<usize> {
    let mut depth = 0i32;
    let mut angle = 0i32;
    for (i, c) in text.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            '<' => angle += 1,
            '>' => angle = (angle - 1).max(0),
            '=' if depth == 0 && angle == 0 => return Some(i),
            _ => {}
        }
    }
    None
}

/// Whole-word containment: `needle` occurs in `haystack` with non-identifier
/// characters (or boundaries) on both sides. Member access like `x.sizes()`
/// therefore still counts as a reference to `x`.
pub fn contains_word(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let hb = haystack.as_bytes();
    let nb = needle.as_bytes();
    let mut from = 0;
    while let Some(pos) = find_from(hb, nb, from) {
        let left_ok = pos == 0 || !is_ident_byte(hb[pos - 1]);
        let right = pos + nb.len();
        let right_ok = right >= hb.len() || !is_ident_byte(hb[right]);
        if left_ok && right_ok {
            return true;
        }
        from = pos + 1;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blanking_preserves_length_and_lines() {
        let src = "int x = 1; // TORCH_CHECK(fake)\nconst char* s = \"TORCH_CHECK(also fake)\";\n/* TORCH_CHECK(no) */ int y;\n";
        let clean = strip_comments_and_strings(src);
        assert_eq!(clean.len(), src.len());
        assert_eq!(
            clean.matches('\n').count(),
            src.matches('\n').count()
        );
        assert!(!clean.contains("TORCH_CHECK"));
        assert!(clean.contains("int x = 1;"));
    }

    #[test]
    fn escaped_quotes_do_not_end_strings() {
        let src = r#"f("a\"b TORCH_CHECK(x)", g);"#;
        let clean = strip_comments_and_strings(src);
        assert!(!clean.contains("TORCH_CHECK"));
        assert!(clean.contains(", g);"));
    }

    #[test]
    fn preprocessor_lines_blanked_with_continuations() {
        let src = "#define MY_CHECK(c) \\\n  TORCH_CHECK(c)\nTORCH_CHECK(x);\n";
        let clean = blank_preprocessor_lines(&strip_comments_and_strings(src));
        let mut warnings = Vec::new();
        let macros = BTreeSet::from(["TORCH_CHECK".to_string()]);
        let sites = find_macro_sites(&clean, &macros, "t", &mut warnings);
        assert_eq!(sites.len(), 1);
        assert_eq!(sites[0].line, 3);
    }

    #[test]
    fn multiline_invocation_is_captured_whole() {
        let src = "void f(int a) {\n  TORCH_CHECK(\n    a > 0,\n    \"msg\");\n}\n";
        let clean = strip_comments_and_strings(src);
        let mut warnings = Vec::new();
        let macros = BTreeSet::from(["TORCH_CHECK".to_string()]);
        let sites = find_macro_sites(&clean, &macros, "t", &mut warnings);
        assert_eq!(sites.len(), 1);
        assert_eq!(sites[0].line, 2);
        let raw = &src[sites[0].start..sites[0].end];
        assert!(raw.starts_with("TORCH_CHECK("));
        assert!(raw.ends_with(')'));
    }

    #[test]
    fn unbalanced_site_warns_and_skips() {
        let src = "void f() {\n  TORCH_CHECK(oops\n";
        let clean = strip_comments_and_strings(src);
        let mut warnings = Vec::new();
        let macros = BTreeSet::from(["TORCH_CHECK".to_string()]);
        let sites = find_macro_sites(&clean, &macros, "t", &mut warnings);
        assert!(sites.is_empty());
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].message.contains("unbalanced"));
    }

    #[test]
    fn finds_free_function_in_namespace() {
        let src = "namespace at { namespace native {\nTensor& abs_(Tensor& self) {\n  return self;\n}\n}}\n";
        let clean = strip_comments_and_strings(src);
        let fns = find_functions(&clean);
        assert_eq!(fns.len(), 1);
        assert_eq!(fns[0].name, "abs_");
        assert_eq!(fns[0].return_type, "Tensor&");
        assert_eq!(split_parameters(&fns[0].params_src), vec![("self".to_string(), "Tensor".to_string())]);
    }

    #[test]
    fn impl_macro_header_recovers_inner_name() {
        let src = "TORCH_IMPL_FUNC(abs_out)(const Tensor& self, const Tensor& result) {\n  int x = 0;\n}\n";
        let clean = strip_comments_and_strings(src);
        let fns = find_functions(&clean);
        assert_eq!(fns.len(), 1);
        assert_eq!(fns[0].name, "abs_out");
        let params = split_parameters(&fns[0].params_src);
        assert_eq!(params.len(), 2);
        assert_eq!(params[0].0, "self");
        assert_eq!(params[1].0, "result");
    }

    #[test]
    fn lambda_body_stays_inside_function_span() {
        let src = "void outer(int n) {\n  auto f = [&](int k) { return k + n; };\n  f(1);\n}\n";
        let clean = strip_comments_and_strings(src);
        let fns = find_functions(&clean);
        assert_eq!(fns.len(), 1);
        assert_eq!(fns[0].name, "outer");
    }

    #[test]
    fn parameter_defaults_and_templates_split_correctly() {
        let params = split_parameters(
            "const std::map<int, int>& table, int64_t dim = -1, IntArrayRef sizes[]",
        );
        assert_eq!(
            params,
            vec![
                ("table".to_string(), "const std::map<int, int>".to_string()),
                ("dim".to_string(), "int64_t".to_string()),
                ("sizes".to_string(), "IntArrayRef".to_string()),
            ]
        );
    }

    #[test]
    fn word_containment_handles_member_access() {
        assert!(contains_word("!self.is_complex()", "self"));
        assert!(contains_word("x.sizes() == y.sizes()", "y"));
        assert!(!contains_word("herself.is_complex()", "self"));
        assert!(!contains_word("self_update()", "self"));
    }
}
