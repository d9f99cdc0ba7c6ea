//! Check mining: scans native source trees for configurable check macros and
//! assembles check-related code blocks (function interface plus the checks
//! that reference its parameters).

mod lexer;

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::types::Warning;

pub use lexer::contains_word;

/// One check-macro invocation found in a source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckSite {
    pub file_path: PathBuf,
    /// 1-based line of the macro name.
    pub line: usize,
    pub macro_name: String,
    /// Full invocation text including arguments, taken verbatim from the
    /// original source (message strings intact).
    pub raw_text: String,
    /// Qualified name of the enclosing function, empty when the site lies
    /// outside every recovered function span.
    pub enclosing_function: String,
}

/// A function's interface as recovered from its header text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionInterface {
    pub name: String,
    /// Ordered `(name, declared_type)` pairs.
    pub parameters: Vec<(String, String)>,
    pub return_type: String,
    /// 1-based inclusive line span of the whole definition.
    pub source_span: (usize, usize),
}

impl FunctionInterface {
    pub fn header_text(&self) -> String {
        let params = self
            .parameters
            .iter()
            .map(|(name, ty)| format!("{ty} {name}"))
            .collect::<Vec<_>>()
            .join(", ");
        if self.return_type.is_empty() {
            format!("{}({})", self.name, params)
        } else {
            format!("{} {}({})", self.return_type, self.name, params)
        }
    }
}

/// The analysis unit: one function interface plus its retained checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckBlock {
    pub interface: FunctionInterface,
    pub file_path: PathBuf,
    pub checks: Vec<CheckSite>,
    /// Interface header followed by the check statements, nothing else.
    pub block_text: String,
}

impl CheckBlock {
    fn assemble(interface: FunctionInterface, file_path: PathBuf, checks: Vec<CheckSite>) -> Self {
        let mut text = interface.header_text();
        text.push_str(" {\n");
        for check in &checks {
            text.push_str("  ");
            text.push_str(&check.raw_text);
            text.push_str(";\n");
        }
        text.push('}');
        CheckBlock {
            interface,
            file_path,
            checks,
            block_text: text,
        }
    }
}

/// Scan result: sites plus the non-fatal issues hit along the way.
#[derive(Debug, Default)]
pub struct ScanOutcome {
    pub sites: Vec<CheckSite>,
    pub warnings: Vec<Warning>,
}

/// Mining result: parameter-filtered blocks in deterministic order.
#[derive(Debug, Default)]
pub struct MineOutcome {
    pub blocks: Vec<CheckBlock>,
    pub warnings: Vec<Warning>,
}

fn source_files(root: &Path, extensions: &BTreeSet<String>) -> Result<Vec<PathBuf>> {
    if !root.exists() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "source root does not exist"),
        ));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(root).follow_links(false) {
        let entry = entry.map_err(|e| {
            Error::io(
                root,
                std::io::Error::other(e.to_string()),
            )
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy();
        if extensions.iter().any(|ext| name.ends_with(ext.as_str())) {
            files.push(entry.into_path());
        }
    }
    files.sort();
    Ok(files)
}

struct FileScan {
    sites: Vec<CheckSite>,
    functions: Vec<(FunctionInterface, bool)>,
    warnings: Vec<Warning>,
}

fn scan_file(path: &Path, macros: &BTreeSet<String>) -> Result<FileScan> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let clean = lexer::blank_preprocessor_lines(&lexer::strip_comments_and_strings(&raw));
    let label = path.display().to_string();
    let mut warnings = Vec::new();

    let macro_sites = lexer::find_macro_sites(&clean, macros, &label, &mut warnings);
    let fn_spans = lexer::find_functions(&clean);

    let mut functions = Vec::with_capacity(fn_spans.len());
    for span in &fn_spans {
        let parameters = lexer::split_parameters(&span.params_src);
        let mut ambiguous = span.ambiguous;
        let mut seen = BTreeSet::new();
        for (name, _) in &parameters {
            if !seen.insert(name.clone()) {
                ambiguous = true;
            }
        }
        if ambiguous {
            warnings.push(Warning::new(
                "mine",
                format!("{label}:{}", lexer::line_of(&clean, span.header_start)),
                format!(
                    "ambiguous header for `{}`; function excluded from analysis",
                    span.name
                ),
            ));
        }
        functions.push((
            FunctionInterface {
                name: span.name.clone(),
                parameters,
                return_type: span.return_type.clone(),
                source_span: (
                    lexer::line_of(&clean, span.header_start),
                    lexer::line_of(&clean, span.body_close),
                ),
            },
            ambiguous,
        ));
    }

    let mut sites = Vec::with_capacity(macro_sites.len());
    for m in macro_sites {
        let enclosing = fn_spans
            .iter()
            .position(|s| m.start > s.body_open && m.start < s.body_close);
        let enclosing_function = enclosing
            .map(|idx| fn_spans[idx].name.clone())
            .unwrap_or_default();
        if enclosing.is_none() {
            warnings.push(Warning::new(
                "mine",
                format!("{label}:{}", m.line),
                format!(
                    "{} site outside any recovered function; excluded from blocks",
                    m.macro_name
                ),
            ));
        }
        sites.push(CheckSite {
            file_path: path.to_path_buf(),
            line: m.line,
            macro_name: m.macro_name,
            raw_text: raw[m.start..m.end].to_string(),
            enclosing_function,
        });
    }

    Ok(FileScan {
        sites,
        functions,
        warnings,
    })
}

/// Finds every invocation of the given macros under `root`, in deterministic
/// (path, line) order. One malformed site never aborts the scan.
pub fn scan_sources(
    root: &Path,
    macros: &BTreeSet<String>,
    extensions: &BTreeSet<String>,
) -> Result<ScanOutcome> {
    if macros.is_empty() {
        return Err(Error::Config("macro set must not be empty".into()));
    }
    let files = source_files(root, extensions)?;
    let scans: Vec<Result<FileScan>> = files
        .par_iter()
        .map(|path| scan_file(path, macros))
        .collect();

    let mut outcome = ScanOutcome::default();
    for scan in scans {
        let scan = scan?;
        outcome.sites.extend(scan.sites);
        outcome.warnings.extend(scan.warnings);
    }
    outcome.sites.sort_by(|a, b| {
        a.file_path
            .cmp(&b.file_path)
            .then(a.line.cmp(&b.line))
    });
    Ok(outcome)
}

/// Builds a check block from a standalone function definition: the header
/// plus every macro invocation found in the text. Line numbers are relative
/// to the snippet (1-based). A function without checks yields an empty-check
/// block; callers filter those out downstream.
pub fn extract_block(
    function_text: &str,
    interface: &FunctionInterface,
    macros: &BTreeSet<String>,
) -> CheckBlock {
    let clean =
        lexer::blank_preprocessor_lines(&lexer::strip_comments_and_strings(function_text));
    let mut warnings = Vec::new();
    let sites = lexer::find_macro_sites(&clean, macros, "<snippet>", &mut warnings);
    let checks = sites
        .into_iter()
        .map(|m| CheckSite {
            file_path: PathBuf::new(),
            line: m.line,
            macro_name: m.macro_name,
            raw_text: function_text[m.start..m.end].to_string(),
            enclosing_function: interface.name.clone(),
        })
        .collect();
    CheckBlock::assemble(interface.clone(), PathBuf::new(), checks)
}

/// Retains only checks that reference at least one interface parameter as a
/// whole-word token. May leave the block with no checks.
pub fn filter_param_checked(block: &CheckBlock) -> CheckBlock {
    let checks = block
        .checks
        .iter()
        .filter(|check| {
            block
                .interface
                .parameters
                .iter()
                .any(|(name, _)| contains_word(&check.raw_text, name))
        })
        .cloned()
        .collect();
    CheckBlock::assemble(block.interface.clone(), block.file_path.clone(), checks)
}

/// Full mining pass: scan, group sites by enclosing function, filter to
/// parameter-referencing checks, and drop check-less blocks. Output order is
/// deterministic: (path, first check line).
pub fn mine_tree(
    root: &Path,
    macros: &BTreeSet<String>,
    extensions: &BTreeSet<String>,
) -> Result<MineOutcome> {
    if macros.is_empty() {
        return Err(Error::Config("macro set must not be empty".into()));
    }
    let files = source_files(root, extensions)?;
    let scans: Vec<Result<FileScan>> = files
        .par_iter()
        .map(|path| scan_file(path, macros))
        .collect();

    let mut outcome = MineOutcome::default();
    for (path, scan) in files.iter().zip(scans) {
        let scan = scan?;
        outcome.warnings.extend(scan.warnings);
        for (interface, ambiguous) in &scan.functions {
            if *ambiguous {
                continue;
            }
            let checks: Vec<CheckSite> = scan
                .sites
                .iter()
                .filter(|s| {
                    s.enclosing_function == interface.name
                        && s.line >= interface.source_span.0
                        && s.line <= interface.source_span.1
                })
                .cloned()
                .collect();
            if checks.is_empty() {
                continue;
            }
            let block = filter_param_checked(&CheckBlock::assemble(
                interface.clone(),
                path.clone(),
                checks,
            ));
            if !block.checks.is_empty() {
                outcome.blocks.push(block);
            }
        }
    }
    outcome.blocks.sort_by(|a, b| {
        a.file_path
            .cmp(&b.file_path)
            .then(a.interface.source_span.0.cmp(&b.interface.source_span.0))
    });
    Ok(outcome)
}

/// JSON Lines record for one check block, the miner's on-disk format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockRecord {
    pub function: String,
    pub file: String,
    pub span: [usize; 2],
    pub params: Vec<ParamRecord>,
    pub checks: Vec<CheckRecord>,
    pub block_text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    #[serde(rename = "type")]
    pub declared_type: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub line: usize,
    #[serde(rename = "macro")]
    pub macro_name: String,
    pub text: String,
}

impl From<&CheckBlock> for BlockRecord {
    fn from(block: &CheckBlock) -> Self {
        BlockRecord {
            function: block.interface.name.clone(),
            file: block.file_path.display().to_string(),
            span: [block.interface.source_span.0, block.interface.source_span.1],
            params: block
                .interface
                .parameters
                .iter()
                .map(|(name, ty)| ParamRecord {
                    name: name.clone(),
                    declared_type: ty.clone(),
                })
                .collect(),
            checks: block
                .checks
                .iter()
                .map(|c| CheckRecord {
                    line: c.line,
                    macro_name: c.macro_name.clone(),
                    text: c.raw_text.clone(),
                })
                .collect(),
            block_text: block.block_text.clone(),
        }
    }
}

impl BlockRecord {
    pub fn into_block(self) -> CheckBlock {
        let interface = FunctionInterface {
            name: self.function.clone(),
            parameters: self
                .params
                .into_iter()
                .map(|p| (p.name, p.declared_type))
                .collect(),
            return_type: String::new(),
            source_span: (self.span[0], self.span[1]),
        };
        let file_path = PathBuf::from(&self.file);
        let checks = self
            .checks
            .into_iter()
            .map(|c| CheckSite {
                file_path: file_path.clone(),
                line: c.line,
                macro_name: c.macro_name,
                raw_text: c.text,
                enclosing_function: self.function.clone(),
            })
            .collect();
        CheckBlock {
            interface,
            file_path,
            checks,
            block_text: self.block_text,
        }
    }
}

pub fn write_blocks_jsonl(path: &Path, blocks: &[CheckBlock]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for block in blocks {
        let record = BlockRecord::from(block);
        serde_json::to_writer(&mut file, &record)?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_blocks_jsonl(path: &Path) -> Result<Vec<CheckBlock>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut blocks = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: BlockRecord = serde_json::from_str(&line).map_err(|e| Error::Record {
            path: path.to_path_buf(),
            line: idx + 1,
            detail: e.to_string(),
        })?;
        blocks.push(record.into_block());
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torch_macros() -> BTreeSet<String> {
        BTreeSet::from(["TORCH_CHECK".to_string(), "AT_CHECK".to_string()])
    }

    fn write_tree(files: &[(&str, &str)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (rel, content) in files {
            let path = dir.path().join(rel);
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(path, content).unwrap();
        }
        dir
    }

    const ABS_SRC: &str = r#"
namespace at { namespace native {

Tensor& abs_(Tensor& self) {
  TORCH_CHECK(!self.is_complex(), "In-place abs is not supported for complex tensors.");
  return unary_op_impl_(self, at::abs_out);
}

}} // namespace
"#;

    #[test]
    fn scan_finds_single_abs_check() {
        let dir = write_tree(&[("UnaryOps.cc", ABS_SRC)]);
        let outcome = scan_sources(
            dir.path(),
            &BTreeSet::from(["TORCH_CHECK".to_string()]),
            &BTreeSet::from([".cc".to_string()]),
        )
        .unwrap();
        assert_eq!(outcome.sites.len(), 1);
        let site = &outcome.sites[0];
        assert_eq!(site.line, 5);
        assert_eq!(site.macro_name, "TORCH_CHECK");
        assert_eq!(site.enclosing_function, "abs_");
        assert!(site.raw_text.starts_with("TORCH_CHECK("));
        assert!(site.raw_text.contains("is_complex"));
    }

    #[test]
    fn scan_of_empty_tree_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = scan_sources(
            dir.path(),
            &torch_macros(),
            &BTreeSet::from([".cc".to_string()]),
        )
        .unwrap();
        assert!(outcome.sites.is_empty());
        assert!(outcome.warnings.is_empty());
    }

    #[test]
    fn scan_missing_root_is_io_error() {
        let err = scan_sources(
            Path::new("/nonexistent/definitely/missing"),
            &torch_macros(),
            &BTreeSet::from([".cc".to_string()]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn scan_is_deterministic() {
        let dir = write_tree(&[
            ("b/two.cc", ABS_SRC),
            ("a/one.cc", ABS_SRC),
            (
                "a/zero.h",
                "void f(int k) {\n  TORCH_CHECK(k > 0, \"k\");\n  AT_CHECK(k < 10, \"k\");\n}\n",
            ),
        ]);
        let exts = BTreeSet::from([".cc".to_string(), ".h".to_string()]);
        let first = scan_sources(dir.path(), &torch_macros(), &exts).unwrap();
        let second = scan_sources(dir.path(), &torch_macros(), &exts).unwrap();
        assert_eq!(first.sites, second.sites);
        assert_eq!(first.sites.len(), 4);
        let order: Vec<_> = first
            .sites
            .iter()
            .map(|s| (s.file_path.clone(), s.line))
            .collect();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(order, sorted);
    }

    #[test]
    fn extract_block_strips_other_statements() {
        let src = r#"Tensor pool2d(const Tensor& input, IntArrayRef kernel, IntArrayRef stride_arg) {
  auto k = kernel.size();
  TORCH_CHECK(k == 2, "kernel must have two elements");
  auto out = compute(input);
  TORCH_CHECK(stride_arg.empty() || stride_arg.size() == 2, "stride must be empty or 2");
  return out;
}"#;
        let interface = FunctionInterface {
            name: "pool2d".into(),
            parameters: vec![
                ("input".into(), "const Tensor".into()),
                ("kernel".into(), "IntArrayRef".into()),
                ("stride_arg".into(), "IntArrayRef".into()),
            ],
            return_type: "Tensor".into(),
            source_span: (1, 7),
        };
        let block = extract_block(src, &interface, &torch_macros());
        assert_eq!(block.checks.len(), 2);
        assert!(block.block_text.contains("pool2d"));
        assert!(!block.block_text.contains("compute(input)"));
        assert!(!block.block_text.contains("auto k"));
        for check in &block.checks {
            assert!(block.block_text.contains(&check.raw_text));
        }
    }

    #[test]
    fn extract_block_without_macros_yields_empty_checks() {
        let src = "int f(int a) {\n  return a + 1;\n}";
        let interface = FunctionInterface {
            name: "f".into(),
            parameters: vec![("a".into(), "int".into())],
            return_type: "int".into(),
            source_span: (1, 3),
        };
        let block = extract_block(src, &interface, &torch_macros());
        assert!(block.checks.is_empty());
    }

    #[test]
    fn extract_block_keeps_check_inside_lambda() {
        let src = r#"void g(Tensor t, int n, List xs) {
  TORCH_CHECK(n > 0, "n");
  auto fn = [&]() {
    TORCH_CHECK(!t.is_complex(), "t");
  };
  TORCH_CHECK(xs.size() > 0, "xs");
}"#;
        let interface = FunctionInterface {
            name: "g".into(),
            parameters: vec![
                ("t".into(), "Tensor".into()),
                ("n".into(), "int".into()),
                ("xs".into(), "List".into()),
            ],
            return_type: "void".into(),
            source_span: (1, 7),
        };
        let block = extract_block(src, &interface, &torch_macros());
        assert_eq!(block.checks.len(), 3);
    }

    #[test]
    fn filter_keeps_param_references_and_drops_locals() {
        let interface = FunctionInterface {
            name: "h".into(),
            parameters: vec![("self".into(), "Tensor".into())],
            return_type: "Tensor".into(),
            source_span: (1, 5),
        };
        let make_check = |text: &str| CheckSite {
            file_path: PathBuf::new(),
            line: 2,
            macro_name: "TORCH_CHECK".into(),
            raw_text: text.to_string(),
            enclosing_function: "h".into(),
        };
        let block = CheckBlock::assemble(
            interface,
            PathBuf::new(),
            vec![
                make_check("TORCH_CHECK(!self.is_complex(), \"complex\")"),
                make_check("TORCH_CHECK(tmp > 0, \"local only\")"),
            ],
        );
        let filtered = filter_param_checked(&block);
        assert_eq!(filtered.checks.len(), 1);
        assert!(filtered.checks[0].raw_text.contains("self"));
        // Monotonicity: filtered checks are a subset of the original.
        assert!(filtered
            .checks
            .iter()
            .all(|c| block.checks.contains(c)));
    }

    #[test]
    fn mine_tree_filters_and_orders() {
        let dir = write_tree(&[(
            "ops.cc",
            r#"
namespace at {

Tensor& abs_(Tensor& self) {
  TORCH_CHECK(!self.is_complex(), "complex");
  return self;
}

int helper() {
  int tmp = 3;
  TORCH_CHECK(tmp > 0, "local");
  return tmp;
}

void no_checks(int a) {
  (void)a;
}

}
"#,
        )]);
        let outcome = mine_tree(
            dir.path(),
            &torch_macros(),
            &BTreeSet::from([".cc".to_string()]),
        )
        .unwrap();
        // helper()'s check references no parameter, no_checks has none at all.
        assert_eq!(outcome.blocks.len(), 1);
        assert_eq!(outcome.blocks[0].interface.name, "abs_");
        assert_eq!(outcome.blocks[0].checks.len(), 1);
    }

    #[test]
    fn span_contains_every_check_line() {
        let dir = write_tree(&[("ops.cc", ABS_SRC)]);
        let outcome = mine_tree(
            dir.path(),
            &torch_macros(),
            &BTreeSet::from([".cc".to_string()]),
        )
        .unwrap();
        for block in &outcome.blocks {
            let (start, end) = block.interface.source_span;
            assert!(start <= end);
            for check in &block.checks {
                assert!(check.line >= start && check.line <= end);
            }
        }
    }

    #[test]
    fn blocks_jsonl_round_trip() {
        let dir = write_tree(&[("ops.cc", ABS_SRC)]);
        let outcome = mine_tree(
            dir.path(),
            &torch_macros(),
            &BTreeSet::from([".cc".to_string()]),
        )
        .unwrap();
        let out = dir.path().join("blocks.jsonl");
        write_blocks_jsonl(&out, &outcome.blocks).unwrap();
        let back = read_blocks_jsonl(&out).unwrap();
        assert_eq!(back.len(), outcome.blocks.len());
        assert_eq!(back[0].interface.name, outcome.blocks[0].interface.name);
        assert_eq!(back[0].block_text, outcome.blocks[0].block_text);
        assert_eq!(back[0].checks, outcome.blocks[0].checks);
    }
}
