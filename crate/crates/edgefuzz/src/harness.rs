//! Program execution and triage: runs generated programs in isolated child
//! processes with wall-clock timeouts, classifies outcomes into bug and
//! non-bug classes, compares outputs across device tokens, and deduplicates
//! bug reports by fingerprint.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::config::TargetConfig;
use crate::error::{Error, Result};
use crate::types::Warning;

/// Literal token device-parameterized programs embed; `compare_devices`
/// substitutes one device name per run.
pub const DEVICE_PLACEHOLDER: &str = "{{DEVICE}}";

/// Prefix of the canonical numeric output line: `RESULT: [v1, v2, ...]`.
pub const RESULT_PREFIX: &str = "RESULT:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExitStatus {
    CleanExit,
    NonzeroExit { code: i32 },
    Signaled { signal: String },
    TimedOut,
}

/// What one child-process run did. Stream captures are capped (tail kept)
/// and stored lossily as text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExitStatus,
    pub stdout: String,
    pub stderr: String,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeClass {
    Success,
    GracefulRejection,
    AbortSignal,
    Segfault,
    RuntimeErrorPattern,
    InconsistentOutput,
    Hang,
}

impl OutcomeClass {
    pub fn is_bug(&self) -> bool {
        matches!(
            self,
            OutcomeClass::AbortSignal
                | OutcomeClass::Segfault
                | OutcomeClass::RuntimeErrorPattern
                | OutcomeClass::InconsistentOutput
        )
    }

    /// Crash dominance: signals outrank runtime-error patterns, which
    /// outrank everything an output comparison could add.
    pub fn severity(&self) -> u8 {
        match self {
            OutcomeClass::Segfault => 6,
            OutcomeClass::AbortSignal => 5,
            OutcomeClass::RuntimeErrorPattern => 4,
            OutcomeClass::Hang => 3,
            OutcomeClass::GracefulRejection => 2,
            OutcomeClass::InconsistentOutput => 1,
            OutcomeClass::Success => 0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            OutcomeClass::Success => "success",
            OutcomeClass::GracefulRejection => "graceful_rejection",
            OutcomeClass::AbortSignal => "abort_signal",
            OutcomeClass::Segfault => "segfault",
            OutcomeClass::RuntimeErrorPattern => "runtime_error_pattern",
            OutcomeClass::InconsistentOutput => "inconsistent_output",
            OutcomeClass::Hang => "hang",
        }
    }
}

impl std::fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

const MEMORY_FAULT_SIGNALS: [&str; 2] = ["SIGSEGV", "SIGBUS"];

fn signal_name(signal: i32) -> String {
    match signal {
        1 => "SIGHUP".into(),
        2 => "SIGINT".into(),
        4 => "SIGILL".into(),
        5 => "SIGTRAP".into(),
        6 => "SIGABRT".into(),
        7 => "SIGBUS".into(),
        8 => "SIGFPE".into(),
        9 => "SIGKILL".into(),
        11 => "SIGSEGV".into(),
        13 => "SIGPIPE".into(),
        15 => "SIGTERM".into(),
        n => format!("SIG{n}"),
    }
}

/// Total classification of an execution outcome.
///
/// Precedence: timeout, then signals (memory-fault family as segfault, any
/// other signal as abort), then configured runtime-error patterns on stderr,
/// then exit code.
pub fn classify(outcome: &ExecutionOutcome, patterns: &[String]) -> OutcomeClass {
    match &outcome.status {
        ExitStatus::TimedOut => OutcomeClass::Hang,
        ExitStatus::Signaled { signal } => {
            if MEMORY_FAULT_SIGNALS.contains(&signal.as_str()) {
                OutcomeClass::Segfault
            } else {
                OutcomeClass::AbortSignal
            }
        }
        ExitStatus::NonzeroExit { .. } | ExitStatus::CleanExit => {
            if patterns.iter().any(|p| !p.is_empty() && outcome.stderr.contains(p)) {
                OutcomeClass::RuntimeErrorPattern
            } else if matches!(outcome.status, ExitStatus::NonzeroExit { .. }) {
                OutcomeClass::GracefulRejection
            } else {
                OutcomeClass::Success
            }
        }
    }
}

fn spawn_reader(
    stream: impl Read + Send + 'static,
    cap: usize,
) -> std::thread::JoinHandle<Vec<u8>> {
    std::thread::spawn(move || {
        let mut stream = stream;
        let mut buf = Vec::new();
        let mut chunk = [0u8; 8192];
        loop {
            match stream.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    buf.extend_from_slice(&chunk[..n]);
                    if buf.len() > cap {
                        let excess = buf.len() - cap;
                        buf.drain(..excess);
                    }
                }
            }
        }
        buf
    })
}

#[cfg(unix)]
fn kill_process_group(child: &Child) {
    // The child was placed in its own process group at spawn; take the whole
    // group down so grandchildren cannot outlive the timeout.
    unsafe {
        libc::killpg(child.id() as i32, libc::SIGKILL);
    }
}

/// Executes one program file in a fresh child process.
///
/// The child runs in its own process group with a clean temporary working
/// directory; both streams are captured up to the cap (tail kept) and the
/// wall-clock timeout is enforced by killing the group.
pub fn execute(
    program_path: &Path,
    interpreter_cmd: &[String],
    env: &BTreeMap<String, String>,
    timeout_s: f64,
    capture_cap: usize,
) -> Result<ExecutionOutcome> {
    if interpreter_cmd.is_empty() {
        return Err(Error::Config("interpreter_cmd is empty".into()));
    }
    if !program_path.exists() {
        return Err(Error::io(
            program_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "program file not found"),
        ));
    }
    let program_abs = program_path
        .canonicalize()
        .map_err(|e| Error::io(program_path, e))?;
    let workdir = tempfile::tempdir().map_err(|e| Error::io("<tempdir>", e))?;

    let mut command = Command::new(&interpreter_cmd[0]);
    command
        .args(&interpreter_cmd[1..])
        .arg(&program_abs)
        .current_dir(workdir.path())
        .envs(env)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        command.process_group(0);
    }

    let start = Instant::now();
    let mut child = command.spawn().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Environment(format!("interpreter `{}` not found", interpreter_cmd[0]))
        } else {
            Error::io(&interpreter_cmd[0], e)
        }
    })?;

    let stdout_reader = spawn_reader(child.stdout.take().expect("piped stdout"), capture_cap);
    let stderr_reader = spawn_reader(child.stderr.take().expect("piped stderr"), capture_cap);

    let timeout = Duration::from_secs_f64(timeout_s);
    let mut timed_out = false;
    let status = loop {
        match child.try_wait().map_err(|e| Error::io(&program_abs, e))? {
            Some(status) => break status,
            None => {
                if start.elapsed() >= timeout {
                    timed_out = true;
                    #[cfg(unix)]
                    kill_process_group(&child);
                    let _ = child.kill();
                    break child.wait().map_err(|e| Error::io(&program_abs, e))?;
                }
                std::thread::sleep(Duration::from_millis(5));
            }
        }
    };
    let wall_time_s = start.elapsed().as_secs_f64();

    let stdout = stdout_reader.join().unwrap_or_default();
    let stderr = stderr_reader.join().unwrap_or_default();

    let exit_status = if timed_out {
        ExitStatus::TimedOut
    } else if let Some(code) = status.code() {
        if code == 0 {
            ExitStatus::CleanExit
        } else {
            ExitStatus::NonzeroExit { code }
        }
    } else {
        #[cfg(unix)]
        {
            use std::os::unix::process::ExitStatusExt;
            ExitStatus::Signaled {
                signal: status.signal().map(signal_name).unwrap_or_else(|| "SIG?".into()),
            }
        }
        #[cfg(not(unix))]
        {
            ExitStatus::NonzeroExit { code: -1 }
        }
    };

    Ok(ExecutionOutcome {
        status: exit_status,
        stdout: String::from_utf8_lossy(&stdout).into_owned(),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
        wall_time_s,
    })
}

/// Last `RESULT: [...]` line parsed as a float vector, if any.
pub fn parse_result_payload(stdout: &str) -> Option<Vec<f64>> {
    let line = stdout
        .lines()
        .rev()
        .find(|l| l.trim_start().starts_with(RESULT_PREFIX))?;
    let rest = line.trim_start().strip_prefix(RESULT_PREFIX)?.trim();
    let inner = rest.strip_prefix('[')?.strip_suffix(']')?.trim();
    if inner.is_empty() {
        return Some(Vec::new());
    }
    inner
        .split(',')
        .map(|tok| tok.trim().parse::<f64>().ok())
        .collect()
}

/// Relative closeness with a floor of 1.0 so values near zero compare
/// absolutely. Two NaNs count as agreeing: both devices failed the same
/// way, which is not an inconsistency.
fn close(a: f64, b: f64, tolerance: f64) -> bool {
    if a.is_nan() && b.is_nan() {
        return true;
    }
    (a - b).abs() <= tolerance * a.abs().max(b.abs()).max(1.0)
}

/// Execution front-end bound to one target configuration.
pub struct Harness {
    pub target: TargetConfig,
}

/// Result of a device-consistency comparison, with both raw runs retained
/// for reporting.
#[derive(Debug)]
pub struct DeviceComparison {
    pub class: OutcomeClass,
    pub runs: Vec<(String, ExecutionOutcome)>,
    pub warning: Option<Warning>,
}

impl Harness {
    pub fn new(target: TargetConfig) -> Self {
        Harness { target }
    }

    pub fn execute_file(&self, program: &Path, timeout_s: f64) -> Result<ExecutionOutcome> {
        execute(
            program,
            &self.target.interpreter_cmd,
            &self.target.env,
            timeout_s,
            self.target.capture_cap_bytes,
        )
    }

    /// Writes source to a scratch file and executes it. The device
    /// placeholder, if present, is resolved to the first configured device
    /// (or "cpu") so single runs of templates still work.
    pub fn execute_source(&self, source: &str, timeout_s: f64) -> Result<ExecutionOutcome> {
        let resolved = if source.contains(DEVICE_PLACEHOLDER) {
            let device = self
                .target
                .device_tokens
                .as_ref()
                .map(|(a, _)| a.as_str())
                .unwrap_or("cpu");
            source.replace(DEVICE_PLACEHOLDER, device)
        } else {
            source.to_string()
        };
        let dir = tempfile::tempdir().map_err(|e| Error::io("<tempdir>", e))?;
        let path = dir
            .path()
            .join(format!("program{}", self.target.program_extension));
        fs::write(&path, resolved).map_err(|e| Error::io(&path, e))?;
        self.execute_file(&path, timeout_s)
    }

    pub fn classify(&self, outcome: &ExecutionOutcome) -> OutcomeClass {
        classify(outcome, &self.target.runtime_error_patterns)
    }

    /// Runs a device-parameterized program once per device token and
    /// compares the printed numeric payloads.
    ///
    /// Any non-success run dominates (the more severe class wins); two
    /// successful runs with comparable payloads yield `InconsistentOutput`
    /// on mismatch. Missing or unparseable payloads skip the comparison
    /// with a warning rather than fabricating a bug.
    pub fn compare_devices(
        &self,
        template_source: &str,
        devices: &(String, String),
        tolerance: f64,
        timeout_s: f64,
    ) -> Result<DeviceComparison> {
        let mut runs = Vec::new();
        for device in [&devices.0, &devices.1] {
            let source = template_source.replace(DEVICE_PLACEHOLDER, device);
            let dir = tempfile::tempdir().map_err(|e| Error::io("<tempdir>", e))?;
            let path = dir
                .path()
                .join(format!("program{}", self.target.program_extension));
            fs::write(&path, &source).map_err(|e| Error::io(&path, e))?;
            let outcome = self.execute_file(&path, timeout_s)?;
            runs.push((device.clone(), outcome));
        }

        let classes: Vec<OutcomeClass> = runs.iter().map(|(_, o)| self.classify(o)).collect();
        if classes.iter().any(|c| *c != OutcomeClass::Success) {
            let worst = classes
                .into_iter()
                .max_by_key(|c| c.severity())
                .expect("two runs");
            return Ok(DeviceComparison {
                class: worst,
                runs,
                warning: None,
            });
        }

        let payloads: Vec<Option<Vec<f64>>> = runs
            .iter()
            .map(|(_, o)| parse_result_payload(&o.stdout))
            .collect();
        let (Some(left), Some(right)) = (&payloads[0], &payloads[1]) else {
            return Ok(DeviceComparison {
                class: OutcomeClass::Success,
                warning: Some(Warning::new(
                    "fuzz",
                    devices.0.clone() + "/" + &devices.1,
                    "device outputs not comparable (no parseable RESULT payload); comparison skipped",
                )),
                runs,
            });
        };

        let consistent = left.len() == right.len()
            && left
                .iter()
                .zip(right.iter())
                .all(|(a, b)| close(*a, *b, tolerance));
        Ok(DeviceComparison {
            class: if consistent {
                OutcomeClass::Success
            } else {
                OutcomeClass::InconsistentOutput
            },
            runs,
            warning: None,
        })
    }
}

/// A deduplicated record binding an API, an edge case, a program, and a
/// classified execution outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugReport {
    pub api: String,
    pub class: OutcomeClass,
    pub fingerprint: String,
    pub edge_case_id: Option<String>,
    pub program_path: PathBuf,
    pub outcome: ExecutionOutcome,
}

impl BugReport {
    /// Builds a report for a bug-class outcome; non-bug classes yield None.
    pub fn new(
        api: &str,
        class: OutcomeClass,
        edge_case_id: Option<String>,
        program_path: PathBuf,
        outcome: ExecutionOutcome,
        patterns: &[String],
    ) -> Option<BugReport> {
        if !class.is_bug() {
            return None;
        }
        let token = top_diagnostic_token(&outcome, class, patterns);
        Some(BugReport {
            api: api.to_string(),
            class,
            fingerprint: fingerprint(api, class, &token),
            edge_case_id,
            program_path,
            outcome,
        })
    }
}

pub fn fingerprint(api: &str, class: OutcomeClass, token: &str) -> String {
    format!("{api}|{class}|{token}")
}

/// The most identifying token in a run's diagnostics: the signal name, the
/// matched runtime-error pattern, or the final exception line's class.
pub fn top_diagnostic_token(
    outcome: &ExecutionOutcome,
    class: OutcomeClass,
    patterns: &[String],
) -> String {
    match &outcome.status {
        ExitStatus::Signaled { signal } => return signal.clone(),
        ExitStatus::TimedOut => return "timeout".into(),
        _ => {}
    }
    if class == OutcomeClass::RuntimeErrorPattern {
        if let Some(p) = patterns.iter().find(|p| outcome.stderr.contains(p.as_str())) {
            return p.clone();
        }
    }
    if class == OutcomeClass::InconsistentOutput {
        return "inconsistent".into();
    }
    for line in outcome.stderr.lines().rev() {
        let line = line.trim();
        if let Some((head, _)) = line.split_once(':') {
            if !head.is_empty()
                && head.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
            {
                return head.to_string();
            }
        }
    }
    match &outcome.status {
        ExitStatus::NonzeroExit { code } => format!("exit:{code}"),
        _ => "unknown".into(),
    }
}

/// One report per fingerprint (first occurrence kept) plus the duplicate
/// tally per fingerprint.
pub fn dedupe(reports: Vec<BugReport>) -> (Vec<BugReport>, BTreeMap<String, usize>) {
    let mut tally: BTreeMap<String, usize> = BTreeMap::new();
    let mut kept = Vec::new();
    for report in reports {
        let count = tally.entry(report.fingerprint.clone()).or_insert(0);
        *count += 1;
        if *count == 1 {
            kept.push(report);
        }
    }
    (kept, tally)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target() -> TargetConfig {
        TargetConfig::default()
    }

    fn run_source(source: &str, timeout_s: f64) -> ExecutionOutcome {
        Harness::new(target()).execute_source(source, timeout_s).unwrap()
    }

    fn outcome(status: ExitStatus, stderr: &str) -> ExecutionOutcome {
        ExecutionOutcome {
            status,
            stdout: String::new(),
            stderr: stderr.into(),
            wall_time_s: 0.01,
        }
    }

    #[test]
    fn clean_exit_with_output_is_success() {
        let out = run_source("print('ok')", 10.0);
        assert_eq!(out.status, ExitStatus::CleanExit);
        assert!(out.stdout.contains("ok"));
        assert_eq!(classify(&out, &[]), OutcomeClass::Success);
    }

    #[test]
    fn uncaught_exception_is_graceful_rejection() {
        let out = run_source("raise ValueError('nope')", 10.0);
        assert!(matches!(out.status, ExitStatus::NonzeroExit { .. }));
        assert!(out.stderr.contains("ValueError"));
        assert_eq!(classify(&out, &[]), OutcomeClass::GracefulRejection);
    }

    #[test]
    fn abort_is_signaled_and_classified_abort() {
        let out = run_source("import os\nos.abort()", 10.0);
        assert_eq!(
            out.status,
            ExitStatus::Signaled { signal: "SIGABRT".into() }
        );
        assert_eq!(classify(&out, &[]), OutcomeClass::AbortSignal);
    }

    #[test]
    fn null_read_is_segfault() {
        let out = run_source("import ctypes\nctypes.string_at(0)", 10.0);
        assert_eq!(
            out.status,
            ExitStatus::Signaled { signal: "SIGSEGV".into() }
        );
        assert_eq!(classify(&out, &[]), OutcomeClass::Segfault);
    }

    #[test]
    fn infinite_loop_times_out_and_hangs() {
        let out = run_source("while True:\n    pass", 1.0);
        assert_eq!(out.status, ExitStatus::TimedOut);
        assert!(out.wall_time_s >= 1.0);
        assert_eq!(classify(&out, &[]), OutcomeClass::Hang);
    }

    #[test]
    fn internal_assert_pattern_beats_exit_code() {
        let out = run_source(
            "import sys\nsys.stderr.write('INTERNAL ASSERT FAILED: op\\n')\nsys.exit(3)",
            10.0,
        );
        let patterns = target().runtime_error_patterns;
        assert_eq!(classify(&out, &patterns), OutcomeClass::RuntimeErrorPattern);
    }

    #[test]
    fn capture_cap_keeps_tail() {
        let out = run_source("print('x' * 300000)\nprint('THE-END')", 15.0);
        assert!(out.stdout.len() <= target().capture_cap_bytes);
        assert!(out.stdout.contains("THE-END"));
    }

    #[test]
    fn missing_interpreter_is_environment_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.py");
        fs::write(&path, "print(1)").unwrap();
        let err = execute(
            &path,
            &["definitely-not-an-interpreter-7q".to_string()],
            &BTreeMap::new(),
            5.0,
            1024,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Environment(_)));
    }

    #[test]
    fn classification_precedence_follows_dominance() {
        let patterns = vec!["INTERNAL ASSERT FAILED".to_string()];
        // Signal beats pattern.
        let sig = outcome(
            ExitStatus::Signaled { signal: "SIGABRT".into() },
            "INTERNAL ASSERT FAILED",
        );
        assert_eq!(classify(&sig, &patterns), OutcomeClass::AbortSignal);
        // Pattern beats plain nonzero exit.
        let pat = outcome(ExitStatus::NonzeroExit { code: 1 }, "INTERNAL ASSERT FAILED");
        assert_eq!(classify(&pat, &patterns), OutcomeClass::RuntimeErrorPattern);
        // Pattern fires on clean exits too.
        let clean_pat = outcome(ExitStatus::CleanExit, "x INTERNAL ASSERT FAILED y");
        assert_eq!(classify(&clean_pat, &patterns), OutcomeClass::RuntimeErrorPattern);
        // Timeout stays a hang whatever was printed.
        let hang = outcome(ExitStatus::TimedOut, "INTERNAL ASSERT FAILED");
        assert_eq!(classify(&hang, &patterns), OutcomeClass::Hang);
    }

    #[test]
    fn result_payload_parsing() {
        assert_eq!(
            parse_result_payload("noise\nRESULT: [1.0, -2.5, 3]\n"),
            Some(vec![1.0, -2.5, 3.0])
        );
        assert_eq!(parse_result_payload("RESULT: []"), Some(vec![]));
        assert_eq!(parse_result_payload("RESULT: [a, b]"), None);
        assert_eq!(parse_result_payload("no payload here"), None);
        // Last RESULT line wins.
        assert_eq!(
            parse_result_payload("RESULT: [1.0]\nRESULT: [2.0]"),
            Some(vec![2.0])
        );
    }

    #[test]
    fn compare_devices_detects_inconsistency() {
        let template = r#"
d = "{{DEVICE}}"
if d == "cpu":
    print("RESULT: [1.0, 2.0]")
else:
    print("RESULT: [-1.0, -2.0]")
"#;
        let harness = Harness::new(target());
        let cmp = harness
            .compare_devices(template, &("cpu".into(), "gpu".into()), 1e-3, 10.0)
            .unwrap();
        assert_eq!(cmp.class, OutcomeClass::InconsistentOutput);
    }

    #[test]
    fn compare_devices_identical_outputs_are_success() {
        let template = "d = \"{{DEVICE}}\"\nprint(\"RESULT: [1.0, 2.0]\")";
        let harness = Harness::new(target());
        let cmp = harness
            .compare_devices(template, &("cpu".into(), "gpu".into()), 1e-3, 10.0)
            .unwrap();
        assert_eq!(cmp.class, OutcomeClass::Success);
        assert!(cmp.warning.is_none());
    }

    #[test]
    fn compare_devices_crash_dominates() {
        let template = r#"
d = "{{DEVICE}}"
if d == "gpu":
    import os
    os.abort()
print("RESULT: [1.0]")
"#;
        let harness = Harness::new(target());
        let cmp = harness
            .compare_devices(template, &("cpu".into(), "gpu".into()), 1e-3, 10.0)
            .unwrap();
        assert_eq!(cmp.class, OutcomeClass::AbortSignal);
    }

    #[test]
    fn compare_devices_unparseable_payloads_skip_with_warning() {
        let template = "d = \"{{DEVICE}}\"\nprint('no payload')";
        let harness = Harness::new(target());
        let cmp = harness
            .compare_devices(template, &("cpu".into(), "gpu".into()), 1e-3, 10.0)
            .unwrap();
        assert_eq!(cmp.class, OutcomeClass::Success);
        assert!(cmp.warning.is_some());
    }

    #[test]
    fn dedupe_keeps_first_per_fingerprint() {
        let patterns: Vec<String> = vec![];
        let make = |api: &str, sig: &str| {
            BugReport::new(
                api,
                OutcomeClass::AbortSignal,
                None,
                PathBuf::from("p.py"),
                outcome(ExitStatus::Signaled { signal: sig.into() }, ""),
                &patterns,
            )
            .unwrap()
        };
        let reports = vec![make("m.a", "SIGABRT"), make("m.a", "SIGABRT"), make("m.b", "SIGABRT")];
        let (kept, tally) = dedupe(reports);
        assert_eq!(kept.len(), 2);
        assert_eq!(tally[&fingerprint("m.a", OutcomeClass::AbortSignal, "SIGABRT")], 2);
    }

    #[test]
    fn same_api_different_class_stays_distinct() {
        let patterns: Vec<String> = vec![];
        let abort = BugReport::new(
            "m.a",
            OutcomeClass::AbortSignal,
            None,
            PathBuf::from("p.py"),
            outcome(ExitStatus::Signaled { signal: "SIGABRT".into() }, ""),
            &patterns,
        )
        .unwrap();
        let segv = BugReport::new(
            "m.a",
            OutcomeClass::Segfault,
            None,
            PathBuf::from("p.py"),
            outcome(ExitStatus::Signaled { signal: "SIGSEGV".into() }, ""),
            &patterns,
        )
        .unwrap();
        let (kept, _) = dedupe(vec![abort, segv]);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn non_bug_classes_never_become_reports() {
        let patterns: Vec<String> = vec![];
        assert!(BugReport::new(
            "m.a",
            OutcomeClass::GracefulRejection,
            None,
            PathBuf::from("p.py"),
            outcome(ExitStatus::NonzeroExit { code: 1 }, "ValueError: x"),
            &patterns,
        )
        .is_none());
    }
}
