//! Stage orchestration. Stages communicate only through file artifacts in
//! the output directory, so each stage can run in isolation and re-running
//! a later stage never needs an earlier stage's in-memory state.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analyzer;
use crate::catalog::{self, ApiSignature};
use crate::config::Config;
use crate::corpus::{self, EdgeCaseCorpus};
use crate::error::{Error, Result};
use crate::harness::{top_diagnostic_token, Harness};
use crate::llm::Gateway;
use crate::miner;
use crate::mutator::{self, BugRecord, FoundBug, Rejection, SelectionPolicy};
use crate::report::{DebugSuccess, RunReport};
use crate::synth::{self, ProgramStatus, SynthesisEntry};
use crate::types::{Stage, TypeVocabulary, Warning};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StageName {
    Mine,
    Analyze,
    Standardize,
    Gen,
    Fuzz,
}

impl StageName {
    pub const ALL: [StageName; 5] = [
        StageName::Mine,
        StageName::Analyze,
        StageName::Standardize,
        StageName::Gen,
        StageName::Fuzz,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StageName::Mine => "mine",
            StageName::Analyze => "analyze",
            StageName::Standardize => "standardize",
            StageName::Gen => "gen",
            StageName::Fuzz => "fuzz",
        }
    }
}

impl std::str::FromStr for StageName {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "mine" => Ok(StageName::Mine),
            "analyze" => Ok(StageName::Analyze),
            "standardize" => Ok(StageName::Standardize),
            "gen" => Ok(StageName::Gen),
            "fuzz" => Ok(StageName::Fuzz),
            other => Err(format!("unknown stage `{other}`")),
        }
    }
}

/// Canonical artifact layout inside the output directory.
pub struct Artifacts {
    pub out_dir: PathBuf,
}

impl Artifacts {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Artifacts {
            out_dir: out_dir.into(),
        }
    }

    pub fn blocks(&self) -> PathBuf {
        self.out_dir.join("blocks.jsonl")
    }
    pub fn cases(&self) -> PathBuf {
        self.out_dir.join("cases.jsonl")
    }
    pub fn corpus(&self) -> PathBuf {
        self.out_dir.join("corpus.jsonl")
    }
    pub fn programs_dir(&self) -> PathBuf {
        self.out_dir.join("programs")
    }
    pub fn synthesis_report(&self) -> PathBuf {
        self.out_dir.join("synthesis_report.json")
    }
    pub fn reports_dir(&self) -> PathBuf {
        self.out_dir.join("reports")
    }
    pub fn mutants_dir(&self) -> PathBuf {
        self.reports_dir().join("mutants")
    }
    pub fn bugs(&self) -> PathBuf {
        self.reports_dir().join("bugs.jsonl")
    }
    pub fn rejections(&self) -> PathBuf {
        self.reports_dir().join("rejections.jsonl")
    }
    pub fn run_report(&self) -> PathBuf {
        self.out_dir.join("run_report.json")
    }

    pub fn program_file(&self, api_name: &str, extension: &str) -> PathBuf {
        self.programs_dir()
            .join(format!("{}{extension}", mutator::sanitize_file_stem(api_name)))
    }
}

fn require_input(path: &Path, produced_by: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "missing stage input {}; run the `{produced_by}` stage first",
            path.display()
        )))
    }
}

fn log_warnings(warnings: &[Warning]) {
    for w in warnings {
        log::warn!("[{}] {}: {}", w.stage, w.context, w.message);
    }
}

/// mine: source tree -> blocks.jsonl.
pub fn stage_mine(config: &Config, artifacts: &Artifacts) -> Result<usize> {
    let src = config
        .miner
        .src
        .as_ref()
        .ok_or_else(|| Error::Config("no source tree configured; set miner.src or pass --src".into()))?;
    let macros = config.miner.macros.iter().cloned().collect();
    let extensions = config.miner.extensions.iter().cloned().collect();
    let outcome = miner::mine_tree(src, &macros, &extensions)?;
    log_warnings(&outcome.warnings);
    miner::write_blocks_jsonl(&artifacts.blocks(), &outcome.blocks)?;
    Ok(outcome.blocks.len())
}

/// analyze: blocks.jsonl -> cases.jsonl (one analysis call per block).
pub fn stage_analyze(
    artifacts: &Artifacts,
    gateway: &Gateway,
    vocab: &TypeVocabulary,
) -> Result<usize> {
    require_input(&artifacts.blocks(), "mine")?;
    let blocks = miner::read_blocks_jsonl(&artifacts.blocks())?;
    let mut cases = Vec::new();
    for block in &blocks {
        if block.checks.is_empty() {
            continue;
        }
        let (mut block_cases, warnings) = analyzer::analyze_block(block, gateway, vocab, 1)?;
        log_warnings(&warnings);
        cases.append(&mut block_cases);
    }
    analyzer::write_cases_jsonl(&artifacts.cases(), &cases)?;
    Ok(cases.len())
}

/// standardize: cases.jsonl -> corpus.jsonl.
pub fn stage_standardize(artifacts: &Artifacts) -> Result<EdgeCaseCorpus> {
    require_input(&artifacts.cases(), "analyze")?;
    let cases = analyzer::read_cases_jsonl(&artifacts.cases())?;
    let mut standardized = Vec::new();
    for case in &cases {
        match corpus::standardize(case) {
            Ok(cfc) => standardized.push(cfc),
            Err(e) => log::warn!("[standardize] {}:{}: {e}", case.source.file, case.source.line),
        }
    }
    let built = EdgeCaseCorpus::build(standardized);
    built.write_jsonl(&artifacts.corpus())?;
    Ok(built)
}

/// gen: catalog -> programs/ + synthesis_report.json.
pub fn stage_gen(
    config: &Config,
    artifacts: &Artifacts,
    gateway: &Gateway,
    catalog: &[ApiSignature],
) -> Result<Vec<SynthesisEntry>> {
    let harness = Harness::new(config.target.clone());
    fs::create_dir_all(artifacts.programs_dir())
        .map_err(|e| Error::io(artifacts.programs_dir(), e))?;

    let mut entries = Vec::with_capacity(catalog.len());
    for api in catalog {
        let program = synth::generate_initial(api, gateway, &harness, &config.synthesis)?;
        if program.status == ProgramStatus::Valid {
            let path = artifacts.program_file(&api.name, &config.target.program_extension);
            fs::write(&path, &program.source_text).map_err(|e| Error::io(&path, e))?;
        } else if let Some(cause) = &program.failure_cause {
            log::warn!("[gen] {}: synthesis failed: {cause}", api.name);
        }
        entries.push(SynthesisEntry {
            api: api.name.clone(),
            status: program.status,
            init_rounds: program.attempts.0,
            debug_rounds: program.attempts.1,
            llm_calls: gateway.ledger().api_calls(&api.name),
        });
    }
    let json = serde_json::to_vec_pretty(&entries)?;
    fs::write(artifacts.synthesis_report(), json)
        .map_err(|e| Error::io(artifacts.synthesis_report(), e))?;
    Ok(entries)
}

#[derive(Debug, Default)]
pub struct FuzzStats {
    pub bug_records: Vec<BugRecord>,
    pub rejections: Vec<Rejection>,
    pub duplicate_tally: BTreeMap<String, usize>,
    pub tasks_run: usize,
}

/// fuzz: catalog + corpus.jsonl + programs/ -> reports/.
pub fn stage_fuzz(
    config: &Config,
    artifacts: &Artifacts,
    gateway: &Gateway,
    catalog: &[ApiSignature],
) -> Result<FuzzStats> {
    require_input(&artifacts.corpus(), "standardize")?;
    require_input(&artifacts.programs_dir(), "gen")?;
    let corpus = EdgeCaseCorpus::read_jsonl(&artifacts.corpus())?;
    let harness = Harness::new(config.target.clone());
    let policy = SelectionPolicy::from_config(&config.policy, config.seed);
    fs::create_dir_all(artifacts.mutants_dir())
        .map_err(|e| Error::io(artifacts.mutants_dir(), e))?;

    let mut all_bugs: Vec<FoundBug> = Vec::new();
    let mut stats = FuzzStats::default();
    for api in catalog {
        let program_path = artifacts.program_file(&api.name, &config.target.program_extension);
        if !program_path.exists() {
            // No valid base program; nothing to mutate.
            continue;
        }
        let base_source =
            fs::read_to_string(&program_path).map_err(|e| Error::io(&program_path, e))?;
        let outcome = mutator::fuzz_api(
            api,
            &base_source,
            &corpus,
            gateway,
            &harness,
            &policy,
            &artifacts.mutants_dir(),
        )?;
        log_warnings(&outcome.warnings);
        stats.tasks_run += outcome.tasks_run;
        all_bugs.extend(outcome.bugs);
        stats.rejections.extend(outcome.rejections);
    }

    // One report per fingerprint, first occurrence kept.
    let mut deduped: Vec<FoundBug> = Vec::new();
    for bug in all_bugs {
        let count = stats
            .duplicate_tally
            .entry(bug.report.fingerprint.clone())
            .or_insert(0);
        *count += 1;
        if *count == 1 {
            deduped.push(bug);
        }
    }

    stats.bug_records = deduped
        .iter()
        .map(|bug| BugRecord {
            api: bug.report.api.clone(),
            edge_case_id: bug.report.edge_case_id.clone(),
            instantiation: Some(bug.instantiation.text.clone()),
            positions: bug.instantiation.positions.clone(),
            outcome_class: bug.report.class,
            signal_or_pattern: top_diagnostic_token(
                &bug.report.outcome,
                bug.report.class,
                &config.target.runtime_error_patterns,
            ),
            program_path: relative_to(&bug.report.program_path, &artifacts.out_dir),
        })
        .collect();

    write_jsonl(&artifacts.bugs(), &stats.bug_records)?;
    let rejections_normalized: Vec<Rejection> = stats
        .rejections
        .iter()
        .map(|r| Rejection {
            api: r.api.clone(),
            edge_case_id: r.edge_case_id.clone(),
            class: r.class,
            program_path: PathBuf::from(relative_to(&r.program_path, &artifacts.out_dir)),
        })
        .collect();
    write_jsonl(&artifacts.rejections(), &rejections_normalized)?;
    Ok(stats)
}

fn relative_to(path: &Path, base: &Path) -> String {
    path.strip_prefix(base)
        .unwrap_or(path)
        .display()
        .to_string()
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for item in items {
        serde_json::to_writer(&mut file, item)?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn load_synthesis_entries(artifacts: &Artifacts) -> Result<Vec<SynthesisEntry>> {
    let path = artifacts.synthesis_report();
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Executes the requested stages in pipeline order and assembles the run
/// report. The report's call counts are exactly the gateway ledger of this
/// run.
pub fn run_pipeline(config: &Config, stages: &[StageName]) -> Result<RunReport> {
    let start = Instant::now();
    config.validate()?;
    let artifacts = Artifacts::new(&config.out_dir);
    fs::create_dir_all(&artifacts.out_dir).map_err(|e| Error::io(&artifacts.out_dir, e))?;

    let vocab = TypeVocabulary::with_extra(&config.llm.extra_types);
    let needs_llm = stages
        .iter()
        .any(|s| matches!(s, StageName::Analyze | StageName::Gen | StageName::Fuzz));
    let gateway = if needs_llm {
        Some(Gateway::from_config(&config.llm)?)
    } else {
        None
    };
    let needs_catalog = stages
        .iter()
        .any(|s| matches!(s, StageName::Gen | StageName::Fuzz));
    let catalog = if needs_catalog {
        let path = config.catalog.as_ref().ok_or_else(|| {
            Error::Config("no API catalog configured; set catalog or pass --apis".into())
        })?;
        catalog::load_catalog(path, &vocab)?
    } else {
        Vec::new()
    };

    let mut synthesis_entries: Option<Vec<SynthesisEntry>> = None;
    let mut fuzz_stats: Option<FuzzStats> = None;

    for stage in StageName::ALL {
        if !stages.contains(&stage) {
            continue;
        }
        match stage {
            StageName::Mine => {
                let blocks = stage_mine(config, &artifacts)?;
                log::info!("mine: {blocks} check blocks");
            }
            StageName::Analyze => {
                let gateway = gateway.as_ref().expect("gateway built for analyze");
                let cases = stage_analyze(&artifacts, gateway, &vocab)?;
                log::info!("analyze: {cases} context-based edge cases");
            }
            StageName::Standardize => {
                let corpus = stage_standardize(&artifacts)?;
                log::info!(
                    "standardize: {} cases in {} clusters",
                    corpus.case_count(),
                    corpus.cluster_count()
                );
            }
            StageName::Gen => {
                let gateway = gateway.as_ref().expect("gateway built for gen");
                let entries = stage_gen(config, &artifacts, gateway, &catalog)?;
                log::info!(
                    "gen: {}/{} APIs covered",
                    entries.iter().filter(|e| e.status == ProgramStatus::Valid).count(),
                    entries.len()
                );
                synthesis_entries = Some(entries);
            }
            StageName::Fuzz => {
                let gateway = gateway.as_ref().expect("gateway built for fuzz");
                let stats = stage_fuzz(config, &artifacts, gateway, &catalog)?;
                log::info!(
                    "fuzz: {} tasks, {} deduped bugs",
                    stats.tasks_run,
                    stats.bug_records.len()
                );
                fuzz_stats = Some(stats);
            }
        }
    }

    let entries = match synthesis_entries {
        Some(e) => e,
        None => load_synthesis_entries(&artifacts)?,
    };
    let api_covered = entries
        .iter()
        .filter(|e| e.status == ProgramStatus::Valid)
        .count();

    let mut bugs_by_class: BTreeMap<String, usize> = BTreeMap::new();
    if let Some(stats) = &fuzz_stats {
        for record in &stats.bug_records {
            *bugs_by_class
                .entry(record.outcome_class.as_str().to_string())
                .or_insert(0) += 1;
        }
    }

    let llm_calls_by_stage = gateway
        .as_ref()
        .map(|g| {
            let ledger = g.ledger();
            Stage::ALL
                .iter()
                .filter_map(|s| {
                    let n = ledger.stage_total(*s);
                    (n > 0).then(|| (s.as_str().to_string(), n))
                })
                .collect()
        })
        .unwrap_or_default();

    let report = RunReport {
        api_total: if needs_catalog { catalog.len() } else { 0 },
        api_covered,
        llm_calls_by_stage,
        debug_success: DebugSuccess::from_entries(&entries),
        bugs_by_class,
        wall_time_s: start.elapsed().as_secs_f64(),
        seed: config.seed,
    };
    let json = serde_json::to_vec_pretty(&report)?;
    fs::write(artifacts.run_report(), json).map_err(|e| Error::io(artifacts.run_report(), e))?;
    Ok(report)
}

/// Exit-code mapping: configuration and usage problems are 1, environment
/// problems are 2.
pub fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::Config(_)
        | Error::Catalog(_)
        | Error::UnknownType(_)
        | Error::PatternKey(_)
        | Error::Record { .. } => 1,
        _ => 2,
    }
}

#[derive(Debug, Deserialize)]
struct BugRecordView {
    pub api: String,
    pub outcome_class: String,
}

/// Convenience for tests and the report subcommand: reads bugs.jsonl back
/// as (api, class) pairs.
pub fn read_bug_classes(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let view: BugRecordView = serde_json::from_str(line)?;
        out.push((view.api, view.outcome_class));
    }
    Ok(out)
}
