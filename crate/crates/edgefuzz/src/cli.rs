//! Subcommand CLI tying the pipeline together. Every subcommand is a thin
//! wrapper over one stage; `run` composes them. Flags override config
//! values; the config file provides everything else.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Config, LlmConfig};
use crate::error::{Error, Result};
use crate::pipeline::{self, Artifacts, StageName};
use crate::report::{emit_report, ReportFormat, RunReport};

#[derive(Parser)]
#[command(
    name = "edgefuzz",
    about = "Mine input checks from native sources, lift them into reusable edge cases, and fuzz APIs with them",
    version
)]
pub struct Cli {
    /// JSON config file with miner/llm/target/policy sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed for all randomness in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Verbose logging.
    #[arg(long, short, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Scan a native source tree for check macros and emit check blocks.
    Mine(MineArgs),
    /// Turn check blocks into context-based edge cases via the LLM backend.
    Analyze(AnalyzeArgs),
    /// Standardize edge cases into the context-free corpus.
    Standardize(StandardizeArgs),
    /// Synthesize one valid test program per catalog API.
    Gen(GenArgs),
    /// Mutate base programs with matched edge cases and triage the results.
    Fuzz(FuzzArgs),
    /// Render a run report.
    Report(ReportArgs),
    /// Run a stage subset end to end (default: all stages).
    Run(RunArgs),
}

#[derive(Args)]
pub struct MineArgs {
    /// Source tree root.
    #[arg(long)]
    pub src: Option<PathBuf>,
    /// Comma-separated macro names, e.g. TORCH_CHECK,AT_CHECK.
    #[arg(long, value_delimiter = ',')]
    pub macros: Vec<String>,
    /// Comma-separated file extensions, e.g. .cc,.cpp,.h.
    #[arg(long, value_delimiter = ',')]
    pub ext: Vec<String>,
    /// Output file (default: <out_dir>/blocks.jsonl).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Check blocks produced by `mine`.
    #[arg(long)]
    pub blocks: Option<PathBuf>,
    /// JSON file holding just the llm config block.
    #[arg(long)]
    pub llm_config: Option<PathBuf>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct StandardizeArgs {
    /// Context-based cases produced by `analyze`.
    #[arg(long)]
    pub cases: Option<PathBuf>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GenArgs {
    /// API catalog JSON.
    #[arg(long)]
    pub apis: Option<PathBuf>,
    #[arg(long)]
    pub llm_config: Option<PathBuf>,
    /// Output directory for programs (default: <out_dir>/programs).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct FuzzArgs {
    #[arg(long)]
    pub apis: Option<PathBuf>,
    /// Corpus produced by `standardize`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Programs directory produced by `gen`.
    #[arg(long)]
    pub programs: Option<PathBuf>,
    #[arg(long)]
    pub llm_config: Option<PathBuf>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// run_report.json to render (default: <out_dir>/run_report.json).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "text")]
    pub format: ReportFormat,
}

#[derive(Args)]
pub struct RunArgs {
    /// Comma-separated stage subset of mine,analyze,standardize,gen,fuzz.
    #[arg(long, value_delimiter = ',')]
    pub stages: Vec<StageName>,
}

impl Cli {
    /// Resolves the effective config: file, then global flag overrides.
    pub fn load_config(&self) -> Result<Config> {
        let mut config = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

fn override_llm(config: &mut Config, llm_config: &Option<PathBuf>) -> Result<()> {
    if let Some(path) = llm_config {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let llm: LlmConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.llm = llm;
    }
    Ok(())
}

/// Runs the parsed command; returns the process exit code.
pub fn dispatch(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            pipeline::exit_code_for(&e)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = cli.load_config()?;

    match &cli.command {
        Command::Mine(args) => {
            if let Some(src) = &args.src {
                config.miner.src = Some(src.clone());
            }
            if !args.macros.is_empty() {
                config.miner.macros = args.macros.clone();
            }
            if !args.ext.is_empty() {
                config.miner.extensions = args.ext.clone();
            }
            let artifacts = artifacts_for(&config, args.out.as_ref(), "blocks.jsonl")?;
            let blocks = pipeline::stage_mine(&config, &artifacts)?;
            println!("mined {blocks} check blocks -> {}", artifacts.blocks().display());
        }
        Command::Analyze(args) => {
            override_llm(&mut config, &args.llm_config)?;
            let artifacts = artifacts_from_pair(&config, args.blocks.as_ref(), args.out.as_ref())?;
            let gateway = crate::llm::Gateway::from_config(&config.llm)?;
            let vocab = crate::types::TypeVocabulary::with_extra(&config.llm.extra_types);
            let cases = pipeline::stage_analyze(&artifacts, &gateway, &vocab)?;
            println!("extracted {cases} edge cases -> {}", artifacts.cases().display());
        }
        Command::Standardize(args) => {
            let artifacts = artifacts_from_pair(&config, args.cases.as_ref(), args.out.as_ref())?;
            let corpus = pipeline::stage_standardize(&artifacts)?;
            println!(
                "corpus: {} cases in {} clusters -> {}",
                corpus.case_count(),
                corpus.cluster_count(),
                artifacts.corpus().display()
            );
        }
        Command::Gen(args) => {
            override_llm(&mut config, &args.llm_config)?;
            if let Some(apis) = &args.apis {
                config.catalog = Some(apis.clone());
            }
            if let Some(out) = &args.out {
                require_dir_name(out, "programs")?;
                config.out_dir = parent_dir(out);
            }
            let report = pipeline::run_pipeline(&config, &[StageName::Gen])?;
            println!(
                "synthesized programs for {}/{} APIs",
                report.api_covered, report.api_total
            );
        }
        Command::Fuzz(args) => {
            override_llm(&mut config, &args.llm_config)?;
            if let Some(apis) = &args.apis {
                config.catalog = Some(apis.clone());
            }
            if let Some(out) = &args.out {
                require_dir_name(out, "reports")?;
                config.out_dir = parent_dir(out);
            }
            // Explicit input locations override the artifact layout by
            // copying into it; stages only couple through files.
            let artifacts = Artifacts::new(&config.out_dir);
            fs::create_dir_all(&artifacts.out_dir).map_err(|e| Error::io(&artifacts.out_dir, e))?;
            if let Some(corpus) = &args.corpus {
                if corpus != &artifacts.corpus() {
                    fs::copy(corpus, artifacts.corpus()).map_err(|e| Error::io(corpus, e))?;
                }
            }
            if let Some(programs) = &args.programs {
                if programs != &artifacts.programs_dir() {
                    copy_dir(programs, &artifacts.programs_dir())?;
                }
            }
            let report = pipeline::run_pipeline(&config, &[StageName::Fuzz])?;
            let total: usize = report.bugs_by_class.values().sum();
            println!("fuzzing found {total} deduplicated bugs");
            for (class, count) in &report.bugs_by_class {
                println!("  {class}: {count}");
            }
        }
        Command::Report(args) => {
            let artifacts = Artifacts::new(&config.out_dir);
            let path = args.input.clone().unwrap_or_else(|| artifacts.run_report());
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let report: RunReport = serde_json::from_str(&text)?;
            let bytes = emit_report(&report, args.format);
            print!("{}", String::from_utf8_lossy(&bytes));
        }
        Command::Run(args) => {
            let stages: Vec<StageName> = if args.stages.is_empty() {
                StageName::ALL.to_vec()
            } else {
                args.stages.clone()
            };
            let report = pipeline::run_pipeline(&config, &stages)?;
            let bytes = emit_report(&report, ReportFormat::Text);
            print!("{}", String::from_utf8_lossy(&bytes));
        }
    }
    Ok(())
}

/// Derives the artifact layout when a subcommand names an explicit output
/// file: the file's parent becomes the output directory.
fn artifacts_for(config: &Config, out: Option<&PathBuf>, expected: &str) -> Result<Artifacts> {
    let artifacts = match out {
        Some(path) => {
            if path.file_name().map(|n| n.to_string_lossy().to_string())
                != Some(expected.to_string())
            {
                return Err(Error::Config(format!(
                    "output file must be named {expected} (artifact layout is fixed), got {}",
                    path.display()
                )));
            }
            Artifacts::new(parent_dir(path))
        }
        None => Artifacts::new(&config.out_dir),
    };
    fs::create_dir_all(&artifacts.out_dir).map_err(|e| Error::io(&artifacts.out_dir, e))?;
    Ok(artifacts)
}

fn artifacts_from_pair(
    config: &Config,
    input: Option<&PathBuf>,
    out: Option<&PathBuf>,
) -> Result<Artifacts> {
    let artifacts = match (input, out) {
        (_, Some(out)) => Artifacts::new(parent_dir(out)),
        (Some(input), None) => Artifacts::new(parent_dir(input)),
        (None, None) => Artifacts::new(&config.out_dir),
    };
    fs::create_dir_all(&artifacts.out_dir).map_err(|e| Error::io(&artifacts.out_dir, e))?;
    // An explicit input living elsewhere is copied into the layout.
    if let Some(input) = input {
        for (target, name) in [
            (artifacts.blocks(), "blocks.jsonl"),
            (artifacts.cases(), "cases.jsonl"),
        ] {
            if input.file_name().map(|n| n.to_string_lossy().to_string())
                == Some(name.to_string())
                && input != &target
                && input.exists()
            {
                fs::copy(input, &target).map_err(|e| Error::io(input, e))?;
            }
        }
    }
    Ok(artifacts)
}

fn parent_dir(path: &std::path::Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn require_dir_name(path: &std::path::Path, expected: &str) -> Result<()> {
    let name = path
        .components()
        .next_back()
        .map(|c| c.as_os_str().to_string_lossy().to_string());
    if name.as_deref() == Some(expected) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "output directory must be named {expected} (artifact layout is fixed), got {}",
            path.display()
        )))
    }
}

fn copy_dir(from: &std::path::Path, to: &std::path::Path) -> Result<()> {
    fs::create_dir_all(to).map_err(|e| Error::io(to, e))?;
    for entry in fs::read_dir(from).map_err(|e| Error::io(from, e))? {
        let entry = entry.map_err(|e| Error::io(from, e))?;
        if entry.file_type().map_err(|e| Error::io(from, e))?.is_file() {
            fs::copy(entry.path(), to.join(entry.file_name()))
                .map_err(|e| Error::io(entry.path(), e))?;
        }
    }
    Ok(())
}
