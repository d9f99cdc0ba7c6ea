//! Edge-case-based mutation: selects matched edge cases with the
//! position-weighted policy, prompts the model to rewrite the base program
//! so each edge case holds, executes the mutants, and collects bug reports.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::ApiSignature;
use crate::config::PolicyConfig;
use crate::corpus::{concretize, CaseKind, ContextFreeEdgeCase, EdgeCaseCorpus, Instantiation};
use crate::error::{Error, Result};
use crate::harness::{BugReport, Harness, OutcomeClass, DEVICE_PLACEHOLDER};
use crate::llm::{Gateway, LlmDialogue};
use crate::synth::extract_code_block;
use crate::types::{Stage, Warning};

/// Position-weighted keep rates. Earlier parameters are considered more
/// crucial: positions 1-2 always fuzz, 3-4 at 25%, 5+ at 12.5%; compound
/// cases are scarce and always kept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub rate_pos_1_2: f64,
    pub rate_pos_3_4: f64,
    pub rate_pos_5_plus: f64,
    pub compound_rate: f64,
    pub rng_seed: u64,
}

impl SelectionPolicy {
    pub fn from_config(config: &PolicyConfig, rng_seed: u64) -> Self {
        SelectionPolicy {
            rate_pos_1_2: config.rate_pos_1_2,
            rate_pos_3_4: config.rate_pos_3_4,
            rate_pos_5_plus: config.rate_pos_5_plus,
            compound_rate: config.compound_rate,
            rng_seed,
        }
    }

    fn rate_for_position(&self, position: usize) -> f64 {
        match position {
            1 | 2 => self.rate_pos_1_2,
            3 | 4 => self.rate_pos_3_4,
            _ => self.rate_pos_5_plus,
        }
    }
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy::from_config(&PolicyConfig::default(), 0)
    }
}

/// One planned mutation: an edge case concretized against the API.
#[derive(Debug, Clone)]
pub struct MutationTask {
    pub api: ApiSignature,
    pub edge_case: ContextFreeEdgeCase,
    pub instantiation: Instantiation,
}

/// Concretizes every matched case and applies the selection policy with a
/// seeded RNG, so the same (matches, api, policy) always selects the same
/// tasks. One uniform draw is consumed per candidate instantiation,
/// keeping positions statistically independent.
pub fn select_edge_cases(
    matches: &[&ContextFreeEdgeCase],
    api: &ApiSignature,
    policy: &SelectionPolicy,
) -> Vec<MutationTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(policy.rng_seed);
    let mut tasks = Vec::new();
    for case in matches {
        for instantiation in concretize(case, api) {
            let rate = match case.kind {
                CaseKind::Compound => policy.compound_rate,
                CaseKind::Individual => {
                    let position = instantiation.positions.first().copied().unwrap_or(1);
                    policy.rate_for_position(position)
                }
            };
            let draw: f64 = rng.gen();
            if draw < rate {
                tasks.push(MutationTask {
                    api: api.clone(),
                    edge_case: (*case).clone(),
                    instantiation,
                });
            }
        }
    }
    tasks
}

/// Builds the mutation prompt: API definition, the instantiated edge-case
/// sentence, and the base program to modify. Deterministic per task and
/// base program.
pub fn build_mutation_prompt(
    task: &MutationTask,
    base_source: &str,
    language: &str,
    device_aware: bool,
) -> LlmDialogue {
    let mut prompt = format!(
        "Modify the test program below so that the stated edge case holds for the named \
         parameter(s), while keeping the program runnable.\n\
         \n\
         API: {definition}\n\
         \n\
         Edge case: {edge}\n\
         \n\
         Test program:\n\
         ```{fence}\n\
         {base}```\n\
         \n\
         Keep calling the API exactly once and keep printing its result as one line: \
         RESULT: [v1, v2, ...].\n",
        definition = task.api.definition(),
        edge = task.instantiation.text,
        fence = language.to_lowercase(),
        base = ensure_trailing_newline(base_source),
    );
    if device_aware {
        prompt.push_str(&format!(
            "Wherever a device is needed, keep using the literal string \"{DEVICE_PLACEHOLDER}\" \
             as the device name.\n"
        ));
    }
    prompt.push_str("\nRespond with the complete modified program in a single code block.");
    LlmDialogue::single_user(Stage::Mutation, task.api.name.clone(), prompt)
}

fn ensure_trailing_newline(text: &str) -> String {
    if text.ends_with('\n') {
        text.to_string()
    } else {
        format!("{text}\n")
    }
}

/// A mutant that ran without revealing a bug; kept for the run record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rejection {
    pub api: String,
    pub edge_case_id: String,
    pub class: OutcomeClass,
    pub program_path: PathBuf,
}

/// A bug report together with the concrete edge-case instantiation that
/// produced it.
#[derive(Debug, Clone)]
pub struct FoundBug {
    pub report: BugReport,
    pub instantiation: Instantiation,
}

/// Everything one API's fuzzing pass produced.
#[derive(Debug, Default)]
pub struct FuzzOutcome {
    pub bugs: Vec<FoundBug>,
    pub rejections: Vec<Rejection>,
    pub warnings: Vec<Warning>,
    pub tasks_run: usize,
}

/// File-name-safe form of an API name (dots kept, separators replaced).
pub fn sanitize_file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Fuzzes one API: selects tasks over the corpus matches, asks for one
/// mutant per task (no retry on invalid mutants), executes, and classifies.
/// Device-parameterized mutants while a device pair is configured go through
/// the consistency comparison; everything else is a single run. Gateway
/// failures skip the task with a warning and the rest proceed.
pub fn fuzz_api(
    api: &ApiSignature,
    base_source: &str,
    corpus: &EdgeCaseCorpus,
    gateway: &Gateway,
    harness: &Harness,
    policy: &SelectionPolicy,
    mutants_dir: &Path,
) -> Result<FuzzOutcome> {
    let pattern = crate::catalog::etype_of(api);
    let matches = corpus.match_pattern(&pattern);
    let tasks = select_edge_cases(&matches, api, policy);
    let mut outcome = FuzzOutcome::default();

    fs::create_dir_all(mutants_dir).map_err(|e| Error::io(mutants_dir, e))?;
    let device_aware = harness.target.device_tokens.is_some();

    for (index, task) in tasks.iter().enumerate() {
        let prompt = build_mutation_prompt(task, base_source, &harness.target.language, device_aware);
        let response = match gateway.complete(&prompt) {
            Ok(r) => r,
            Err(e) => {
                outcome.warnings.push(Warning::new(
                    "fuzz",
                    format!("{}#{}", api.name, task.edge_case.id),
                    format!("mutation call failed, task skipped: {e}"),
                ));
                continue;
            }
        };
        outcome.tasks_run += 1;
        let mutant = extract_code_block(&response);
        let mutant_path = mutants_dir.join(format!(
            "{}__{}__{:03}{}",
            sanitize_file_stem(&api.name),
            task.edge_case.id,
            index,
            harness.target.program_extension
        ));
        fs::write(&mutant_path, &mutant).map_err(|e| Error::io(&mutant_path, e))?;

        let (class, run) = if mutant.contains(DEVICE_PLACEHOLDER) {
            if let Some(devices) = harness.target.device_tokens.clone() {
                let cmp = harness.compare_devices(
                    &mutant,
                    &devices,
                    harness.target.consistency_tolerance,
                    harness.target.timeout_s,
                )?;
                if let Some(w) = cmp.warning {
                    outcome.warnings.push(w);
                }
                let worst = cmp
                    .runs
                    .iter()
                    .map(|(_, o)| (harness.classify(o), o.clone()))
                    .max_by_key(|(c, _)| c.severity())
                    .map(|(_, o)| o)
                    .expect("comparison ran both devices");
                (cmp.class, worst)
            } else {
                let run = harness.execute_source(&mutant, harness.target.timeout_s)?;
                (harness.classify(&run), run)
            }
        } else {
            let run = harness.execute_source(&mutant, harness.target.timeout_s)?;
            (harness.classify(&run), run)
        };

        match BugReport::new(
            &api.name,
            class,
            Some(task.edge_case.id.clone()),
            mutant_path.clone(),
            run,
            &harness.target.runtime_error_patterns,
        ) {
            Some(report) => outcome.bugs.push(FoundBug {
                report,
                instantiation: task.instantiation.clone(),
            }),
            None => outcome.rejections.push(Rejection {
                api: api.name.clone(),
                edge_case_id: task.edge_case.id.clone(),
                class,
                program_path: mutant_path,
            }),
        }
    }
    Ok(outcome)
}

/// JSON Lines record for one deduplicated bug.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BugRecord {
    pub api: String,
    pub edge_case_id: Option<String>,
    pub instantiation: Option<String>,
    pub positions: Vec<usize>,
    pub outcome_class: OutcomeClass,
    pub signal_or_pattern: String,
    pub program_path: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::{categorize, CheckRef, ContextEdgeCase};
    use crate::catalog::ApiParam;
    use crate::config::{LlmConfig, TargetConfig};
    use crate::corpus::standardize;
    use crate::llm::{canonical_hash, ReplayBackend};
    use crate::types::TypeVocabulary;

    fn api_n_tensors(name: &str, n: usize) -> ApiSignature {
        let vocab = TypeVocabulary::default();
        ApiSignature {
            name: name.into(),
            parameters: (1..=n)
                .map(|i| ApiParam {
                    name: format!("t{i}"),
                    ty: vocab.resolve("Tensor").unwrap(),
                    position: i,
                    optional: false,
                })
                .collect(),
            doc_hint: None,
        }
    }

    fn tensor_case(description: &str) -> ContextFreeEdgeCase {
        let vocab = TypeVocabulary::default();
        let case = ContextEdgeCase {
            source: CheckRef {
                file: "Ops.cc".into(),
                line: 3,
                function: "f".into(),
                macro_name: "TORCH_CHECK".into(),
            },
            variables: vec![("self".into(), vocab.resolve("Tensor").unwrap())],
            description: description.into(),
            category: categorize(description, 1),
        };
        standardize(&case).unwrap()
    }

    fn compound_case(description: &str) -> ContextFreeEdgeCase {
        let vocab = TypeVocabulary::default();
        let case = ContextEdgeCase {
            source: CheckRef {
                file: "Ops.cc".into(),
                line: 9,
                function: "g".into(),
                macro_name: "TORCH_CHECK".into(),
            },
            variables: vec![
                ("x".into(), vocab.resolve("Tensor").unwrap()),
                ("y".into(), vocab.resolve("Tensor").unwrap()),
            ],
            description: description.into(),
            category: categorize(description, 2),
        };
        standardize(&case).unwrap()
    }

    #[test]
    fn positions_one_and_two_always_selected() {
        let api = api_n_tensors("m.add", 2);
        let cases: Vec<ContextFreeEdgeCase> = (0..5)
            .map(|i| tensor_case(&format!("Tensor self is a complex tensor variant {i}")))
            .collect();
        let refs: Vec<&ContextFreeEdgeCase> = cases.iter().collect();
        for seed in 0..20 {
            let policy = SelectionPolicy {
                rng_seed: seed,
                ..SelectionPolicy::default()
            };
            let tasks = select_edge_cases(&refs, &api, &policy);
            assert_eq!(tasks.len(), 10, "5 cases x 2 always-kept positions");
        }
    }

    #[test]
    fn compound_cases_always_selected() {
        let api = api_n_tensors("m.matmul", 2);
        let case = compound_case("Tensor x has a larger last dimension than Tensor y");
        let refs = vec![&case];
        for seed in 0..20 {
            let policy = SelectionPolicy {
                rng_seed: seed,
                ..SelectionPolicy::default()
            };
            let tasks = select_edge_cases(&refs, &api, &policy);
            assert_eq!(tasks.len(), 1);
            assert_eq!(tasks[0].instantiation.positions, vec![1, 2]);
        }
    }

    #[test]
    fn later_positions_are_downsampled_at_stated_rates() {
        let api = api_n_tensors("m.wide", 6);
        let case = tensor_case("Tensor self is a complex tensor");
        let refs = vec![&case];
        let trials = 4000u64;
        let mut kept = [0usize; 7];
        for seed in 0..trials {
            let policy = SelectionPolicy {
                rng_seed: seed,
                ..SelectionPolicy::default()
            };
            for task in select_edge_cases(&refs, &api, &policy) {
                kept[task.instantiation.positions[0]] += 1;
            }
        }
        let rate = |p: usize| kept[p] as f64 / trials as f64;
        assert_eq!(rate(1), 1.0);
        assert_eq!(rate(2), 1.0);
        for p in [3, 4] {
            assert!((rate(p) - 0.25).abs() < 0.03, "pos {p}: {}", rate(p));
        }
        for p in [5, 6] {
            assert!((rate(p) - 0.125).abs() < 0.03, "pos {p}: {}", rate(p));
        }
    }

    #[test]
    fn selection_is_reproducible_for_a_seed() {
        let api = api_n_tensors("m.wide", 6);
        let case = tensor_case("Tensor self is a complex tensor");
        let refs = vec![&case];
        let policy = SelectionPolicy {
            rng_seed: 42,
            ..SelectionPolicy::default()
        };
        let a: Vec<Vec<usize>> = select_edge_cases(&refs, &api, &policy)
            .into_iter()
            .map(|t| t.instantiation.positions)
            .collect();
        let b: Vec<Vec<usize>> = select_edge_cases(&refs, &api, &policy)
            .into_iter()
            .map(|t| t.instantiation.positions)
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn mutation_prompt_names_the_concretized_parameter() {
        let api = api_n_tensors("m.all", 1);
        let case = tensor_case("Tensor self is a complex tensor");
        let tasks = select_edge_cases(&[&case], &api, &SelectionPolicy::default());
        assert_eq!(tasks.len(), 1);
        let prompt = build_mutation_prompt(&tasks[0], "print('base')\n", "Python", false);
        let text = &prompt.messages[0].content;
        assert!(text.contains("Edge case: 't1' is a complex tensor"), "{text}");
        assert!(text.contains("API: m.all(t1: Tensor)"));
        assert!(text.contains("print('base')"));
        assert_eq!(prompt.stage, Stage::Mutation);
    }

    #[test]
    fn compound_prompt_names_both_parameters() {
        let api = api_n_tensors("m.matmul", 2);
        let case = compound_case("Tensor x has a larger last dimension than Tensor y");
        let tasks = select_edge_cases(&[&case], &api, &SelectionPolicy::default());
        let prompt = build_mutation_prompt(&tasks[0], "base\n", "Python", false);
        let text = &prompt.messages[0].content;
        assert!(
            text.contains("Edge case: 't1' has a larger last dimension than 't2'"),
            "{text}"
        );
    }

    #[test]
    fn empty_match_list_runs_zero_tasks_and_calls() {
        let api = api_n_tensors("m.lonely", 1);
        let corpus = EdgeCaseCorpus::build([]);
        let gateway = Gateway::new(Box::new(ReplayBackend::from_pairs([])), LlmConfig::default());
        let harness = Harness::new(TargetConfig::default());
        let dir = tempfile::tempdir().unwrap();
        let outcome = fuzz_api(
            &api,
            "print('base')\n",
            &corpus,
            &gateway,
            &harness,
            &SelectionPolicy::default(),
            dir.path(),
        )
        .unwrap();
        assert_eq!(outcome.tasks_run, 0);
        assert!(outcome.bugs.is_empty());
        assert_eq!(gateway.ledger().total(), 0);
    }

    #[test]
    fn graceful_mutant_is_rejection_not_bug() {
        let api = api_n_tensors("m.all", 1);
        let case = tensor_case("Tensor self is a complex tensor");
        let corpus = EdgeCaseCorpus::build([case]);
        let harness = Harness::new(TargetConfig::default());

        let matches = corpus.match_pattern(&crate::catalog::etype_of(&api));
        let tasks = select_edge_cases(&matches, &api, &SelectionPolicy::default());
        let prompt = build_mutation_prompt(&tasks[0], "print('base')\n", "Python", false);
        let backend = ReplayBackend::from_pairs([(
            canonical_hash(&prompt),
            "```python\nraise ValueError('complex not supported')\n```".to_string(),
        )]);
        let gateway = Gateway::new(Box::new(backend), LlmConfig::default());

        let dir = tempfile::tempdir().unwrap();
        let outcome = fuzz_api(
            &api,
            "print('base')\n",
            &corpus,
            &gateway,
            &harness,
            &SelectionPolicy::default(),
            dir.path(),
        )
        .unwrap();
        assert!(outcome.bugs.is_empty());
        assert_eq!(outcome.rejections.len(), 1);
        assert_eq!(outcome.rejections[0].class, OutcomeClass::GracefulRejection);
        assert_eq!(gateway.ledger().stage_total(Stage::Mutation), 1);
    }

    #[test]
    fn aborting_mutant_produces_bug_report_with_provenance() {
        let api = api_n_tensors("m.all", 1);
        let case = tensor_case("Tensor self is a complex tensor");
        let corpus = EdgeCaseCorpus::build([case.clone()]);
        let harness = Harness::new(TargetConfig::default());

        let matches = corpus.match_pattern(&crate::catalog::etype_of(&api));
        let tasks = select_edge_cases(&matches, &api, &SelectionPolicy::default());
        let prompt = build_mutation_prompt(&tasks[0], "print('base')\n", "Python", false);
        let backend = ReplayBackend::from_pairs([(
            canonical_hash(&prompt),
            "```python\nimport os\nos.abort()\n```".to_string(),
        )]);
        let gateway = Gateway::new(Box::new(backend), LlmConfig::default());

        let dir = tempfile::tempdir().unwrap();
        let outcome = fuzz_api(
            &api,
            "print('base')\n",
            &corpus,
            &gateway,
            &harness,
            &SelectionPolicy::default(),
            dir.path(),
        )
        .unwrap();
        assert_eq!(outcome.bugs.len(), 1);
        let report = &outcome.bugs[0].report;
        assert_eq!(report.class, OutcomeClass::AbortSignal);
        assert_eq!(report.api, "m.all");
        assert_eq!(report.edge_case_id.as_deref(), Some(case.id.as_str()));
        assert!(report.program_path.exists());
    }

    #[test]
    fn gateway_failure_skips_task_and_continues() {
        let api = api_n_tensors("m.all", 1);
        let a = tensor_case("Tensor self is a complex tensor");
        let b = tensor_case("Tensor self is empty");
        let corpus = EdgeCaseCorpus::build([a, b]);
        let harness = Harness::new(TargetConfig::default());

        // Only the second task's prompt has a fixture.
        let matches = corpus.match_pattern(&crate::catalog::etype_of(&api));
        let tasks = select_edge_cases(&matches, &api, &SelectionPolicy::default());
        assert_eq!(tasks.len(), 2);
        let prompt_b = build_mutation_prompt(&tasks[1], "print('base')\n", "Python", false);
        let backend = ReplayBackend::from_pairs([(
            canonical_hash(&prompt_b),
            "```python\nprint('fine')\n```".to_string(),
        )]);
        let gateway = Gateway::new(Box::new(backend), LlmConfig::default());

        let dir = tempfile::tempdir().unwrap();
        let outcome = fuzz_api(
            &api,
            "print('base')\n",
            &corpus,
            &gateway,
            &harness,
            &SelectionPolicy::default(),
            dir.path(),
        )
        .unwrap();
        assert_eq!(outcome.warnings.len(), 1);
        assert_eq!(outcome.tasks_run, 1);
        assert_eq!(outcome.rejections.len(), 1);
    }

    #[test]
    fn device_parameterized_mutant_goes_through_consistency_check() {
        let api = api_n_tensors("m.all", 1);
        let case = tensor_case("Tensor self is a complex tensor");
        let corpus = EdgeCaseCorpus::build([case]);
        let target = TargetConfig {
            device_tokens: Some(("cpu".into(), "gpu".into())),
            ..TargetConfig::default()
        };
        let harness = Harness::new(target);

        let matches = corpus.match_pattern(&crate::catalog::etype_of(&api));
        let tasks = select_edge_cases(&matches, &api, &SelectionPolicy::default());
        let prompt = build_mutation_prompt(&tasks[0], "print('base')\n", "Python", true);
        let mutant = r#"```python
d = "{{DEVICE}}"
if d == "cpu":
    print("RESULT: [1.0]")
else:
    print("RESULT: [-1.0]")
```"#;
        let backend =
            ReplayBackend::from_pairs([(canonical_hash(&prompt), mutant.to_string())]);
        let gateway = Gateway::new(Box::new(backend), LlmConfig::default());

        let dir = tempfile::tempdir().unwrap();
        let outcome = fuzz_api(
            &api,
            "print('base')\n",
            &corpus,
            &gateway,
            &harness,
            &SelectionPolicy::default(),
            dir.path(),
        )
        .unwrap();
        assert_eq!(outcome.bugs.len(), 1);
        assert_eq!(outcome.bugs[0].report.class, OutcomeClass::InconsistentOutput);
    }

    #[test]
    fn one_llm_call_per_selected_task() {
        let api = api_n_tensors("m.add", 2);
        let cases: Vec<ContextFreeEdgeCase> = (0..3)
            .map(|i| tensor_case(&format!("Tensor self is a complex tensor v{i}")))
            .collect();
        let corpus = EdgeCaseCorpus::build(cases);
        let harness = Harness::new(TargetConfig::default());

        let matches = corpus.match_pattern(&crate::catalog::etype_of(&api));
        let tasks = select_edge_cases(&matches, &api, &SelectionPolicy::default());
        let pairs: Vec<(String, String)> = tasks
            .iter()
            .map(|t| {
                let p = build_mutation_prompt(t, "print('base')\n", "Python", false);
                (canonical_hash(&p), "```python\nprint('x')\n```".to_string())
            })
            .collect();
        let gateway = Gateway::new(Box::new(ReplayBackend::from_pairs(pairs)), LlmConfig::default());

        let dir = tempfile::tempdir().unwrap();
        let outcome = fuzz_api(
            &api,
            "print('base')\n",
            &corpus,
            &gateway,
            &harness,
            &SelectionPolicy::default(),
            dir.path(),
        )
        .unwrap();
        assert_eq!(outcome.tasks_run, tasks.len());
        assert_eq!(
            gateway.ledger().stage_total(Stage::Mutation),
            tasks.len() as u64
        );
    }
}
