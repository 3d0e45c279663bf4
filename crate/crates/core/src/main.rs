//! Command-line entry point: one subcommand per pipeline stage plus the
//! evaluation commands and the workspace audit.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use roleforge::corpus::types::DEFAULT_SUMMARY_TOKEN_BUDGET;
use roleforge::corpus::workspace::Workspace;
use roleforge::error::{Error, Result};
use roleforge::eval::{builtin_metrics, load_custom_rubric, Metric, MetricId, MULTI_TURN_ROUNDS};
use roleforge::gateway::{
    mock_rule_table, BackendConfig, Gateway, HttpBackend, RetryPolicy, SamplingParams,
    DEFAULT_CONCURRENCY,
};
use roleforge::halluc::{DEFAULT_PROBE_CAP, DEFAULT_PROBE_COUNT};
use roleforge::pipeline::{
    self, default_mock_rules, EvalMode, TrainsetOptions, DEFAULT_MAX_SEGMENT_CHARS,
};
use roleforge::scenario::DEFAULT_SCENE_COUNT;
use roleforge::trainset::{ManifestOverrides, DEFAULT_SEPARATOR};

#[derive(Parser)]
#[command(
    name = "roleforge",
    version,
    about = "Build role-play fine-tuning datasets and judge role-play agents"
)]
struct Cli {
    /// Workspace root directory holding one subdirectory per role.
    #[arg(long, global = true, default_value = "workspace")]
    workspace: PathBuf,

    /// JSON file listing backends: {"backends": [{backend_id, base_url, model_id, api_key_env_var, ...}]}.
    #[arg(long, global = true)]
    backend_config: Option<PathBuf>,

    /// Force the deterministic offline rule-table backend everywhere.
    #[arg(long, global = true)]
    mock: bool,

    /// Bound on in-flight requests and worker threads.
    #[arg(long, global = true, default_value_t = DEFAULT_CONCURRENCY)]
    concurrency: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a role profile, life segments, and authentic dialogues from local files.
    Ingest {
        #[arg(long)]
        role: String,
        /// Directory holding profile.md (or .txt sections + profile.json),
        /// optional summary.txt, optional dialogues/*.txt scripts.
        #[arg(long)]
        profile_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SUMMARY_TOKEN_BUDGET)]
        summary_budget: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_SEGMENT_CHARS)]
        max_segment_chars: usize,
    },
    /// Generate scenes from life segments.
    GenScenes {
        #[arg(long)]
        role: String,
        #[arg(long, default_value_t = DEFAULT_SCENE_COUNT)]
        count: usize,
        #[arg(long)]
        backend: Option<String>,
    },
    /// Generate mimic dialogues per scene and extract training pairs.
    GenDialogues {
        #[arg(long)]
        role: String,
        /// Upper bound on tone-anchoring exemplar dialogues per prompt.
        #[arg(long, default_value_t = 3)]
        exemplars: usize,
        /// Regenerate scripts that come back under the minimum length.
        #[arg(long)]
        regenerate_short: bool,
        #[arg(long)]
        backend: Option<String>,
    },
    /// Generate scenarios for authentic dialogues that lack one.
    GenRealScenes {
        #[arg(long)]
        role: String,
        #[arg(long)]
        backend: Option<String>,
    },
    /// Attach a pre-response thought to every pair that lacks one.
    GenThoughts {
        #[arg(long)]
        role: String,
        #[arg(long)]
        backend: Option<String>,
    },
    /// Generate knowledge-boundary probe questions with refusals.
    GenProbes {
        #[arg(long)]
        role: String,
        /// Topic lexicon: one topic per line, "topic<TAB>term,term,...".
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PROBE_COUNT)]
        count: usize,
        #[arg(long)]
        backend: Option<String>,
    },
    /// Assemble the training file and the hyperparameter manifest.
    BuildTrainset {
        #[arg(long)]
        role: String,
        #[arg(long)]
        seed: u64,
        /// Maximum probe share of the emitted records.
        #[arg(long, default_value_t = DEFAULT_PROBE_CAP)]
        probe_cap: f64,
        #[arg(long, default_value = DEFAULT_SEPARATOR)]
        separator: String,
        /// Emit probe records without the refusal-rationale thinking line.
        #[arg(long)]
        no_probe_thoughts: bool,
        #[arg(long)]
        base_model: Option<String>,
        #[arg(long)]
        batch_size: Option<u32>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        epochs: Option<u32>,
        #[arg(long)]
        max_seq_len: Option<u32>,
        #[arg(long)]
        rank: Option<u32>,
        #[arg(long)]
        alpha: Option<u32>,
        #[arg(long)]
        optimizer: Option<String>,
    },
    /// Evaluation: transcript collection, judging, and reporting.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run every invariant check across the workspace.
    Audit {
        #[arg(long)]
        role: String,
        #[arg(long, default_value_t = DEFAULT_SUMMARY_TOKEN_BUDGET)]
        summary_budget: usize,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Collect transcripts from a role-play agent.
    Run {
        #[arg(long)]
        role: String,
        /// Agent backend id from the backend config (ignored under --mock).
        #[arg(long)]
        agent: String,
        #[arg(long, value_parser = ["single", "multi"], default_value = "single")]
        mode: String,
        #[arg(long, default_value_t = MULTI_TURN_ROUNDS)]
        rounds: usize,
        /// Question bank (line-delimited JSON). Defaults to eval/questions.jsonl
        /// inside the role workspace.
        #[arg(long)]
        questions: Option<PathBuf>,
        /// Interrogator backend id for multi-turn runs (defaults to the judge
        /// configuration's interrogator, or the mock under --mock).
        #[arg(long)]
        interrogator: Option<String>,
    },
    /// Judge collected transcripts with rubric-scored metrics.
    Judge {
        #[arg(long)]
        role: String,
        /// Judge backend id from the backend config (ignored under --mock).
        #[arg(long)]
        judge: String,
        /// "all" or a comma-separated subset of
        /// contextual,emotional,language,logical,adaptability,overall.
        #[arg(long, default_value = "all")]
        metrics: String,
        /// Extra rubric files (custom metrics named by file stem).
        #[arg(long)]
        rubric: Vec<PathBuf>,
        #[arg(long, default_value_t = MULTI_TURN_ROUNDS)]
        rounds: usize,
    },
    /// Aggregate verdicts into the metric report.
    Report {
        #[arg(long)]
        role: String,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}

/// Backends available to this invocation.
struct BackendSet {
    mock: bool,
    role_name_hint: Option<String>,
    configs: Vec<BackendConfig>,
    concurrency: usize,
}

impl BackendSet {
    fn load(cli: &Cli, role_name_hint: Option<String>) -> Result<Self> {
        let configs = match &cli.backend_config {
            Some(path) => {
                let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let parsed: serde_json::Value = serde_json::from_str(&raw)
                    .map_err(|e| Error::parse(format!("backend config: {e}")))?;
                let list = parsed
                    .get("backends")
                    .cloned()
                    .ok_or_else(|| Error::validation("backend config lacks a 'backends' list"))?;
                let configs: Vec<BackendConfig> = serde_json::from_value(list)
                    .map_err(|e| Error::parse(format!("backend config: {e}")))?;
                for config in &configs {
                    config.validate()?;
                }
                configs
            }
            None => Vec::new(),
        };
        Ok(BackendSet {
            mock: cli.mock,
            role_name_hint,
            configs,
            concurrency: cli.concurrency,
        })
    }

    fn mock_gateway(&self, ws: Option<&Workspace>) -> Arc<Gateway> {
        let name = self.role_name_hint.as_deref().unwrap_or("Role");
        let (rules, default) = default_mock_rules(name);
        let mut gw = Gateway::new(Arc::new(mock_rule_table(rules, default)))
            .with_concurrency(self.concurrency);
        if let Some(ws) = ws {
            gw = gw.with_cache(ws.cache());
        }
        Arc::new(gw)
    }

    /// Gateway for a named backend, or the mock when --mock is set.
    fn gateway(&self, name: Option<&str>, ws: Option<&Workspace>) -> Result<Arc<Gateway>> {
        if self.mock {
            return Ok(self.mock_gateway(ws));
        }
        let Some(name) = name else {
            return Err(Error::validation(
                "no backend named; pass --backend/--agent/--judge or use --mock",
            ));
        };
        let config = self
            .configs
            .iter()
            .find(|c| c.backend_id == name)
            .ok_or_else(|| {
                Error::validation(format!(
                    "backend {name:?} not found in the backend config"
                ))
            })?;
        let backend = HttpBackend::new(config.clone())?;
        let retry = RetryPolicy {
            max_retries: config.max_retries,
            ..RetryPolicy::default()
        };
        let mut gw = Gateway::new(Arc::new(backend))
            .with_retry(retry)
            .with_concurrency(self.concurrency);
        if let Some(ws) = ws {
            gw = gw.with_cache(ws.cache());
        }
        Ok(Arc::new(gw))
    }
}

fn open_workspace(cli: &Cli, role: &str) -> Result<Workspace> {
    Workspace::open(&cli.workspace, role)
}

fn role_name_hint(cli: &Cli, role: &str) -> Option<String> {
    Workspace::open(&cli.workspace, role)
        .and_then(|ws| ws.load_profile())
        .map(|p| p.name)
        .ok()
}

fn parse_metric_selection(metrics: &str, rubric_paths: &[PathBuf]) -> Result<Vec<Metric>> {
    let mut selected: Vec<Metric> = if metrics.trim() == "all" {
        builtin_metrics()
    } else {
        let all = builtin_metrics();
        let mut picked = Vec::new();
        for token in metrics.split(',') {
            let token = token.trim().to_lowercase();
            if token.is_empty() {
                continue;
            }
            let id = MetricId::try_from(token.clone()).map_err(Error::Validation)?;
            match all.iter().find(|m| m.metric_id == id) {
                Some(metric) => picked.push(metric.clone()),
                None => {
                    return Err(Error::validation(format!(
                        "unknown metric {token:?}; shipped metrics are contextual, emotional, language, logical, adaptability, overall (custom metrics load via --rubric)"
                    )))
                }
            }
        }
        if picked.is_empty() {
            return Err(Error::validation("metric selection is empty"));
        }
        picked
    };
    for path in rubric_paths {
        selected.push(load_custom_rubric(path)?);
    }
    Ok(selected)
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest {
            role,
            profile_dir,
            summary_budget,
            max_segment_chars,
        } => {
            let backends = BackendSet::load(&cli, None)?;
            // The summarizer is only consulted when summary.txt is missing.
            let gateway = if backends.mock {
                Some(backends.mock_gateway(None))
            } else {
                None
            };
            let report = pipeline::ingest(
                &cli.workspace,
                role,
                profile_dir,
                gateway.as_deref(),
                *summary_budget,
                *max_segment_chars,
            )?;
            println!(
                "ingested role {}: {} sections, {} segments, {} authentic dialogues{}",
                report.role_id,
                report.sections,
                report.segments,
                report.authentic_dialogues,
                if report.summary_generated {
                    " (summary generated)"
                } else {
                    ""
                }
            );
            Ok(())
        }
        Command::GenScenes {
            role,
            count,
            backend,
        } => {
            let ws = open_workspace(&cli, role)?;
            let backends = BackendSet::load(&cli, role_name_hint(&cli, role))?;
            let gw = backends.gateway(backend.as_deref(), Some(&ws))?;
            let report = pipeline::gen_scenes(&ws, &gw, *count, cli.concurrency)?;
            println!(
                "generated {} scenes ({} dropped, shortfall {})",
                report.scenes, report.dropped, report.shortfall
            );
            Ok(())
        }
        Command::GenDialogues {
            role,
            exemplars,
            regenerate_short,
            backend,
        } => {
            let ws = open_workspace(&cli, role)?;
            let backends = BackendSet::load(&cli, role_name_hint(&cli, role))?;
            let gw = backends.gateway(backend.as_deref(), Some(&ws))?;
            let report = pipeline::gen_dialogues_with_options(
                &ws,
                &gw,
                *exemplars,
                cli.concurrency,
                *regenerate_short,
            )?;
            println!(
                "generated {} mimic dialogues over {} authentic; extracted {} pairs ({} below length)",
                report.mimic_dialogues,
                report.authentic_dialogues,
                report.pairs,
                report.below_min_words
            );
            Ok(())
        }
        Command::GenRealScenes { role, backend } => {
            let ws = open_workspace(&cli, role)?;
            let backends = BackendSet::load(&cli, role_name_hint(&cli, role))?;
            let gw = backends.gateway(backend.as_deref(), Some(&ws))?;
            let report = pipeline::gen_real_scenes(&ws, &gw)?;
            println!(
                "attached {} real-dialogue scenes ({} leak failures)",
                report.scenes, report.leak_failures
            );
            Ok(())
        }
        Command::GenThoughts { role, backend } => {
            let ws = open_workspace(&cli, role)?;
            let backends = BackendSet::load(&cli, role_name_hint(&cli, role))?;
            let gw = backends.gateway(backend.as_deref(), Some(&ws))?;
            let report = pipeline::gen_thoughts(&ws, &gw, cli.concurrency)?;
            println!(
                "annotated {} pairs ({} already annotated, {} awaiting scenes)",
                report.annotated, report.already_annotated, report.missing_scene
            );
            Ok(())
        }
        Command::GenProbes {
            role,
            topics,
            count,
            backend,
        } => {
            let ws = open_workspace(&cli, role)?;
            let backends = BackendSet::load(&cli, role_name_hint(&cli, role))?;
            let gw = backends.gateway(backend.as_deref(), Some(&ws))?;
            let report = pipeline::gen_probes(&ws, &gw, topics, *count)?;
            println!(
                "generated {} probes ({} flagged direct, {} refusal scan failures)",
                report.probes, report.flagged_direct, report.refusal_scan_failures
            );
            Ok(())
        }
        Command::BuildTrainset {
            role,
            seed,
            probe_cap,
            separator,
            no_probe_thoughts,
            base_model,
            batch_size,
            learning_rate,
            epochs,
            max_seq_len,
            rank,
            alpha,
            optimizer,
        } => {
            let ws = open_workspace(&cli, role)?;
            let options = TrainsetOptions {
                shuffle_seed: *seed,
                probe_cap: *probe_cap,
                separator: separator.clone(),
                instruction_budget: max_seq_len
                    .map(|v| v as usize)
                    .unwrap_or(roleforge::trainset::DEFAULT_INSTRUCTION_BUDGET),
                probe_rationale_thoughts: !no_probe_thoughts,
                overrides: ManifestOverrides {
                    base_model_hint: base_model.clone(),
                    batch_size: *batch_size,
                    learning_rate: *learning_rate,
                    epochs: *epochs,
                    max_sequence_length: *max_seq_len,
                    adapter_rank: *rank,
                    adapter_alpha: *alpha,
                    optimizer_name: optimizer.clone(),
                    separator_token: if separator == DEFAULT_SEPARATOR {
                        None
                    } else {
                        Some(separator.clone())
                    },
                },
            };
            let report = pipeline::build_trainset(&ws, &options)?;
            println!(
                "emitted {} dialogue records and {} probe records ({} probes over cap) with {} sentences",
                report.dialogue_records,
                report.probe_records,
                report.probes_excluded_by_cap,
                report.sentences
            );
            Ok(())
        }
        Command::Eval(eval_command) => run_eval(&cli, eval_command),
        Command::Audit {
            role,
            summary_budget,
        } => {
            let ws = open_workspace(&cli, role)?;
            let report = pipeline::audit(&ws, *summary_budget)?;
            for check in &report.checks {
                println!(
                    "{} {}: {}",
                    if check.passed { "ok  " } else { "FAIL" },
                    check.name,
                    check.detail
                );
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Error::validation("audit found invariant violations"))
            }
        }
    }
}

fn run_eval(cli: &Cli, command: &EvalCommand) -> Result<()> {
    match command {
        EvalCommand::Run {
            role,
            agent,
            mode,
            rounds,
            questions,
            interrogator,
        } => {
            let ws = open_workspace(cli, role)?;
            let backends = BackendSet::load(cli, role_name_hint(cli, role))?;
            let agent_gw = backends.gateway(Some(agent.as_str()), Some(&ws))?;
            let interrogator_gw =
                backends.gateway(interrogator.as_deref().or(Some("gpt-4o")), Some(&ws))?;
            let bank_path = questions
                .clone()
                .unwrap_or_else(|| ws.eval_dir().join("questions.jsonl"));
            let eval_mode = if mode == "multi" {
                EvalMode::Multi
            } else {
                EvalMode::Single
            };
            let summary = pipeline::eval_run(
                &ws,
                &agent_gw,
                &interrogator_gw,
                &bank_path,
                eval_mode,
                *rounds,
                &SamplingParams::generation(),
                &SamplingParams::generation(),
            )?;
            println!(
                "collected {} transcripts ({} skipped, {} incomplete)",
                summary.transcripts, summary.skipped, summary.incomplete
            );
            Ok(())
        }
        EvalCommand::Judge {
            role,
            judge,
            metrics,
            rubric,
            rounds,
        } => {
            let ws = open_workspace(cli, role)?;
            let backends = BackendSet::load(cli, role_name_hint(cli, role))?;
            let judge_gw = backends.gateway(Some(judge.as_str()), Some(&ws))?;
            let selected = parse_metric_selection(metrics, rubric)?;
            let summary = pipeline::eval_judge(
                &ws,
                &judge_gw,
                &selected,
                &SamplingParams::judging(),
                *rounds,
            )?;
            println!(
                "judged {} verdicts ({} unjudged)",
                summary.verdicts, summary.unjudged
            );
            Ok(())
        }
        EvalCommand::Report { role } => {
            let ws = open_workspace(cli, role)?;
            let report = pipeline::eval_report(&ws)?;
            print!("{}", roleforge::eval::render_report_table(&report));
            println!(
                "report written to {}",
                ws.eval_dir().join("report.json").display()
            );
            Ok(())
        }
    }
}
