//! `skillguard` — scan, sanitize, inject, policy-check, and run-eval for
//! Markdown Skill documents.
//!
//! Exit codes are uniform across subcommands:
//!   0  success (clean scan, allowed call, defended/clean trial, matrix done)
//!   1  the checked thing failed the check (findings at threshold, denied
//!      call, attack succeeded in a single-condition trial)
//!   2  usage error (bad flags, malformed input documents or JSON)
//!   3  environment error (unreadable/unwritable files, backend failures)

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use serde_json::Value;
use skillguard::guardrail::Condition;
use skillguard::harness::{self, AgentBackend, EvalConfig, HttpBackend, MatrixReport};
use skillguard::injector::{default_payload, inject_payload, payload_from_json};
use skillguard::policy::{
    audit_line, evaluate, load_policy_config, Policy, PolicyDecision, ScoringMode, ToolCall,
    Verdict,
};
use skillguard::skill_doc::{
    extract_hidden_regions_with, parse_skill, sanitize, scan_report_from, RuleTable, Severity,
    SkillDocument,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "skillguard",
    version,
    about = "Detect, strip, and contain hidden-comment prompt injections in Markdown Skills"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a Skill document for hidden regions and risk findings
    Scan(ScanArgs),
    /// Strip hidden regions from a Skill document
    Sanitize(SanitizeArgs),
    /// Inject a payload into a clean Skill document
    Inject(InjectArgs),
    /// Evaluate one tool call against a policy file
    PolicyCheck(PolicyCheckArgs),
    /// Run the clean / attack / attack-defended experiment matrix
    RunEval(RunEvalArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FailOn {
    Suspicious,
    Malicious,
}

impl FailOn {
    fn threshold(self) -> Severity {
        match self {
            FailOn::Suspicious => Severity::Suspicious,
            FailOn::Malicious => Severity::Malicious,
        }
    }
}

#[derive(clap::Args)]
struct ScanArgs {
    /// Markdown Skill document to scan
    path: PathBuf,
    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Exit 1 when any finding reaches this severity
    #[arg(long, value_enum, default_value_t = FailOn::Suspicious)]
    fail_on: FailOn,
    /// Policy file; its scan_rules replace the built-in rule table
    #[arg(long)]
    policy: Option<PathBuf>,
}

#[derive(clap::Args)]
#[command(group = ArgGroup::new("dest").required(true))]
struct SanitizeArgs {
    /// Markdown Skill document to sanitize
    path: PathBuf,
    /// Write the sanitized document here
    #[arg(long, group = "dest")]
    output: Option<PathBuf>,
    /// Overwrite the input file
    #[arg(long, group = "dest")]
    in_place: bool,
    /// Also write a JSON scan report of what was removed
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(clap::Args)]
struct InjectArgs {
    /// Clean Markdown Skill document
    clean_path: PathBuf,
    /// `default` or a path to a payload JSON file
    #[arg(long, default_value = "default")]
    payload: String,
    /// Write the compromised document here (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct PolicyCheckArgs {
    /// Policy file (JSON)
    policy_path: PathBuf,
    /// Tool call: inline JSON if it starts with '{', else a path to JSON
    toolcall: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Oracle,
    Http,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScoringArg {
    ToolCallsOnly,
    StrictMentions,
}

impl ScoringArg {
    fn mode(self) -> ScoringMode {
        match self {
            ScoringArg::ToolCallsOnly => ScoringMode::ToolCallsOnly,
            ScoringArg::StrictMentions => ScoringMode::StrictMentions,
        }
    }
}

#[derive(clap::Args)]
struct RunEvalArgs {
    /// Agent backend
    #[arg(long, value_enum, default_value_t = BackendKind::Oracle)]
    backend: BackendKind,
    /// Eval config file (JSON); required for --backend http
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scoring mode (overrides the config file)
    #[arg(long, value_enum)]
    scoring: Option<ScoringArg>,
    /// Directory for results.json, results.md, and audit.jsonl
    #[arg(long, default_value = "eval-out")]
    output_dir: PathBuf,
    /// Run one condition only (clean, attack_no_defense, attack_defended)
    /// against the first backend; exits 1 if the attack succeeds
    #[arg(long)]
    condition: Option<String>,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Scan(args) => cmd_scan(args),
        Command::Sanitize(args) => cmd_sanitize(args),
        Command::Inject(args) => cmd_inject(args),
        Command::PolicyCheck(args) => cmd_policy_check(args),
        Command::RunEval(args) => cmd_run_eval(args),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn parse_doc(path: &Path) -> Result<SkillDocument, CliError> {
    let raw = read_file(path)?;
    Ok(parse_skill(&raw, Some(&path.display().to_string())))
}

/// Serialize with sorted keys, for byte-stable output.
fn to_sorted_pretty(value: &impl serde::Serialize) -> String {
    let value = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string_pretty(&value).expect("serializable value")
}

/// Rule table from a policy file's scan_rules, or the default table.
fn rule_table(policy_path: Option<&Path>) -> Result<RuleTable, CliError> {
    let Some(path) = policy_path else {
        return Ok(RuleTable::default());
    };
    let json = read_file(path)?;
    let config = load_policy_config(&json)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    match config.scan_rules {
        Some(specs) => RuleTable::from_specs(&specs)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display()))),
        None => Ok(RuleTable::default()),
    }
}

fn cmd_scan(args: ScanArgs) -> Result<u8, CliError> {
    let doc = parse_doc(&args.path)?;
    let table = rule_table(args.policy.as_deref())?;
    let regions = extract_hidden_regions_with(&table, &doc);
    let report = scan_report_from(&doc, &regions);
    match args.format {
        Format::Json => println!("{}", to_sorted_pretty(&report)),
        Format::Text => {
            println!("source: {}", args.path.display());
            println!("hidden regions: {}", regions.len());
            for region in &regions {
                println!(
                    "region [{}..{}): {} finding(s)",
                    region.span.start,
                    region.span.end,
                    region.findings.len()
                );
                for f in &region.findings {
                    println!("  {:?} {}: {:?}", f.severity, f.rule_id, f.matched_text);
                }
            }
        }
    }
    let threshold = args.fail_on.threshold();
    let tripped = regions
        .iter()
        .flat_map(|r| &r.findings)
        .any(|f| f.severity >= threshold);
    Ok(if tripped { 1 } else { 0 })
}

fn cmd_sanitize(args: SanitizeArgs) -> Result<u8, CliError> {
    let doc = parse_doc(&args.path)?;
    let removed = doc.hidden_count();
    if let Some(report_path) = &args.report {
        let regions = extract_hidden_regions_with(&RuleTable::default(), &doc);
        write_file(report_path, &to_sorted_pretty(&scan_report_from(&doc, &regions)))?;
    }
    let clean = sanitize(&doc);
    let dest = if args.in_place {
        args.path.clone()
    } else {
        args.output.clone().expect("clap enforces the dest group")
    };
    write_file(&dest, &clean.raw_text)?;
    println!("removed {removed} hidden region(s); wrote {}", dest.display());
    Ok(0)
}

fn cmd_inject(args: InjectArgs) -> Result<u8, CliError> {
    let doc = parse_doc(&args.clean_path)?;
    let payload = if args.payload == "default" {
        default_payload()
    } else {
        let json = read_file(Path::new(&args.payload))?;
        payload_from_json(&json)
            .map_err(|e| CliError::usage(format!("{}: {e}", args.payload)))?
    };
    let attacked = inject_payload(&doc, &payload)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.clean_path.display())))?;
    match &args.output {
        Some(path) => {
            write_file(path, &attacked.raw_text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", attacked.raw_text),
    }
    Ok(0)
}

fn cmd_policy_check(args: PolicyCheckArgs) -> Result<u8, CliError> {
    let policy_json = read_file(&args.policy_path)?;
    let config = load_policy_config(&policy_json)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.policy_path.display())))?;
    let call_json = if args.toolcall.trim_start().starts_with('{') {
        args.toolcall.clone()
    } else {
        read_file(Path::new(&args.toolcall))?
    };
    let call: ToolCall = serde_json::from_str(&call_json)
        .map_err(|e| CliError::usage(format!("invalid tool call JSON: {e}")))?;
    let decision = evaluate(&config.policy, &call);
    println!("{}", to_sorted_pretty(&decision));
    Ok(if decision.is_deny() { 1 } else { 0 })
}

fn load_eval_config(path: Option<&Path>) -> Result<EvalConfig, CliError> {
    let Some(path) = path else {
        return Ok(EvalConfig::default());
    };
    let json = read_file(path)?;
    serde_json::from_str(&json).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

type LabeledBackends = Vec<(String, Box<dyn AgentBackend>)>;

fn build_backends(kind: BackendKind, config: &EvalConfig) -> Result<LabeledBackends, CliError> {
    match kind {
        BackendKind::Oracle => Ok(harness::default_oracle_backends()),
        BackendKind::Http => {
            if config.backends.is_empty() {
                return Err(CliError::usage(
                    "--backend http requires --config with at least one backend entry",
                ));
            }
            Ok(config
                .backends
                .iter()
                .map(|spec| {
                    (
                        spec.model_id.clone(),
                        Box::new(HttpBackend::from_spec(spec)) as Box<dyn AgentBackend>,
                    )
                })
                .collect())
        }
    }
}

fn cmd_run_eval(args: RunEvalArgs) -> Result<u8, CliError> {
    if args.backend == BackendKind::Http && args.config.is_none() {
        return Err(CliError::usage("--backend http requires --config"));
    }
    let config = load_eval_config(args.config.as_deref())?;
    let scoring = args
        .scoring
        .map(ScoringArg::mode)
        .or(config.scoring_mode)
        .unwrap_or(ScoringMode::ToolCallsOnly);
    let policy = match &config.policy_path {
        Some(path) => {
            let json = read_file(Path::new(path))?;
            load_policy_config(&json)
                .map_err(|e| CliError::usage(format!("{path}: {e}")))?
                .policy
        }
        None => Policy::default(),
    };
    let backends = build_backends(args.backend, &config)?;

    if let Some(condition) = &args.condition {
        let condition: Condition = condition
            .parse()
            .map_err(|e: String| CliError::usage(e))?;
        let (label, backend) = &backends[0];
        let mut outcome = harness::run_trial(backend.as_ref(), condition, &policy, scoring)
            .map_err(|e| CliError::io(format!("{label}: {e}")))?;
        outcome.model_id = label.clone();
        println!("{}", to_sorted_pretty(&outcome));
        return Ok(if outcome.attack_success { 1 } else { 0 });
    }

    let report = harness::run_matrix(&backends, &policy, scoring);
    write_eval_outputs(&args.output_dir, &report, scoring)?;
    print!("{}", harness::render_table(&report));
    for err in &report.errors {
        eprintln!("error: {} [{}]: {}", err.model_id, err.condition, err.message);
    }
    println!("results written to {}", args.output_dir.display());
    Ok(if report.errors.is_empty() { 0 } else { 3 })
}

fn write_eval_outputs(
    dir: &Path,
    report: &MatrixReport,
    scoring: ScoringMode,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    write_file(&dir.join("results.json"), &to_sorted_pretty(report))?;

    let scoring_name = match scoring {
        ScoringMode::ToolCallsOnly => "tool-calls-only",
        ScoringMode::StrictMentions => "strict-mentions",
    };
    let mut md = String::from("# Skill injection evaluation\n\n");
    md.push_str(&harness::render_table(report));
    md.push_str(&format!("\nScoring mode: {scoring_name}\n"));
    if !report.errors.is_empty() {
        md.push_str("\n## Backend errors\n\n");
        for err in &report.errors {
            md.push_str(&format!(
                "- {} [{}]: {}\n",
                err.model_id, err.condition, err.message
            ));
        }
    }
    write_file(&dir.join("results.md"), &md)?;

    let ts = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    let mut audit = String::new();
    for outcome in &report.outcomes {
        for event in &outcome.transcript {
            let line: Option<Value> = match event {
                skillguard::AgentEvent::ToolCallBlocked { call, decision } => {
                    Some(audit_line(&ts, &call.name, decision))
                }
                skillguard::AgentEvent::ToolResult { call, .. } => Some(audit_line(
                    &ts,
                    &call.name,
                    &PolicyDecision {
                        verdict: Verdict::Allow,
                        rule_id: None,
                        reason: "no deny rule matched".to_string(),
                    },
                )),
                _ => None,
            };
            if let Some(line) = line {
                audit.push_str(&serde_json::to_string(&line).expect("audit line"));
                audit.push('\n');
            }
        }
    }
    write_file(&dir.join("audit.jsonl"), &audit)
}
