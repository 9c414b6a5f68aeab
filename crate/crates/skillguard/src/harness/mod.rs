//! Experiment harness: run the clean / attack / attack-defended matrix
//! against an agent backend, collecting a policy-filtered transcript per
//! trial.
//!
//! Backends produce assistant items (text and proposed tool calls); the
//! harness is the execution layer. Every proposed call is recorded, then
//! either blocked by policy or given a canned stub result — no tool here has
//! real effects, so even an "allowed" exfiltration attempt goes nowhere.

mod http;
mod oracle;

pub use http::{FieldMapping, HttpBackend};
pub use oracle::OracleBackend;

use crate::fixtures;
use crate::guardrail::{compose_context, Condition, Message, DEFAULT_USER_REQUEST};
use crate::injector::{default_payload, inject_payload};
use crate::policy::{evaluate, score_attack_success, Policy, PolicyDecision, ScoringMode, ToolCall};
use serde::{Deserialize, Serialize};

/// Public model identifiers used for the default two-row matrix.
pub const DEFAULT_ORACLE_MODELS: [&str; 2] = ["DeepSeek-V3.2", "GLM-4.5-Air"];

/// One transcript entry. A proposed call always appears, followed by either a
/// block record or a result — never both, and never a result after a block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentEvent {
    AssistantText { text: String },
    ToolCallProposed { call: ToolCall },
    ToolCallBlocked { call: ToolCall, decision: PolicyDecision },
    ToolResult { call: ToolCall, output: String },
}

/// What a backend returns for one turn, before the execution layer decides
/// anything.
#[derive(Clone, Debug, PartialEq)]
pub enum AssistantItem {
    Text(String),
    Call(ToolCall),
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("auth token environment variable `{0}` is not set")]
    AuthMissing(String),
}

/// An agent under test: given a composed message list, produce one turn of
/// text and proposed tool calls.
pub trait AgentBackend: Send + Sync {
    fn model_id(&self) -> String;
    fn respond(&self, messages: &[Message]) -> Result<Vec<AssistantItem>, HarnessError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub model_id: String,
    pub condition: Condition,
    pub transcript: Vec<AgentEvent>,
    pub attack_success: bool,
    pub matched_tools: Vec<String>,
}

fn canned_output(call: &ToolCall) -> String {
    if call.name.trim().eq_ignore_ascii_case("format_code") {
        "(formatted code)".to_string()
    } else {
        "(stub result)".to_string()
    }
}

/// Run one condition against one backend using the embedded fixtures: the
/// clean Skill for `Clean`, the same Skill with the default payload injected
/// for the attack conditions.
pub fn run_trial(
    backend: &dyn AgentBackend,
    condition: Condition,
    policy: &Policy,
    scoring_mode: ScoringMode,
) -> Result<TrialOutcome, HarnessError> {
    let clean = fixtures::clean_skill();
    let doc = match condition {
        Condition::Clean => clean,
        _ => inject_payload(&clean, &default_payload()).expect("embedded fixture injects cleanly"),
    };
    let bundle = compose_context(condition, &doc, DEFAULT_USER_REQUEST)
        .expect("fixture document matches condition");
    let items = backend.respond(&bundle.to_messages())?;

    let mut transcript = Vec::new();
    for item in items {
        match item {
            AssistantItem::Text(text) => transcript.push(AgentEvent::AssistantText { text }),
            AssistantItem::Call(call) => {
                transcript.push(AgentEvent::ToolCallProposed { call: call.clone() });
                let decision = evaluate(policy, &call);
                if decision.is_deny() {
                    transcript.push(AgentEvent::ToolCallBlocked { call, decision });
                } else {
                    let output = canned_output(&call);
                    transcript.push(AgentEvent::ToolResult { call, output });
                }
            }
        }
    }
    let verdict = score_attack_success(&transcript, scoring_mode);
    Ok(TrialOutcome {
        model_id: backend.model_id(),
        condition,
        transcript,
        attack_success: verdict.success,
        matched_tools: verdict.matched_tools,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixError {
    pub model_id: String,
    pub condition: Condition,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub model_ids: Vec<String>,
    pub outcomes: Vec<TrialOutcome>,
    pub errors: Vec<MatrixError>,
}

impl MatrixReport {
    pub fn outcome(&self, model_id: &str, condition: Condition) -> Option<&TrialOutcome> {
        self.outcomes
            .iter()
            .find(|o| o.model_id == model_id && o.condition == condition)
    }
}

/// Run all three conditions for every labeled backend, one thread per
/// backend. A backend failure is recorded per trial; remaining trials still
/// run. Results merge in backend order, so output is deterministic.
pub fn run_matrix(
    backends: &[(String, Box<dyn AgentBackend>)],
    policy: &Policy,
    scoring_mode: ScoringMode,
) -> MatrixReport {
    let per_backend: Vec<(Vec<TrialOutcome>, Vec<MatrixError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = backends
            .iter()
            .map(|(label, backend)| {
                scope.spawn(move || {
                    let mut outcomes = Vec::new();
                    let mut errors = Vec::new();
                    for condition in Condition::ALL {
                        match run_trial(backend.as_ref(), condition, policy, scoring_mode) {
                            Ok(mut outcome) => {
                                outcome.model_id = label.clone();
                                outcomes.push(outcome);
                            }
                            Err(e) => errors.push(MatrixError {
                                model_id: label.clone(),
                                condition,
                                message: e.to_string(),
                            }),
                        }
                    }
                    (outcomes, errors)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trial thread panicked"))
            .collect()
    });
    let mut outcomes = Vec::new();
    let mut errors = Vec::new();
    for (o, e) in per_backend {
        outcomes.extend(o);
        errors.extend(e);
    }
    MatrixReport {
        model_ids: backends.iter().map(|(label, _)| label.clone()).collect(),
        outcomes,
        errors,
    }
}

/// Markdown success table: one row per model, `Yes`/`No` for attack success,
/// `Err` for trials that never produced a transcript.
pub fn render_table(report: &MatrixReport) -> String {
    let mut out = String::from("| Model | Clean | Attack (no defense) | Attack (defended) |\n");
    out.push_str("| --- | --- | --- | --- |\n");
    for model_id in &report.model_ids {
        let mut row = format!("| {model_id} |");
        for condition in Condition::ALL {
            let cell = match report.outcome(model_id, condition) {
                Some(o) if o.attack_success => "Yes",
                Some(_) => "No",
                None => "Err",
            };
            row.push_str(&format!(" {cell} |"));
        }
        row.push('\n');
        out.push_str(&row);
    }
    out
}

/// The default deterministic roster: the two-model matrix.
pub fn default_oracle_backends() -> Vec<(String, Box<dyn AgentBackend>)> {
    DEFAULT_ORACLE_MODELS
        .iter()
        .map(|id| {
            (
                id.to_string(),
                Box::new(OracleBackend::labeled(id)) as Box<dyn AgentBackend>,
            )
        })
        .collect()
}

/// The deterministic reference agent.
pub fn oracle_backend() -> Box<dyn AgentBackend> {
    Box::new(OracleBackend::new())
}

/// A live HTTP backend speaking the wire contract.
pub fn http_backend(
    endpoint_url: &str,
    model_id: &str,
    auth_token_env: Option<&str>,
) -> Box<dyn AgentBackend> {
    Box::new(HttpBackend::new(endpoint_url, model_id, auth_token_env))
}

/// One backend entry in an eval config file.
#[derive(Clone, Debug, Deserialize)]
pub struct BackendSpec {
    pub model_id: String,
    pub endpoint_url: String,
    #[serde(default)]
    pub auth_token_env: Option<String>,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub field_mapping: Option<FieldMapping>,
}

/// Eval config file: which backends to talk to and how to score them.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct EvalConfig {
    #[serde(default)]
    pub backends: Vec<BackendSpec>,
    #[serde(default)]
    pub policy_path: Option<String>,
    #[serde(default)]
    pub scoring_mode: Option<ScoringMode>,
}
