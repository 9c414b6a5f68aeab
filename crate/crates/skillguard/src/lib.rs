//! Security toolkit for Markdown Skill documents.
//!
//! Skills are Markdown files that get ingested verbatim into a model context,
//! so text that is invisible in a rendered view — HTML comments, above all —
//! still reaches the model. This crate closes that gap end to end:
//!
//! - [`skill_doc`] parses a Skill into visible/hidden segments, scans hidden
//!   regions against a rule table, and strips them.
//! - [`injector`] builds attack fixtures by appending a hidden payload
//!   comment to a clean Skill.
//! - [`guardrail`] assembles the model context for each experiment condition,
//!   including the prompt-level defense.
//! - [`policy`] is the execution-layer firewall for tool calls, plus the
//!   attack-success scorer.
//! - [`harness`] runs the condition matrix against a deterministic oracle
//!   agent or a live chat-completion endpoint and renders the results.
//!
//! All core operations are pure functions over immutable values and are safe
//! to call concurrently.

pub mod fixtures;
pub mod guardrail;
pub mod harness;
pub mod injector;
pub mod policy;
pub mod skill_doc;

pub use guardrail::{
    compose_context, default_defense_prompt, Condition, ContextBundle, GuardrailError, Message,
};
pub use harness::{
    http_backend, oracle_backend, run_matrix, run_trial, AgentBackend, AgentEvent, HarnessError,
    MatrixReport, TrialOutcome,
};
pub use injector::{default_payload, inject_payload, Directive, InjectError, Intent, Payload};
pub use policy::{
    evaluate, score_attack_success, AttackVerdict, Policy, PolicyDecision, ScoringMode, ToolCall,
    Verdict,
};
pub use skill_doc::{
    extract_hidden_regions, parse_skill, sanitize, scan_findings, visible_text, HiddenRegion,
    RiskFinding, Severity, SkillDocument,
};
