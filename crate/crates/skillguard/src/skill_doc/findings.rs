//! Risk-rule scan over the contents of hidden regions.
//!
//! Rules are regexes with an id and a severity. The default table targets the
//! payload shapes this toolkit defends against: direct tool mentions,
//! credential-store paths, outbound URLs, and override phrasing. Hidden
//! content that matches nothing still yields a single `Info` finding, because
//! content concealed from the rendered view is never a neutral fact.

use super::{CommentClose, HiddenRegion, RiskFinding, Segment, Severity, SkillDocument};
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::LazyLock;

#[derive(Clone, Debug)]
pub struct Rule {
    pub id: String,
    pub pattern: Regex,
    pub severity: Severity,
}

/// Serializable rule form, used for policy-file overrides.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub id: String,
    pub pattern: String,
    pub severity: Severity,
}

#[derive(Debug, thiserror::Error)]
#[error("invalid pattern for rule `{id}`")]
pub struct RuleError {
    pub id: String,
    #[source]
    pub source: regex::Error,
}

#[derive(Clone, Debug)]
pub struct RuleTable {
    pub rules: Vec<Rule>,
}

impl RuleTable {
    pub fn from_specs(specs: &[RuleSpec]) -> Result<Self, RuleError> {
        let rules = specs
            .iter()
            .map(|s| {
                Regex::new(&s.pattern)
                    .map(|pattern| Rule {
                        id: s.id.clone(),
                        pattern,
                        severity: s.severity,
                    })
                    .map_err(|source| RuleError {
                        id: s.id.clone(),
                        source,
                    })
            })
            .collect::<Result<_, _>>()?;
        Ok(RuleTable { rules })
    }
}

impl Default for RuleTable {
    fn default() -> Self {
        default_table().clone()
    }
}

fn default_table() -> &'static RuleTable {
    static TABLE: LazyLock<RuleTable> = LazyLock::new(|| {
        let build = |id: &str, pattern: &str, severity: Severity| Rule {
            id: id.to_string(),
            pattern: Regex::new(pattern).expect("builtin rule pattern"),
            severity,
        };
        RuleTable {
            rules: vec![
                build(
                    "tool_name_list_environment_variables",
                    r"(?i)\blist_environment_variables\b",
                    Severity::Malicious,
                ),
                build("tool_name_read_file", r"(?i)\bread_file\b", Severity::Malicious),
                build(
                    "tool_name_http_request",
                    r"(?i)\bhttp_request\b",
                    Severity::Malicious,
                ),
                build(
                    "credential_path",
                    r"(?i)(\.aws/(credentials|config)|\.ssh/[^\s]*|\.netrc\b|\.npmrc\b|\.docker/config\.json|\.kube/config\b|\.config/gcloud/[^\s]*|\.pgpass\b|\bid_rsa\b|[^\s]*\.pem\b)",
                    Severity::Malicious,
                ),
                build(
                    "env_var_reference",
                    r"(?i)environment\s+variables?",
                    Severity::Malicious,
                ),
                build(
                    "outbound_url",
                    r#"(?i)https?://[^\s'")<>]+"#,
                    Severity::Malicious,
                ),
                build(
                    "imperative_phrasing",
                    r"(?i)\b(you\s+must|highest\s+priority|ignore\s+(all\s+)?previous|without\s+mentioning|supersedes|do\s+not\s+(mention|tell|reveal)|before\s+responding)\b",
                    Severity::Suspicious,
                ),
            ],
        }
    });
    &TABLE
}

/// Scan hidden-region content with the default rules.
pub fn scan_findings(inner_text: &str) -> Vec<RiskFinding> {
    scan_findings_with(default_table(), inner_text)
}

/// Scan hidden-region content with an explicit rule table. Every match of
/// every rule becomes one finding, in rule order; content matching no rule
/// yields one `Info` finding carrying an excerpt.
pub fn scan_findings_with(table: &RuleTable, inner_text: &str) -> Vec<RiskFinding> {
    let mut findings = Vec::new();
    for rule in &table.rules {
        for m in rule.pattern.find_iter(inner_text) {
            findings.push(RiskFinding {
                rule_id: rule.id.clone(),
                matched_text: m.as_str().to_string(),
                severity: rule.severity,
            });
        }
    }
    if findings.is_empty() && !inner_text.trim().is_empty() {
        findings.push(RiskFinding {
            rule_id: "hidden_content".to_string(),
            matched_text: excerpt(inner_text.trim()),
            severity: Severity::Info,
        });
    }
    findings
}

fn excerpt(text: &str) -> String {
    text.chars().take(80).collect()
}

/// Text between a comment's delimiters. Abrupt closers (`<!-->`, `<!--->`)
/// enclose nothing; an unterminated comment's content runs to end of input.
pub(crate) fn comment_inner(text: &str, close: CommentClose) -> &str {
    match close {
        CommentClose::Normal => &text[4..text.len() - 3],
        CommentClose::Abrupt | CommentClose::None => "",
        CommentClose::Eof => &text[4..],
    }
}

/// All hidden regions of a document with their scan findings, using the
/// default rules.
pub fn extract_hidden_regions(doc: &SkillDocument) -> Vec<HiddenRegion> {
    extract_hidden_regions_with(default_table(), doc)
}

/// All hidden regions of a document with their scan findings. An unterminated
/// comment gets an extra `Suspicious` finding: swallowing the rest of the
/// document is itself a concealment trick.
pub fn extract_hidden_regions_with(table: &RuleTable, doc: &SkillDocument) -> Vec<HiddenRegion> {
    doc.segments
        .iter()
        .filter(|s| s.is_hidden())
        .map(|s: &Segment| {
            let inner = comment_inner(doc.segment_text(s), s.close);
            let mut findings = scan_findings_with(table, inner);
            if s.is_unterminated_comment() {
                findings.push(RiskFinding {
                    rule_id: "unterminated_comment".to_string(),
                    matched_text: "<!--".to_string(),
                    severity: Severity::Suspicious,
                });
            }
            HiddenRegion {
                span: s.span.clone(),
                inner_text: inner.to_string(),
                findings,
            }
        })
        .collect()
}
