//! Skill document model: what a human sees in the rendered view versus what a
//! model reads in the raw text.
//!
//! Two constructs decide visibility. Fenced code blocks display their content
//! literally, so comment syntax inside them is visible; HTML comments
//! anywhere else vanish in rendered views while remaining in the raw text.

mod findings;
mod parser;

pub use findings::{
    extract_hidden_regions, extract_hidden_regions_with, scan_findings, scan_findings_with, Rule,
    RuleError, RuleSpec, RuleTable,
};
pub use parser::parse_skill;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::ops::Range;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Visibility {
    Visible,
    Hidden,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    Prose,
    CodeFence,
    HtmlCommentHidden,
    HtmlCommentInCode,
}

/// How a comment segment was terminated. `Abrupt` covers the degenerate
/// `<!-->` / `<!--->` forms, which HTML treats as complete empty comments;
/// `Eof` marks an opener with no closer before end of input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum CommentClose {
    None,
    Normal,
    Abrupt,
    Eof,
}

/// One contiguous piece of a document. `span` is measured in Unicode scalar
/// values (chars); `byte_span` is the same range in bytes for cheap slicing.
/// `kind == HtmlCommentHidden` implies `visibility == Hidden`; every other
/// kind is `Visible`. Segments are produced only by [`parse_skill`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub span: Range<usize>,
    pub byte_span: Range<usize>,
    pub visibility: Visibility,
    pub kind: SegmentKind,
    pub(crate) close: CommentClose,
}

impl Segment {
    pub fn is_hidden(&self) -> bool {
        self.visibility == Visibility::Hidden
    }

    /// True for an HTML comment that never closes before end of input.
    pub fn is_unterminated_comment(&self) -> bool {
        self.close == CommentClose::Eof
    }
}

/// A parsed Skill. Segments are non-overlapping, contiguous, cover the whole
/// text, and concatenate back to `raw_text` exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkillDocument {
    pub raw_text: String,
    pub segments: Vec<Segment>,
    pub source_name: Option<String>,
}

impl SkillDocument {
    pub fn segment_text(&self, segment: &Segment) -> &str {
        &self.raw_text[segment.byte_span.clone()]
    }

    pub fn has_hidden(&self) -> bool {
        self.segments.iter().any(Segment::is_hidden)
    }

    pub fn hidden_count(&self) -> usize {
        self.segments.iter().filter(|s| s.is_hidden()).count()
    }
}

/// Finding severity, ordered weakest to strongest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Info,
    Suspicious,
    Malicious,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskFinding {
    pub rule_id: String,
    pub matched_text: String,
    pub severity: Severity,
}

/// One concealed region: the full delimiter-to-delimiter span (char offsets),
/// the content between the delimiters, and what the rule scan found in it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HiddenRegion {
    pub span: Range<usize>,
    pub inner_text: String,
    pub findings: Vec<RiskFinding>,
}

/// Concatenation of all visible segments, in order: the text a rendered view
/// presents to a human reviewer.
pub fn visible_text(doc: &SkillDocument) -> String {
    doc.segments
        .iter()
        .filter(|s| !s.is_hidden())
        .map(|s| doc.segment_text(s))
        .collect()
}

/// Remove every hidden segment and re-parse, repeating until the parse is
/// comment-free. Removing a hidden span can butt visible fragments together
/// into a brand-new comment opener, so a single pass is not sound; each pass
/// strictly shrinks the text, which guarantees termination.
pub fn sanitize(doc: &SkillDocument) -> SkillDocument {
    let mut text = visible_text(doc);
    loop {
        let next = parse_skill(&text, doc.source_name.as_deref());
        if !next.has_hidden() {
            return next;
        }
        text = visible_text(&next);
    }
}

/// Scan report over a document's hidden regions, using the default rules.
pub fn scan_report(doc: &SkillDocument) -> Value {
    scan_report_from(doc, &extract_hidden_regions(doc))
}

/// Scan report from already-extracted regions. Field names are stable:
/// `{source, hidden_region_count, regions: [{span: {start, end}, inner_text,
/// findings: [{rule_id, matched_text, severity}]}]}`; spans are char offsets.
pub fn scan_report_from(doc: &SkillDocument, regions: &[HiddenRegion]) -> Value {
    json!({
        "source": doc.source_name,
        "hidden_region_count": regions.len(),
        "regions": regions
            .iter()
            .map(|r| {
                json!({
                    "span": { "start": r.span.start, "end": r.span.end },
                    "inner_text": r.inner_text,
                    "findings": r.findings,
                })
            })
            .collect::<Vec<_>>(),
    })
}
