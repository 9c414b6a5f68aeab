//! Property tests over generated documents.
//!
//! Two corpora: a structured one assembled from prose / comment / fence /
//! inline-code atoms, where the expected hidden-region count is known by
//! construction, and an adversarial one drawn from the delimiter alphabet,
//! where only the unconditional invariants are checked.

use proptest::prelude::*;
use skillguard::skill_doc::SegmentKind;
use skillguard::{
    default_payload, inject_payload, parse_skill, sanitize, visible_text, Directive, Payload,
    SkillDocument,
};

#[derive(Clone, Debug)]
enum Atom {
    Prose(String),
    Comment(String),
    Inline(String),
    Fence {
        marker: &'static str,
        info: String,
        body: String,
    },
}

#[derive(Clone, Debug)]
enum Tail {
    UntermComment(String),
    UnclosedFence(&'static str, String),
}

// Prose never contains '<', '`', or '~', so every hidden region comes from an
// explicit Comment atom.
fn prose() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[a-zA-Z0-9 .,:;()#*_é\n-]{1,60}").unwrap()
}

// No '>' in comment interiors, so `-->` cannot appear before the closer.
fn comment_inner() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[a-zA-Z0-9 .,_<!é\n-]{0,40}").unwrap()
}

// Inline code stays on one line and may carry a comment opener; the closing
// backtick must mask it.
fn inline_code() -> impl Strategy<Value = String> {
    prop_oneof![
        proptest::string::string_regex("[a-zA-Z0-9 .,=+-]{1,20}").unwrap(),
        proptest::string::string_regex("[a-z ]{0,6}<!-- [a-z ]{0,10} -->[a-z ]{0,6}").unwrap(),
    ]
}

// Bodies exclude '`' and '~', so they can never close their fence early; '<',
// '!', '>' are allowed so comment syntax lands inside code.
fn fence_body() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[a-zA-Z0-9 .,<!>\n-]{0,60}").unwrap()
}

fn marker() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("```"), Just("````"), Just("~~~"), Just("~~~~")]
}

fn atom() -> impl Strategy<Value = Atom> {
    prop_oneof![
        4 => prose().prop_map(Atom::Prose),
        2 => comment_inner().prop_map(Atom::Comment),
        2 => inline_code().prop_map(Atom::Inline),
        1 => (marker(), proptest::string::string_regex("[a-z]{0,6}").unwrap(), fence_body())
            .prop_map(|(marker, info, body)| Atom::Fence { marker, info, body }),
    ]
}

fn tail() -> impl Strategy<Value = Option<Tail>> {
    prop_oneof![
        3 => Just(None),
        1 => comment_inner().prop_map(|s| Some(Tail::UntermComment(s))),
        1 => (marker(), fence_body()).prop_map(|(m, b)| Some(Tail::UnclosedFence(m, b))),
    ]
}

/// Render atoms to raw text, returning the hidden-region count the parser
/// must report.
fn render(atoms: &[Atom], tail: &Option<Tail>) -> (String, usize) {
    let mut out = String::new();
    let mut hidden = 0usize;
    let push_line_start = |out: &mut String| {
        if !out.is_empty() && !out.ends_with('\n') {
            out.push('\n');
        }
    };
    for atom in atoms {
        match atom {
            Atom::Prose(s) => out.push_str(s),
            Atom::Comment(inner) => {
                out.push_str("<!--");
                out.push_str(inner);
                out.push_str("-->");
                hidden += 1;
            }
            Atom::Inline(s) => {
                out.push('`');
                out.push_str(s);
                out.push('`');
            }
            Atom::Fence { marker, info, body } => {
                push_line_start(&mut out);
                out.push_str(marker);
                out.push_str(info);
                out.push('\n');
                out.push_str(body);
                if !body.is_empty() && !body.ends_with('\n') {
                    out.push('\n');
                }
                out.push_str(marker);
                out.push('\n');
            }
        }
    }
    match tail {
        Some(Tail::UntermComment(inner)) => {
            out.push_str("<!--");
            out.push_str(inner);
            hidden += 1;
        }
        Some(Tail::UnclosedFence(marker, body)) => {
            push_line_start(&mut out);
            out.push_str(marker);
            out.push('\n');
            out.push_str(body);
        }
        None => {}
    }
    (out, hidden)
}

fn assert_partition(doc: &SkillDocument) {
    let mut cpos = 0usize;
    let mut bpos = 0usize;
    for s in &doc.segments {
        assert_eq!(s.span.start, cpos, "char spans must be contiguous");
        assert_eq!(s.byte_span.start, bpos, "byte spans must be contiguous");
        assert!(s.span.end > s.span.start, "segments must be non-empty");
        cpos = s.span.end;
        bpos = s.byte_span.end;
    }
    assert_eq!(cpos, doc.raw_text.chars().count());
    assert_eq!(bpos, doc.raw_text.len());
    let rebuilt: String = doc.segments.iter().map(|s| doc.segment_text(s)).collect();
    assert_eq!(rebuilt, doc.raw_text);
}

fn payload_strategy() -> impl Strategy<Value = Payload> {
    let directive = prop_oneof![
        Just(Directive::enumerate_env()),
        proptest::string::string_regex("[a-zA-Z0-9/_.~-]{1,24}")
            .unwrap()
            .prop_map(|p| Directive::read_credential_file(&p)),
        (
            proptest::string::string_regex("[A-Z]{3,6}").unwrap(),
            proptest::string::string_regex("[a-z0-9.-]{1,12}").unwrap(),
            proptest::string::string_regex("[a-z0-9/]{0,12}").unwrap(),
        )
            .prop_map(|(m, h, p)| Directive::exfiltrate_http_post(&m, &format!("https://{h}/{p}"))),
    ];
    (
        proptest::string::string_regex("[ -~]{0,80}").unwrap(),
        proptest::collection::vec(directive, 1..5),
    )
        .prop_map(|(preamble, directives)| Payload {
            preamble,
            directives,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn structured_documents_uphold_invariants(
        atoms in proptest::collection::vec(atom(), 0..12),
        tail in tail(),
    ) {
        let (raw, expected_hidden) = render(&atoms, &tail);
        let doc = parse_skill(&raw, None);
        assert_partition(&doc);
        for s in &doc.segments {
            prop_assert_eq!(s.is_hidden(), s.kind == SegmentKind::HtmlCommentHidden);
        }
        prop_assert_eq!(doc.hidden_count(), expected_hidden);

        let clean = sanitize(&doc);
        prop_assert!(!clean.has_hidden());
        // On this corpus stripping never recombines new syntax, so one pass
        // reaches the fixpoint and visible text is preserved exactly.
        prop_assert_eq!(&clean.raw_text, &visible_text(&doc));
        prop_assert_eq!(&sanitize(&clean).raw_text, &clean.raw_text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn adversarial_inputs_never_break_invariants(
        raw in proptest::collection::vec(
            prop_oneof![
                Just('<'), Just('!'), Just('-'), Just('>'), Just('`'),
                Just('~'), Just('\n'), Just(' '), Just('a'), Just('é'),
            ],
            0..200,
        ).prop_map(|v| v.into_iter().collect::<String>()),
    ) {
        let doc = parse_skill(&raw, None);
        assert_partition(&doc);
        for s in &doc.segments {
            prop_assert_eq!(s.is_hidden(), s.kind == SegmentKind::HtmlCommentHidden);
        }
        let clean = sanitize(&doc);
        prop_assert!(!clean.has_hidden());
        prop_assert_eq!(&sanitize(&clean).raw_text, &clean.raw_text);
        // Sanitizing a clean document is the identity.
        prop_assert_eq!(&clean.raw_text, &visible_text(&clean));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn inject_then_sanitize_round_trips(
        atoms in proptest::collection::vec(
            prop_oneof![
                4 => prose().prop_map(Atom::Prose),
                2 => inline_code().prop_map(Atom::Inline),
                1 => (marker(), proptest::string::string_regex("[a-z]{0,6}").unwrap(), fence_body())
                    .prop_map(|(marker, info, body)| Atom::Fence { marker, info, body }),
            ],
            0..10,
        ),
        payload in payload_strategy(),
    ) {
        let (mut raw, _) = render(&atoms, &None);
        if !raw.is_empty() && !raw.ends_with('\n') {
            raw.push('\n');
        }
        let clean = parse_skill(&raw, None);
        prop_assert!(!clean.has_hidden());

        let attacked = inject_payload(&clean, &payload).unwrap();
        prop_assert_eq!(attacked.hidden_count(), 1);
        prop_assert_eq!(&visible_text(&attacked), &clean.raw_text);
        prop_assert_eq!(&sanitize(&attacked).raw_text, &clean.raw_text);
    }
}

#[test]
fn default_payload_round_trips_on_fixture() {
    let clean = skillguard::fixtures::clean_skill();
    let attacked = inject_payload(&clean, &default_payload()).unwrap();
    assert_eq!(sanitize(&attacked).raw_text, clean.raw_text);
}
