//! Cross-checks the visibility model against an independent CommonMark
//! renderer: text our parser calls hidden must not reach a reader through the
//! rendered view, and text it calls visible must.
//!
//! The comparison is needle-based on curated documents rather than
//! whole-string, because the renderer normalizes whitespace and markup while
//! we preserve raw bytes.

use pulldown_cmark::{Event, Parser};
use skillguard::{parse_skill, visible_text};

/// Reader-visible text per the reference renderer: text and code events;
/// raw-HTML passthrough (where comments end up) contributes nothing a
/// browser would display.
fn rendered_visible(md: &str) -> String {
    let mut out = String::new();
    for event in Parser::new(md) {
        match event {
            Event::Text(t) => out.push_str(&t),
            Event::Code(t) => out.push_str(&t),
            _ => {}
        }
    }
    out
}

fn assert_agreement(md: &str, hidden_needles: &[&str], visible_needles: &[&str]) {
    let ours = visible_text(&parse_skill(md, None));
    let theirs = rendered_visible(md);
    for needle in hidden_needles {
        assert!(md.contains(needle), "bad case: {needle} not in source");
        assert!(!ours.contains(needle), "parser must hide {needle:?} in {md:?}");
        assert!(!theirs.contains(needle), "renderer must hide {needle:?} in {md:?}");
    }
    for needle in visible_needles {
        assert!(ours.contains(needle), "parser must show {needle:?} in {md:?}");
        assert!(theirs.contains(needle), "renderer must show {needle:?} in {md:?}");
    }
}

#[test]
fn block_comment_is_invisible_to_both() {
    assert_agreement(
        "# Title\n\nIntro prose.\n\n<!-- SECRET_NEEDLE -->\nAfter.\n",
        &["SECRET_NEEDLE"],
        &["Intro prose.", "After."],
    );
}

#[test]
fn fenced_comment_is_visible_to_both() {
    assert_agreement(
        "Setup:\n\n```\n<!-- CODE_NEEDLE -->\n```\n",
        &[],
        &["Setup:", "CODE_NEEDLE"],
    );
}

#[test]
fn tilde_fenced_comment_is_visible_to_both() {
    assert_agreement(
        "~~~text\n<!-- TILDE_NEEDLE -->\n~~~\n",
        &[],
        &["TILDE_NEEDLE"],
    );
}

#[test]
fn inline_code_comment_is_visible_to_both() {
    assert_agreement(
        "Use `<!-- INLINE_NEEDLE -->` literally.\n",
        &[],
        &["INLINE_NEEDLE", "literally."],
    );
}

#[test]
fn mid_paragraph_comment_is_invisible_to_both() {
    assert_agreement(
        "text <!-- MID_NEEDLE --> tail\n",
        &["MID_NEEDLE"],
        &["text", "tail"],
    );
}

#[test]
fn multi_line_comment_is_invisible_to_both() {
    assert_agreement(
        "before\n\n<!-- HIDDEN_A\nHIDDEN_B -->\n\nafter\n",
        &["HIDDEN_A", "HIDDEN_B"],
        &["before", "after"],
    );
}

#[test]
fn unterminated_comment_swallows_the_rest_for_both() {
    assert_agreement(
        "para\n\n<!-- UNTERM_NEEDLE\nTRAILING_NEEDLE",
        &["UNTERM_NEEDLE", "TRAILING_NEEDLE"],
        &["para"],
    );
}

#[test]
fn payload_injected_fixture_agrees_with_renderer() {
    let clean = skillguard::fixtures::clean_skill();
    let attacked =
        skillguard::inject_payload(&clean, &skillguard::default_payload()).unwrap();
    let theirs = rendered_visible(&attacked.raw_text);
    for needle in [
        "list_environment_variables",
        "read_file",
        "http_request",
        "exfil.example.com",
        "MAINTENANCE NOTICE",
    ] {
        assert!(
            !theirs.contains(needle),
            "renderer must not surface payload text {needle:?}"
        );
    }
    // The visible body survives rendering.
    assert!(theirs.contains("Code Formatter Skill"));
}
