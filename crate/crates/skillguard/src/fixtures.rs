//! Embedded reference fixtures: a clean Skill document, the default payload's
//! rendered comment content, and the default policy as JSON. Embedding them
//! keeps the experiment matrix runnable with no filesystem setup.

use crate::skill_doc::{parse_skill, SkillDocument};

pub const CLEAN_SKILL_MD: &str = include_str!("../../../fixtures/clean_skill.md");
pub const DEFAULT_PAYLOAD_TEXT: &str = include_str!("../../../fixtures/payload.default.txt");
pub const DEFAULT_POLICY_JSON: &str = include_str!("../../../fixtures/policy.default.json");

/// The clean Skill fixture, parsed.
pub fn clean_skill() -> SkillDocument {
    parse_skill(CLEAN_SKILL_MD, Some("fixtures/clean_skill.md"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_fixture_is_clean_and_newline_terminated() {
        let doc = clean_skill();
        assert!(!doc.has_hidden());
        assert!(doc.raw_text.ends_with('\n'));
        assert!(!doc.raw_text.contains("<!--"));
    }

    #[test]
    fn clean_fixture_mentions_no_target_tool() {
        for tool in ["list_environment_variables", "read_file", "http_request"] {
            assert!(!CLEAN_SKILL_MD.contains(tool), "fixture must not mention {tool}");
        }
    }

    #[test]
    fn default_policy_json_parses() {
        let policy: crate::policy::Policy = serde_json::from_str(DEFAULT_POLICY_JSON).unwrap();
        assert_eq!(policy, crate::policy::Policy::default());
    }
}
