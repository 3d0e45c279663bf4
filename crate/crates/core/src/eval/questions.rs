//! Question-bank loading and validation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use super::{EvalQuestion, QuestionKind};
use crate::error::{Error, Result};

/// The declared category list; banks using anything else are rejected.
pub const CATEGORIES: [&str; 28] = [
    "childhood",
    "family",
    "education",
    "mentors",
    "hobbies",
    "career",
    "achievements",
    "challenges",
    "relationships",
    "values",
    "beliefs",
    "daily_life",
    "habits",
    "preferences",
    "emotions",
    "fears",
    "aspirations",
    "travel",
    "health",
    "finance",
    "friendship",
    "rivalry",
    "creativity",
    "philosophy",
    "era_events",
    "skills",
    "reflection",
    "legacy",
];

/// A validated bank with per-kind counts for comparison against the
/// evaluation-data targets.
#[derive(Debug, Clone)]
pub struct QuestionBank {
    pub questions: Vec<EvalQuestion>,
    pub counts_by_kind: BTreeMap<String, usize>,
}

impl QuestionBank {
    pub fn count(&self, kind: QuestionKind) -> usize {
        let key = match kind {
            QuestionKind::Common => "common",
            QuestionKind::RoleSpecific => "role_specific",
            QuestionKind::Hallucination => "hallucination",
        };
        self.counts_by_kind.get(key).copied().unwrap_or(0)
    }

    /// Questions relevant to one role: all common/hallucination questions
    /// plus that role's specific ones.
    pub fn for_role(&self, role_id: &str) -> Vec<&EvalQuestion> {
        self.questions
            .iter()
            .filter(|q| match q.kind {
                QuestionKind::RoleSpecific => q.role_id.as_deref() == Some(role_id),
                _ => true,
            })
            .collect()
    }
}

/// Load a line-delimited JSON question bank.
///
/// Rejected: malformed rows (with line numbers), unknown categories,
/// duplicate question ids, role-specific questions missing a role id, and
/// role-specific questions whose text duplicates a common question.
pub fn load_question_bank(path: &Path) -> Result<QuestionBank> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let allowed: HashSet<&str> = CATEGORIES.into_iter().collect();
    let mut questions = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut common_texts: HashMap<String, String> = HashMap::new();

    for (i, line) in raw.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let question: EvalQuestion = serde_json::from_str(line)
            .map_err(|e| Error::parse(format!("question bank line {lineno}: {e}")))?;
        question
            .validate()
            .map_err(|e| Error::validation(format!("question bank line {lineno}: {e}")))?;
        if !allowed.contains(question.category.as_str()) {
            return Err(Error::validation(format!(
                "question bank line {lineno}: unknown category {:?}",
                question.category
            )));
        }
        if !seen_ids.insert(question.question_id.clone()) {
            return Err(Error::validation(format!(
                "question bank line {lineno}: duplicate question_id {:?}",
                question.question_id
            )));
        }
        if question.kind == QuestionKind::Common {
            common_texts.insert(
                question.text.trim().to_lowercase(),
                question.question_id.clone(),
            );
        }
        questions.push(question);
    }
    if questions.is_empty() {
        return Err(Error::validation(format!(
            "question bank {} holds no questions",
            path.display()
        )));
    }
    // Role-specific questions must be distinct from the common list.
    for q in &questions {
        if q.kind == QuestionKind::RoleSpecific {
            if let Some(common_id) = common_texts.get(&q.text.trim().to_lowercase()) {
                return Err(Error::validation(format!(
                    "role-specific question {} duplicates common question {}",
                    q.question_id, common_id
                )));
            }
        }
    }

    let mut counts_by_kind: BTreeMap<String, usize> = BTreeMap::new();
    for q in &questions {
        let key = match q.kind {
            QuestionKind::Common => "common",
            QuestionKind::RoleSpecific => "role_specific",
            QuestionKind::Hallucination => "hallucination",
        };
        *counts_by_kind.entry(key.to_string()).or_default() += 1;
    }
    for (kind, count) in &counts_by_kind {
        log::info!("question bank: {count} {kind} questions");
    }
    Ok(QuestionBank {
        questions,
        counts_by_kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_bank(lines: &[String]) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(file, "{line}").unwrap();
        }
        file
    }

    fn row(id: &str, kind: &str, role: Option<&str>, category: &str, text: &str) -> String {
        let role_part = role
            .map(|r| format!("\"role_id\":\"{r}\","))
            .unwrap_or_default();
        format!(
            "{{\"question_id\":\"{id}\",{role_part}\"kind\":\"{kind}\",\"category\":\"{category}\",\"text\":\"{text}\"}}"
        )
    }

    #[test]
    fn fixture_bank_counts_by_kind() {
        let mut lines: Vec<String> = (0..100)
            .map(|i| {
                row(
                    &format!("c{i:03}"),
                    "common",
                    None,
                    CATEGORIES[i % 28],
                    &format!("Common question number {i}?"),
                )
            })
            .collect();
        lines.extend((0..50).map(|i| {
            row(
                &format!("r{i:03}"),
                "role_specific",
                Some("beethoven"),
                CATEGORIES[i % 28],
                &format!("Role question number {i}?"),
            )
        }));
        let file = write_bank(&lines);
        let bank = load_question_bank(file.path()).unwrap();
        assert_eq!(bank.count(QuestionKind::Common), 100);
        assert_eq!(bank.count(QuestionKind::RoleSpecific), 50);
        assert_eq!(bank.for_role("beethoven").len(), 150);
        assert_eq!(bank.for_role("mozart").len(), 100);
    }

    #[test]
    fn missing_text_reports_line_number() {
        let lines = vec![
            row("c0", "common", None, "childhood", "Fine?"),
            "{\"question_id\":\"c1\",\"kind\":\"common\",\"category\":\"family\"}".to_string(),
        ];
        let file = write_bank(&lines);
        let err = load_question_bank(file.path()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "got: {err}");
    }

    #[test]
    fn duplicate_id_rejected() {
        let lines = vec![
            row("c0", "common", None, "childhood", "One?"),
            row("c0", "common", None, "family", "Two?"),
        ];
        let file = write_bank(&lines);
        let err = load_question_bank(file.path()).unwrap_err();
        assert!(err.to_string().contains("duplicate question_id"));
    }

    #[test]
    fn unknown_category_rejected() {
        let lines = vec![row("c0", "common", None, "astrology", "Stars?")];
        let file = write_bank(&lines);
        let err = load_question_bank(file.path()).unwrap_err();
        assert!(err.to_string().contains("unknown category"));
    }

    #[test]
    fn role_specific_duplicating_common_text_rejected() {
        let lines = vec![
            row("c0", "common", None, "childhood", "Where did you grow up?"),
            row(
                "r0",
                "role_specific",
                Some("beethoven"),
                "childhood",
                "Where did you grow up?",
            ),
        ];
        let file = write_bank(&lines);
        let err = load_question_bank(file.path()).unwrap_err();
        assert!(err.to_string().contains("duplicates common question"));
    }

    #[test]
    fn role_specific_without_role_rejected() {
        let lines = vec![row("r0", "role_specific", None, "childhood", "Hm?")];
        let file = write_bank(&lines);
        assert!(load_question_bank(file.path()).is_err());
    }

    #[test]
    fn category_list_is_exactly_twenty_eight() {
        assert_eq!(CATEGORIES.len(), 28);
        let unique: HashSet<&str> = CATEGORIES.into_iter().collect();
        assert_eq!(unique.len(), 28);
    }
}
