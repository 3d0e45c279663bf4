//! Evaluation harness: question banks, transcript collection, rubric-scored
//! judging, and metric aggregation.

pub mod judge;
pub mod questions;
pub mod report;
pub mod rubrics;
pub mod run;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use judge::{judge_transcripts, parse_verdict, JudgeOutcome, ParsedVerdict};
pub use questions::{load_question_bank, QuestionBank, CATEGORIES};
pub use report::{aggregate, render_report_table, MetricAggregate, MetricReport};
pub use rubrics::{build_judge_prompt, builtin_metrics, load_custom_rubric, Metric};
pub use run::{run_multi_turn, run_single_turn, MultiTurnOutcome, SingleTurnReport};

pub const MULTI_TURN_ROUNDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    Common,
    RoleSpecific,
    Hallucination,
}

/// One evaluation question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalQuestion {
    pub question_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role_id: Option<String>,
    pub kind: QuestionKind,
    pub category: String,
    pub text: String,
}

impl EvalQuestion {
    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::validation(format!(
                "question {} has empty text",
                self.question_id
            )));
        }
        if self.kind == QuestionKind::RoleSpecific && self.role_id.is_none() {
            return Err(Error::validation(format!(
                "role-specific question {} lacks role_id",
                self.question_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptMode {
    SingleTurn,
    MultiTurn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub user_text: String,
    pub agent_text: String,
}

/// A collected conversation between a user (or interrogator) and the agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub transcript_id: String,
    pub role_id: String,
    pub agent_backend: String,
    pub mode: TranscriptMode,
    pub rounds: Vec<Round>,
}

impl Transcript {
    /// `multi_rounds` is the configured round count for multi-turn runs.
    pub fn validate(&self, multi_rounds: usize) -> Result<()> {
        match self.mode {
            TranscriptMode::SingleTurn if self.rounds.len() != 1 => {
                return Err(Error::validation(format!(
                    "single-turn transcript {} has {} rounds",
                    self.transcript_id,
                    self.rounds.len()
                )));
            }
            TranscriptMode::MultiTurn if self.rounds.len() != multi_rounds => {
                return Err(Error::validation(format!(
                    "multi-turn transcript {} has {} rounds, expected {multi_rounds}",
                    self.transcript_id,
                    self.rounds.len()
                )));
            }
            _ => {}
        }
        for (i, round) in self.rounds.iter().enumerate() {
            if round.agent_text.trim().is_empty() {
                return Err(Error::validation(format!(
                    "transcript {} round {i} has empty agent text",
                    self.transcript_id
                )));
            }
            if round.user_text.trim().is_empty() {
                return Err(Error::validation(format!(
                    "transcript {} round {i} has empty user text",
                    self.transcript_id
                )));
            }
        }
        Ok(())
    }

    /// User/agent alternation rendered for judge prompts.
    pub fn render_interactions(&self, role_name: &str) -> String {
        let mut out = String::new();
        for round in &self.rounds {
            out.push_str(&format!("User: {}\n", round.user_text));
            out.push_str(&format!("{role_name}: {}\n", round.agent_text));
        }
        out.trim_end().to_string()
    }
}

/// The six shipped metric dimensions, plus user-supplied custom rubrics.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum MetricId {
    Contextual,
    Emotional,
    Language,
    Logical,
    Adaptability,
    Overall,
    Custom(String),
}

impl MetricId {
    pub const BUILTIN: [MetricId; 6] = [
        MetricId::Contextual,
        MetricId::Emotional,
        MetricId::Language,
        MetricId::Logical,
        MetricId::Adaptability,
        MetricId::Overall,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            MetricId::Contextual => "contextual",
            MetricId::Emotional => "emotional",
            MetricId::Language => "language",
            MetricId::Logical => "logical",
            MetricId::Adaptability => "adaptability",
            MetricId::Overall => "overall",
            MetricId::Custom(name) => name,
        }
    }
}

impl std::fmt::Display for MetricId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<MetricId> for String {
    fn from(id: MetricId) -> String {
        id.as_str().to_string()
    }
}

impl TryFrom<String> for MetricId {
    type Error = String;

    fn try_from(value: String) -> std::result::Result<Self, Self::Error> {
        Ok(match value.as_str() {
            "contextual" => MetricId::Contextual,
            "emotional" => MetricId::Emotional,
            "language" => MetricId::Language,
            "logical" => MetricId::Logical,
            "adaptability" => MetricId::Adaptability,
            "overall" => MetricId::Overall,
            "" => return Err("empty metric id".to_string()),
            other => MetricId::Custom(other.to_string()),
        })
    }
}

/// One metric's scored judgment of one transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub transcript_ref: String,
    pub metric_id: MetricId,
    pub evidence: String,
    pub score: u8,
    pub raw: String,
}

impl JudgeVerdict {
    pub fn new(
        transcript_ref: impl Into<String>,
        metric_id: MetricId,
        evidence: impl Into<String>,
        score: u8,
        raw: impl Into<String>,
    ) -> Result<Self> {
        let verdict = JudgeVerdict {
            transcript_ref: transcript_ref.into(),
            metric_id,
            evidence: evidence.into(),
            score,
            raw: raw.into(),
        };
        verdict.validate()?;
        Ok(verdict)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=7).contains(&self.score) {
            return Err(Error::validation(format!(
                "score {} outside [1, 7]",
                self.score
            )));
        }
        if self.evidence.trim().is_empty() {
            return Err(Error::validation("verdict evidence is empty"));
        }
        Ok(())
    }
}
