//! Domain types for the role-play corpus.
//!
//! Every type here is immutable after construction and carries its invariants
//! in a `validate` method. Construction helpers (`Turn::new`, `Dialogue::new`,
//! ...) enforce the invariants up front so nothing invalid reaches disk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokens::estimate_tokens;

/// Default token budget for profile summaries.
pub const DEFAULT_SUMMARY_TOKEN_BUDGET: usize = 1_500;

/// Markers that must never appear in scene backgrounds.
pub const SPEAKING_MARKER: &str = "(speaking):";
pub const THINKING_MARKER: &str = "(thinking):";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanguageTag {
    #[default]
    En,
    Zh,
}

/// A character's identity, summary, and sectioned background text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleProfile {
    pub role_id: String,
    pub name: String,
    #[serde(default)]
    pub language_tag: LanguageTag,
    pub summary: String,
    /// Ordered (section_title, body) pairs.
    pub sections: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_uri: Option<String>,
}

/// Section titles counting as life experience: the text scene generation
/// segments and draws stories from.
pub fn is_life_experience_title(title: &str) -> bool {
    let t = title.to_lowercase();
    t.contains("life") || t.contains("experience") || t.contains("biography")
}

impl RoleProfile {
    pub fn validate(&self, summary_token_budget: usize) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::validation("profile name is empty"));
        }
        if !self.summary.contains(&self.name) {
            return Err(Error::validation(format!(
                "summary does not mention the role name {:?} verbatim",
                self.name
            )));
        }
        if !self
            .sections
            .iter()
            .any(|(title, _)| is_life_experience_title(title))
        {
            return Err(Error::validation(
                "profile has no life-experience section".to_string(),
            ));
        }
        let tokens = estimate_tokens(&self.summary);
        if tokens > summary_token_budget {
            return Err(Error::validation(format!(
                "summary estimated at {tokens} tokens exceeds budget {summary_token_budget}"
            )));
        }
        Ok(())
    }

    /// All life-experience section bodies joined in order; the source text
    /// for life segmentation.
    pub fn life_experience_text(&self) -> String {
        self.sections
            .iter()
            .filter(|(title, _)| is_life_experience_title(title))
            .map(|(_, body)| body.trim())
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    /// True when `speaker` names this role, matching the canonical name or
    /// any declared alias after trimming and case-folding.
    pub fn matches_speaker(&self, speaker: &str) -> bool {
        let folded = speaker.trim().to_lowercase();
        if folded == self.name.trim().to_lowercase() {
            return true;
        }
        self.aliases
            .iter()
            .any(|alias| alias.trim().to_lowercase() == folded)
    }
}

/// One slice of a role's life experience, in document order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifeSegment {
    pub role_id: String,
    pub segment_index: usize,
    pub period_label: String,
    pub narrative: String,
}

impl LifeSegment {
    pub fn validate(&self) -> Result<()> {
        if self.narrative.trim().is_empty() {
            return Err(Error::validation(format!(
                "segment {} has an empty narrative",
                self.segment_index
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneOrigin {
    SegmentDerived,
    RealDialogueDerived,
}

/// A generated scene: where a dialogue could take place and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    pub role_id: String,
    pub origin: SceneOrigin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_ref: Option<usize>,
    pub location: String,
    pub background: String,
    #[serde(default)]
    pub participants: Vec<String>,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if self.location.trim().is_empty() {
            return Err(Error::validation(format!(
                "scene {} has an empty location",
                self.scene_id
            )));
        }
        if self.background.trim().is_empty() {
            return Err(Error::validation(format!(
                "scene {} has an empty background",
                self.scene_id
            )));
        }
        if self.background.contains(SPEAKING_MARKER) || self.background.contains(THINKING_MARKER) {
            return Err(Error::validation(format!(
                "scene {} background contains dialogue markers",
                self.scene_id
            )));
        }
        match self.origin {
            SceneOrigin::SegmentDerived if self.segment_ref.is_none() => Err(Error::validation(
                format!("segment-derived scene {} lacks segment_ref", self.scene_id),
            )),
            SceneOrigin::RealDialogueDerived if self.segment_ref.is_some() => {
                Err(Error::validation(format!(
                    "real-dialogue scene {} must not carry segment_ref",
                    self.scene_id
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnAction {
    Thinking,
    Speaking,
}

/// A single screenplay turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: String,
    pub action: TurnAction,
    pub text: String,
}

impl Turn {
    pub fn new(speaker: impl Into<String>, action: TurnAction, text: impl Into<String>) -> Result<Self> {
        let speaker = speaker.into().trim().to_string();
        let text = text.into().trim().to_string();
        if speaker.is_empty() {
            return Err(Error::validation("turn speaker is empty"));
        }
        if text.is_empty() {
            return Err(Error::validation("turn text is empty"));
        }
        Ok(Turn {
            speaker,
            action,
            text,
        })
    }

    pub fn speaking(speaker: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        Turn::new(speaker, TurnAction::Speaking, text)
    }

    pub fn thinking(speaker: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        Turn::new(speaker, TurnAction::Thinking, text)
    }

    /// Header-line rendering: `Name (action): text`.
    pub fn render(&self) -> String {
        let action = match self.action {
            TurnAction::Thinking => "thinking",
            TurnAction::Speaking => "speaking",
        };
        format!("{} ({}): {}", self.speaker, action, self.text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DialogueOrigin {
    Authentic,
    Mimic,
}

/// A full screenplay dialogue tied to a role and (eventually) a scene.
///
/// `scene_ref` is `None` only for freshly ingested authentic dialogues;
/// the real-dialogue scene stage fills it in before training assembly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub role_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_ref: Option<String>,
    pub origin: DialogueOrigin,
    pub turns: Vec<Turn>,
}

impl Dialogue {
    /// Construct and validate in one step; `role_name` is the canonical
    /// speaker name of the role inside `turns`.
    pub fn new(
        dialogue_id: impl Into<String>,
        role_id: impl Into<String>,
        scene_ref: Option<String>,
        origin: DialogueOrigin,
        turns: Vec<Turn>,
        role_name: &str,
    ) -> Result<Self> {
        let dialogue = Dialogue {
            dialogue_id: dialogue_id.into(),
            role_id: role_id.into(),
            scene_ref,
            origin,
            turns,
        };
        dialogue.validate(role_name)?;
        Ok(dialogue)
    }

    pub fn validate(&self, role_name: &str) -> Result<()> {
        let is_role = |t: &Turn| t.speaker == role_name;
        let first = self
            .turns
            .first()
            .ok_or_else(|| Error::validation("dialogue has no turns"))?;
        if is_role(first) {
            return Err(Error::validation(format!(
                "dialogue {}: the role must not open the dialogue",
                self.dialogue_id
            )));
        }
        if !self
            .turns
            .iter()
            .any(|t| is_role(t) && t.action == TurnAction::Speaking)
        {
            return Err(Error::validation(format!(
                "dialogue {}: the role never speaks",
                self.dialogue_id
            )));
        }
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.action == TurnAction::Thinking {
                if !is_role(turn) {
                    return Err(Error::validation(format!(
                        "dialogue {}: turn {} thinks but is not the role",
                        self.dialogue_id, i
                    )));
                }
                let next = self.turns.get(i + 1);
                let followed = next
                    .map(|n| is_role(n) && n.action == TurnAction::Speaking)
                    .unwrap_or(false);
                if !followed {
                    return Err(Error::validation(format!(
                        "dialogue {}: thinking turn {} is not immediately followed by the role speaking",
                        self.dialogue_id, i
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The minimal training unit: a non-role trigger plus the role's thinking
/// and speaking turns, with the dialogue so far as context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialoguePair {
    pub pair_id: String,
    pub dialogue_ref: String,
    pub context: Vec<Turn>,
    pub trigger: Turn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thought: Option<Turn>,
    pub response: Turn,
}

impl DialoguePair {
    pub fn validate(&self, role_name: &str) -> Result<()> {
        if self.trigger.speaker == role_name {
            return Err(Error::validation(format!(
                "pair {}: trigger spoken by the role",
                self.pair_id
            )));
        }
        if self.trigger.action != TurnAction::Speaking {
            return Err(Error::validation(format!(
                "pair {}: trigger is not a speaking turn",
                self.pair_id
            )));
        }
        if self.response.speaker != role_name {
            return Err(Error::validation(format!(
                "pair {}: response not spoken by the role",
                self.pair_id
            )));
        }
        if self.response.action != TurnAction::Speaking {
            return Err(Error::validation(format!(
                "pair {}: response is not a speaking turn",
                self.pair_id
            )));
        }
        if let Some(thought) = &self.thought {
            if thought.speaker != role_name || thought.action != TurnAction::Thinking {
                return Err(Error::validation(format!(
                    "pair {}: thought must be a thinking turn by the role",
                    self.pair_id
                )));
            }
        }
        Ok(())
    }
}

/// An indirect question probing knowledge outside the role's era, with the
/// refusal it trains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallucinationProbe {
    pub probe_id: String,
    pub role_id: String,
    pub question: String,
    pub anachronism_topic: String,
    pub refusal: String,
    /// Set when the question is phrased directly ("Do you know what X is")
    /// instead of the required sideways style; kept but reported.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flagged_direct: bool,
}

/// Phrases accepted as an unfamiliarity statement inside a refusal.
pub const UNFAMILIARITY_CUES: &[&str] = &[
    "unfamiliar",
    "never",
    "unknown to me",
    "do not know",
    "don't know",
    "know nothing",
    "not familiar",
    "beyond my knowledge",
];

impl HallucinationProbe {
    pub fn validate(&self) -> Result<()> {
        if self.question.trim().is_empty() {
            return Err(Error::validation(format!(
                "probe {}: empty question",
                self.probe_id
            )));
        }
        if self.refusal.trim().is_empty() {
            return Err(Error::validation(format!(
                "probe {}: empty refusal",
                self.probe_id
            )));
        }
        let folded = self.refusal.to_lowercase();
        if !UNFAMILIARITY_CUES.iter().any(|cue| folded.contains(cue)) {
            return Err(Error::validation(format!(
                "probe {}: refusal lacks an unfamiliarity statement",
                self.probe_id
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_profile() -> RoleProfile {
        RoleProfile {
            role_id: "beethoven".into(),
            name: "Beethoven".into(),
            language_tag: LanguageTag::En,
            summary: "Beethoven was a composer who wrote nine symphonies.".into(),
            sections: vec![
                ("Overview".into(), "A composer.".into()),
                ("Early life".into(), "Born in Bonn.\n\nMoved to Vienna.".into()),
            ],
            aliases: vec!["Ludwig van Beethoven".into()],
            source_uri: None,
        }
    }

    #[test]
    fn profile_validates() {
        sample_profile().validate(DEFAULT_SUMMARY_TOKEN_BUDGET).unwrap();
    }

    #[test]
    fn profile_rejects_summary_without_name() {
        let mut p = sample_profile();
        p.summary = "A great composer.".into();
        assert!(p.validate(DEFAULT_SUMMARY_TOKEN_BUDGET).is_err());
    }

    #[test]
    fn profile_rejects_missing_life_section() {
        let mut p = sample_profile();
        p.sections = vec![("Overview".into(), "A composer.".into())];
        assert!(p.validate(DEFAULT_SUMMARY_TOKEN_BUDGET).is_err());
    }

    #[test]
    fn profile_rejects_oversized_summary() {
        let mut p = sample_profile();
        p.summary = format!("Beethoven {}", "word ".repeat(2_000));
        assert!(p.validate(DEFAULT_SUMMARY_TOKEN_BUDGET).is_err());
    }

    #[test]
    fn alias_matching_is_case_folded() {
        let p = sample_profile();
        assert!(p.matches_speaker("beethoven"));
        assert!(p.matches_speaker(" LUDWIG VAN BEETHOVEN "));
        assert!(!p.matches_speaker("Mozart"));
    }

    #[test]
    fn scene_rejects_dialogue_markers_in_background() {
        let scene = Scene {
            scene_id: "s0".into(),
            role_id: "beethoven".into(),
            origin: SceneOrigin::SegmentDerived,
            segment_ref: Some(0),
            location: "Vienna".into(),
            background: "Carl (speaking): hello".into(),
            participants: vec![],
        };
        assert!(scene.validate().is_err());
    }

    #[test]
    fn scene_origin_segment_ref_coupling() {
        let mut scene = Scene {
            scene_id: "s0".into(),
            role_id: "b".into(),
            origin: SceneOrigin::SegmentDerived,
            segment_ref: None,
            location: "Vienna".into(),
            background: "A recital.".into(),
            participants: vec![],
        };
        assert!(scene.validate().is_err());
        scene.segment_ref = Some(1);
        scene.validate().unwrap();
        scene.origin = SceneOrigin::RealDialogueDerived;
        assert!(scene.validate().is_err());
    }

    #[test]
    fn turn_rejects_empty_text() {
        assert!(Turn::speaking("Carl", "   ").is_err());
    }

    fn turns_fixture() -> Vec<Turn> {
        vec![
            Turn::speaking("Carl", "Maestro, how fares the symphony?").unwrap(),
            Turn::thinking("Beethoven", "He prods at my slow progress.").unwrap(),
            Turn::speaking("Beethoven", "It fares as storms do.").unwrap(),
        ]
    }

    #[test]
    fn dialogue_accepts_valid_turns() {
        Dialogue::new(
            "d0",
            "beethoven",
            Some("s0".into()),
            DialogueOrigin::Mimic,
            turns_fixture(),
            "Beethoven",
        )
        .unwrap();
    }

    #[test]
    fn dialogue_rejects_role_opening() {
        let turns = vec![
            Turn::speaking("Beethoven", "I begin.").unwrap(),
            Turn::speaking("Carl", "Oh?").unwrap(),
        ];
        let err = Dialogue::new("d0", "b", None, DialogueOrigin::Mimic, turns, "Beethoven");
        assert!(err.is_err());
    }

    #[test]
    fn dialogue_rejects_dangling_thought() {
        let turns = vec![
            Turn::speaking("Carl", "Well?").unwrap(),
            Turn::thinking("Beethoven", "Hmm.").unwrap(),
        ];
        assert!(Dialogue::new("d0", "b", None, DialogueOrigin::Mimic, turns, "Beethoven").is_err());
    }

    #[test]
    fn dialogue_rejects_non_role_thinking() {
        let turns = vec![
            Turn::speaking("Carl", "Well?").unwrap(),
            Turn::thinking("Carl", "I wonder.").unwrap(),
            Turn::speaking("Beethoven", "Indeed.").unwrap(),
        ];
        assert!(Dialogue::new("d0", "b", None, DialogueOrigin::Mimic, turns, "Beethoven").is_err());
    }

    #[test]
    fn probe_requires_unfamiliarity_statement() {
        let mut probe = HallucinationProbe {
            probe_id: "p0".into(),
            role_id: "b".into(),
            question: "How was the morning flight?".into(),
            anachronism_topic: "aviation".into(),
            refusal: "Planes are wonderful machines.".into(),
            flagged_direct: false,
        };
        assert!(probe.validate().is_err());
        probe.refusal = "I have never taken a plane. I have never even seen one.".into();
        probe.validate().unwrap();
    }

    fn round_trip<T>(value: &T)
    where
        T: serde::Serialize + serde::de::DeserializeOwned + PartialEq + std::fmt::Debug,
    {
        let json = serde_json::to_string(value).unwrap();
        let back: T = serde_json::from_str(&json).unwrap();
        assert_eq!(value, &back);
    }

    #[test]
    fn serialization_round_trips_for_every_domain_type() {
        round_trip(&sample_profile());
        round_trip(&LifeSegment {
            role_id: "beethoven".into(),
            segment_index: 2,
            period_label: "Early life".into(),
            narrative: "Born in Bonn.".into(),
        });
        round_trip(&Scene {
            scene_id: "s001-02".into(),
            role_id: "beethoven".into(),
            origin: SceneOrigin::SegmentDerived,
            segment_ref: Some(1),
            location: "A salon".into(),
            background: "After a recital.".into(),
            participants: vec!["Carl".into()],
        });
        let dialogue = Dialogue::new(
            "d0",
            "beethoven",
            Some("s0".into()),
            DialogueOrigin::Mimic,
            turns_fixture(),
            "Beethoven",
        )
        .unwrap();
        round_trip(&dialogue);
        round_trip(&DialoguePair {
            pair_id: "d0-p00".into(),
            dialogue_ref: "d0".into(),
            context: vec![],
            trigger: Turn::speaking("Carl", "Well?").unwrap(),
            thought: Some(Turn::thinking("Beethoven", "Hm.").unwrap()),
            response: Turn::speaking("Beethoven", "Indeed.").unwrap(),
        });
        round_trip(&HallucinationProbe {
            probe_id: "pr-000".into(),
            role_id: "beethoven".into(),
            question: "How was the flight?".into(),
            anachronism_topic: "aviation".into(),
            refusal: "I have never taken a plane.".into(),
            flagged_direct: true,
        });
        round_trip(&crate::corpus::cache::CacheEntry {
            key: "abc123".into(),
            value: "completion text".into(),
            created_at: 1_700_000_000,
        });
    }
}
