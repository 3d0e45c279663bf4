//! Scene generation: prompt rendering and completion parsing.
//!
//! Two prompt builders live here. The first designs scenes from a slice of
//! the role's life experience; the second reconstructs a plausible scenario
//! for an authentic dialogue without leaking its content. Completions parse
//! into validated [`Scene`] values; scenes that fail validation are dropped
//! with a warning rather than failing the batch.

use crate::corpus::types::{
    Dialogue, DialogueOrigin, LifeSegment, RoleProfile, Scene, SceneOrigin,
};
use crate::error::{Error, Result};
use crate::gateway::ChatMessage;

pub const DEFAULT_SCENE_COUNT: usize = 20;

fn scene_count_phrase(count: usize) -> String {
    if count == 1 {
        "1 scene".to_string()
    } else {
        format!("{count} scenes")
    }
}

/// Prompt asking for `scene_count` scenes grounded in one life segment.
pub fn build_segment_scene_prompt(
    profile: &RoleProfile,
    segment: &LifeSegment,
    scene_count: usize,
) -> Result<Vec<ChatMessage>> {
    if scene_count < 1 {
        return Err(Error::validation("scene_count must be at least 1"));
    }
    if segment.role_id != profile.role_id {
        return Err(Error::validation(format!(
            "segment {} belongs to role {}, not {}",
            segment.segment_index, segment.role_id, profile.role_id
        )));
    }
    if profile.summary.trim().is_empty() {
        return Err(Error::validation("profile summary is empty"));
    }
    if segment.narrative.trim().is_empty() {
        return Err(Error::validation("segment narrative is empty"));
    }
    let name = &profile.name;
    let prompt = format!(
        "Summary of {name}: \n\
{summary}\n\
Footage: \n\
{footage}\n\
***\n\
You are a very talented scene designer and you can design a very realistic scene \
through an experience of your character. Next, based on the above character summary \
of {name} and a portion of his life story, please design {count} that could have \
occurred during this experience, please include the appropriate locations, characters, \
and corresponding settings. Please do not include any specific dialogue.\n\
1. The current scene needs to be relevant to {name}'s experience;\n\
2. please be aware that you are designing a scene for a play and that the current \
scene does not have to actually happen, but it must certainly look real;\n\
3. the main character is {name}, so the scene needs to be designed around {name};\n\
4. use your imagination as much as possible, the scene can include all aspects of life.\n\
5. Please transport yourself to the time when {name} lived, and design a scene that \
fits the historical background of the current era.\n\
6. Please note that the present is a story and you need to include the setting, \
location and characters. The location needs to be specific to a restaurant, concert \
hall, coffee shop, etc.\n\
7. Stay true to your role as a professional scene designer, using the following format.\n\
Example format. \n\
Scene 1.  \n\
Location ... \n\
Background. \n\
Detailed background ...",
        summary = profile.summary,
        footage = segment.narrative,
        count = scene_count_phrase(scene_count),
    );
    Ok(vec![ChatMessage::user(prompt)])
}

/// Prompt asking for the scenario an authentic dialogue could have happened in.
pub fn build_real_dialogue_scene_prompt(
    profile: &RoleProfile,
    dialogue: &Dialogue,
) -> Result<Vec<ChatMessage>> {
    if dialogue.origin != DialogueOrigin::Authentic {
        return Err(Error::validation(format!(
            "dialogue {} is not authentic; real-dialogue scenarios only cover authentic dialogues",
            dialogue.dialogue_id
        )));
    }
    if dialogue.turns.is_empty() {
        return Err(Error::validation(format!(
            "dialogue {} has no turns",
            dialogue.dialogue_id
        )));
    }
    if profile.summary.trim().is_empty() {
        return Err(Error::validation("profile summary is empty"));
    }
    let name = &profile.name;
    let rendered_dialogue = dialogue
        .turns
        .iter()
        .map(|t| t.render())
        .collect::<Vec<_>>()
        .join("\n");
    let prompt = format!(
        "Summary of {name}: \n\
{summary}\n\
Dialogues:\n\
{rendered_dialogue}\n\
***\n\
You are a very creative writer, you are familiar with {name}'s life story, and you \
admire {name} greatly. \n\
Please write a scenario in which the above dialogue might happen, including place, \
time, and characters. \n\
Please be careful not to cover any of the content of the dialog or include \
information about the characters.\n\
Stay true to your role as a professional scriptwriter, using the following format.\n\
Example format. \n\
Scene: \n\
Location: ... \n\
Detailed background ...",
        summary = profile.summary,
    );
    Ok(vec![ChatMessage::user(prompt)])
}

/// Outcome of parsing a scene-list completion.
#[derive(Debug, Clone)]
pub struct ParsedScenes {
    pub scenes: Vec<Scene>,
    /// Scenes dropped for invariant violations, with reasons.
    pub dropped: Vec<String>,
    /// Set when fewer scenes parsed than the prompt requested.
    pub shortfall: Option<usize>,
}

/// Accepted scene header forms: `Scene 3.`, `Scene 3:`, `**Scene 3**`,
/// and a bare `Scene:` for single-scene completions.
fn scene_header(line: &str) -> Option<Option<usize>> {
    let trimmed = line.trim().trim_start_matches("**");
    let rest = trimmed.strip_prefix("Scene")?;
    let rest = rest.trim_start();
    if rest.is_empty() {
        return Some(None);
    }
    let mut digits = String::new();
    let mut chars = rest.chars().peekable();
    while let Some(c) = chars.peek() {
        if c.is_ascii_digit() {
            digits.push(*c);
            chars.next();
        } else {
            break;
        }
    }
    let tail: String = chars.collect();
    let tail = tail.trim_end_matches("**").trim();
    if digits.is_empty() {
        // "Scene:" or "Scene." with no number
        if tail == ":" || tail == "." || tail.is_empty() {
            return Some(None);
        }
        return None;
    }
    if tail.is_empty() || tail == "." || tail == ":" {
        return Some(digits.parse().ok());
    }
    None
}

fn location_of(line: &str) -> Option<String> {
    let trimmed = line.trim();
    let rest = trimmed.strip_prefix("Location")?;
    let rest = rest.trim_start_matches([':', '.', '-']).trim();
    Some(rest.to_string())
}

fn participants_of(line: &str) -> Option<Vec<String>> {
    let trimmed = line.trim();
    let rest = trimmed
        .strip_prefix("Characters")
        .or_else(|| trimmed.strip_prefix("Participants"))?;
    let rest = rest.trim_start_matches([':', '.', '-']).trim();
    Some(
        rest.split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect(),
    )
}

/// Parse a completion into scenes. Total on arbitrary text: returns scenes
/// or a parse error, never panics. Invalid scenes are dropped with reasons;
/// a shortfall against `expected_count` is flagged, not fatal.
pub fn parse_scenes(
    completion: &str,
    role_id: &str,
    origin: SceneOrigin,
    segment_ref: Option<usize>,
    expected_count: usize,
) -> Result<ParsedScenes> {
    if completion.trim().is_empty() {
        return Err(Error::parse("empty completion"));
    }

    // Split into blocks, one per scene header.
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    for line in completion.lines() {
        if scene_header(line).is_some() {
            blocks.push(Vec::new());
        } else if let Some(block) = blocks.last_mut() {
            block.push(line);
        }
    }
    if blocks.is_empty() {
        return Err(Error::parse_with_raw(
            "no scene headers found in completion",
            completion,
        ));
    }

    let mut scenes = Vec::new();
    let mut dropped = Vec::new();
    for (ordinal, block) in blocks.iter().enumerate() {
        let mut location = String::new();
        let mut participants = Vec::new();
        let mut background_lines: Vec<&str> = Vec::new();
        for line in block {
            if let Some(loc) = location_of(line) {
                if location.is_empty() {
                    location = loc;
                    continue;
                }
            }
            if let Some(p) = participants_of(line) {
                participants = p;
                continue;
            }
            let trimmed = line.trim();
            if trimmed == "Background." || trimmed == "Background:" || trimmed == "Background" {
                continue;
            }
            let content = trimmed
                .strip_prefix("Background:")
                .or_else(|| trimmed.strip_prefix("Background."))
                .or_else(|| trimmed.strip_prefix("Detailed background:"))
                .map(str::trim)
                .unwrap_or(trimmed);
            if !content.is_empty() {
                background_lines.push(content);
            }
        }
        let scene_id = match (origin, segment_ref) {
            (SceneOrigin::SegmentDerived, Some(seg)) => {
                format!("s{seg:03}-{ordinal:02}")
            }
            _ => format!("rd-{ordinal:02}"),
        };
        let scene = Scene {
            scene_id,
            role_id: role_id.to_string(),
            origin,
            segment_ref,
            location,
            background: background_lines.join("\n"),
            participants,
        };
        match scene.validate() {
            Ok(()) => scenes.push(scene),
            Err(err) => dropped.push(format!("scene block {}: {err}", ordinal + 1)),
        }
    }

    if scenes.is_empty() {
        return Err(Error::parse_with_raw(
            format!(
                "no valid scenes in completion ({} blocks all dropped)",
                dropped.len()
            ),
            completion,
        ));
    }
    let shortfall = if scenes.len() < expected_count {
        Some(expected_count - scenes.len())
    } else {
        None
    };
    for reason in &dropped {
        log::warn!("dropped scene: {reason}");
    }
    if let Some(missing) = shortfall {
        log::warn!("scene shortfall: {missing} fewer than requested");
    }
    Ok(ParsedScenes {
        scenes,
        dropped,
        shortfall,
    })
}

/// Content-leakage check: fails when the scene background quotes any six or
/// more consecutive words of any dialogue turn (case-folded,
/// whitespace-normalized).
pub const LEAK_SHINGLE_WORDS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SceneCheck {
    Pass,
    Fail { reasons: Vec<String> },
}

pub fn validate_scene_against_dialogue(scene: &Scene, dialogue: &Dialogue) -> SceneCheck {
    let mut reasons = Vec::new();
    if let Err(err) = scene.validate() {
        reasons.push(err.to_string());
    }
    let fold = |text: &str| -> Vec<String> {
        text.to_lowercase()
            .split_whitespace()
            .map(|w| w.to_string())
            .collect()
    };
    let background = fold(&scene.background).join(" ");
    for (i, turn) in dialogue.turns.iter().enumerate() {
        let words = fold(&turn.text);
        if words.len() < LEAK_SHINGLE_WORDS {
            continue;
        }
        for window in words.windows(LEAK_SHINGLE_WORDS) {
            let shingle = window.join(" ");
            if background.contains(&shingle) {
                reasons.push(format!(
                    "background quotes turn {i} verbatim: {shingle:?}"
                ));
                break;
            }
        }
    }
    if reasons.is_empty() {
        SceneCheck::Pass
    } else {
        SceneCheck::Fail { reasons }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::types::{LanguageTag, Turn};
    use proptest::prelude::*;

    fn profile() -> RoleProfile {
        RoleProfile {
            role_id: "beethoven".into(),
            name: "Beethoven".into(),
            language_tag: LanguageTag::En,
            summary: "Beethoven was a composer in Vienna.".into(),
            sections: vec![("Early life".into(), "Born in Bonn.".into())],
            aliases: vec![],
            source_uri: None,
        }
    }

    fn segment() -> LifeSegment {
        LifeSegment {
            role_id: "beethoven".into(),
            segment_index: 0,
            period_label: "Early life".into(),
            narrative: "He studied with Haydn and performed in salons.".into(),
        }
    }

    #[test]
    fn segment_scene_prompt_carries_all_slots_and_constraints() {
        let messages = build_segment_scene_prompt(&profile(), &segment(), 20).unwrap();
        let text = &messages[0].content;
        assert!(text.contains("Summary of Beethoven:"));
        assert!(text.contains("design 20 scenes"));
        assert!(text.contains("Footage:"));
        assert!(text.contains("studied with Haydn"));
        assert!(text.contains("fits the historical background"));
        // all seven numbered constraints present
        for n in 1..=7 {
            assert!(text.contains(&format!("\n{n}. ")), "constraint {n} missing");
        }
        assert!(text.contains("Example format."));
    }

    #[test]
    fn scene_count_one_uses_singular() {
        let messages = build_segment_scene_prompt(&profile(), &segment(), 1).unwrap();
        assert!(messages[0].content.contains("design 1 scene "));
        assert!(!messages[0].content.contains("1 scenes"));
    }

    #[test]
    fn empty_summary_is_render_error() {
        let mut p = profile();
        p.summary = "  ".into();
        assert!(build_segment_scene_prompt(&p, &segment(), 20).is_err());
    }

    #[test]
    fn foreign_segment_rejected() {
        let mut seg = segment();
        seg.role_id = "mozart".into();
        assert!(build_segment_scene_prompt(&profile(), &seg, 20).is_err());
    }

    #[test]
    fn prompt_rendering_is_pure() {
        let a = build_segment_scene_prompt(&profile(), &segment(), 20).unwrap();
        let b = build_segment_scene_prompt(&profile(), &segment(), 20).unwrap();
        assert_eq!(a, b);
    }

    fn scene_block(n: usize) -> String {
        format!(
            "Scene {n}.\nLocation: A coffee house in Vienna\nBackground.\nPatrons discuss music while {}\n",
            "the master listens."
        )
    }

    #[test]
    fn twenty_wellformed_scenes_parse() {
        let completion: String = (1..=20).map(scene_block).collect();
        let parsed = parse_scenes(&completion, "beethoven", SceneOrigin::SegmentDerived, Some(0), 20)
            .unwrap();
        assert_eq!(parsed.scenes.len(), 20);
        assert!(parsed.dropped.is_empty());
        assert!(parsed.shortfall.is_none());
        assert_eq!(parsed.scenes[0].scene_id, "s000-00");
        assert_eq!(parsed.scenes[0].location, "A coffee house in Vienna");
    }

    #[test]
    fn poisoned_scene_dropped_with_warning() {
        let mut completion: String = (1..=19).map(scene_block).collect();
        completion.push_str(
            "Scene 20.\nLocation: A salon\nBackground.\nCarl (speaking): hello there\n",
        );
        let parsed = parse_scenes(&completion, "beethoven", SceneOrigin::SegmentDerived, Some(0), 20)
            .unwrap();
        assert_eq!(parsed.scenes.len(), 19);
        assert_eq!(parsed.dropped.len(), 1);
        assert_eq!(parsed.shortfall, Some(1));
    }

    #[test]
    fn no_headers_is_parse_error() {
        let err = parse_scenes("just prose with no markers", "b", SceneOrigin::SegmentDerived, Some(0), 20)
            .unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn header_variants_accepted() {
        for header in ["Scene 1.", "Scene 1:", "**Scene 1**", "Scene:"] {
            let completion = format!("{header}\nLocation: Somewhere\nBackground.\nA thing happens.\n");
            let parsed = parse_scenes(&completion, "b", SceneOrigin::RealDialogueDerived, None, 1)
                .unwrap();
            assert_eq!(parsed.scenes.len(), 1, "header {header:?} not recognized");
        }
    }

    fn authentic_dialogue() -> Dialogue {
        Dialogue {
            dialogue_id: "a-000".into(),
            role_id: "beethoven".into(),
            scene_ref: None,
            origin: DialogueOrigin::Authentic,
            turns: vec![
                Turn::speaking("Mozart", "Your counterpoint shows great promise, young man.").unwrap(),
                Turn::speaking("Beethoven", "I studied your quartets note by note, maestro.").unwrap(),
                Turn::speaking("Mozart", "Then show me something of your own invention.").unwrap(),
                Turn::speaking("Beethoven", "Gladly, though my hands shake to play before you.").unwrap(),
            ],
        }
    }

    #[test]
    fn real_dialogue_prompt_embeds_dialogue_verbatim() {
        let messages = build_real_dialogue_scene_prompt(&profile(), &authentic_dialogue()).unwrap();
        let text = &messages[0].content;
        for turn in &authentic_dialogue().turns {
            assert!(text.contains(&turn.text));
        }
        assert!(text.contains("a scenario in which the above dialogue"));
        assert!(text.contains("not to cover any of the content of the dialog"));
        assert!(text.contains("Example format."));
        assert!(text.contains("Scene:"));
    }

    #[test]
    fn mimic_dialogue_rejected_for_real_scene_prompt() {
        let mut d = authentic_dialogue();
        d.origin = DialogueOrigin::Mimic;
        assert!(build_real_dialogue_scene_prompt(&profile(), &d).is_err());
    }

    #[test]
    fn empty_dialogue_rejected() {
        let mut d = authentic_dialogue();
        d.turns.clear();
        assert!(build_real_dialogue_scene_prompt(&profile(), &d).is_err());
    }

    fn scene_with_background(background: &str) -> Scene {
        Scene {
            scene_id: "s0".into(),
            role_id: "beethoven".into(),
            origin: SceneOrigin::RealDialogueDerived,
            segment_ref: None,
            location: "Vienna".into(),
            background: background.into(),
            participants: vec![],
        }
    }

    #[test]
    fn leaking_background_fails_with_offending_span() {
        // Oracle: the background repeats 8 consecutive words of turn 0, so a
        // 6-word shingle scan must find an overlap.
        let scene = scene_with_background(
            "Before the meeting, your counterpoint shows great promise, young man, he had said.",
        );
        match validate_scene_against_dialogue(&scene, &authentic_dialogue()) {
            SceneCheck::Fail { reasons } => {
                assert!(reasons[0].contains("counterpoint shows great promise"))
            }
            SceneCheck::Pass => panic!("leak not detected"),
        }
    }

    #[test]
    fn shared_location_word_passes() {
        let scene = scene_with_background("An evening gathering in Vienna for musicians.");
        assert_eq!(
            validate_scene_against_dialogue(&scene, &authentic_dialogue()),
            SceneCheck::Pass
        );
    }

    #[test]
    fn empty_background_fails_check() {
        let scene = scene_with_background("");
        assert!(matches!(
            validate_scene_against_dialogue(&scene, &authentic_dialogue()),
            SceneCheck::Fail { .. }
        ));
    }

    proptest! {
        /// Total on arbitrary text: parse_scenes returns scenes or an error,
        /// and every returned scene satisfies the scene invariants.
        #[test]
        fn parse_scenes_is_total(completion in ".{0,600}") {
            if let Ok(parsed) = parse_scenes(&completion, "r", SceneOrigin::SegmentDerived, Some(0), 20) {
                for scene in &parsed.scenes {
                    prop_assert!(scene.validate().is_ok());
                }
            }
        }
    }
}
