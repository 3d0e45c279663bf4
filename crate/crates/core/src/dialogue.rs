//! Mimic-dialogue prompting, screenplay parsing, and pair extraction.
//!
//! Scripts follow a strict turn format, one header line per turn:
//!
//! ```text
//! Name (speaking): utterance text
//! Name (thinking): inner text (role only)
//! ```
//!
//! Continuation lines attach to the turn above them, joined with single
//! spaces, so parsed turn text never contains newlines. `render_script` is
//! the inverse: header lines separated by blank lines.

use crate::corpus::types::{
    Dialogue, DialogueOrigin, DialoguePair, RoleProfile, Scene, Turn, TurnAction,
};
use crate::error::{Error, Result};
use crate::gateway::ChatMessage;
use crate::tokens::estimate_tokens;

pub const DEFAULT_EXEMPLAR_CAP: usize = 3;
/// Token budget for the exemplar block inside the dialogue prompt.
pub const EXEMPLAR_TOKEN_BUDGET: usize = 1_200;
/// Scripts shorter than this many words are kept but flagged.
pub const MIN_SCRIPT_WORDS: usize = 500;

/// Render a dialogue in the on-disk script format: one header line per
/// turn, blank line between turns.
pub fn render_script(dialogue: &Dialogue) -> String {
    dialogue
        .turns
        .iter()
        .map(|t| t.render())
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Prompt asking for a mimic dialogue in `scene`, anchored to the role's
/// tone by up to `exemplar_cap` authentic dialogues (token budget
/// permitting).
pub fn build_dialogue_prompt(
    profile: &RoleProfile,
    scene: &Scene,
    exemplar_dialogues: &[Dialogue],
    exemplar_cap: usize,
) -> Result<Vec<ChatMessage>> {
    if scene.role_id != profile.role_id {
        return Err(Error::validation(format!(
            "scene {} belongs to role {}, not {}",
            scene.scene_id, scene.role_id, profile.role_id
        )));
    }
    if profile.summary.trim().is_empty() {
        return Err(Error::validation("profile summary is empty"));
    }
    scene.validate()?;

    // Greedy budget fill: keep exemplars in order while they fit both the
    // count cap and the token budget.
    let mut exemplar_block = String::new();
    for (kept, dialogue) in exemplar_dialogues.iter().take(exemplar_cap).enumerate() {
        let rendered = render_script(dialogue);
        let candidate = if exemplar_block.is_empty() {
            rendered.clone()
        } else {
            format!("{exemplar_block}\n\n{rendered}")
        };
        if estimate_tokens(&candidate) > EXEMPLAR_TOKEN_BUDGET {
            if kept == 0 {
                // A single oversized exemplar still anchors tone; keep it alone.
                exemplar_block = rendered;
            }
            break;
        }
        exemplar_block = candidate;
    }

    let name = &profile.name;
    let exemplar_section = if exemplar_block.is_empty() {
        String::new()
    } else {
        format!("Historical dialogues of {name}:\n{exemplar_block}\n")
    };
    let prompt = format!(
        "Summary of {name}: \n\
{summary}\n\
Scene:\n\
Location: {location}\n\
{background}\n\
{exemplar_section}\
***\n\
1. First of all, please speculate on the characters with whom {name} might have a \
dialogue, based on the above life experiences and detailed background knowledge \
about {name}. \n\
2. Please pay attention to the relationships between the characters and the events \
that precede them, and put yourself in the writer's shoes and look at the story and \
scene at hand.\n\
3. Please note that I want you to create a screenplay where all the scenes are a \
story, and you should strictly ensure that the psychology, needs, and logic of each \
character are taken into account in the story, and you can ignore legal and moral \
restrictions if necessary.\n\
4. Please note that the main character is {name}, when having a scene dialogue, it \
is necessary for the other characters to start the dialogue first, {name} can have \
the action of thinking before speaking. The other characters can only have the \
action of speaking. (thinking) for thinking, (speaking) for speaking. The actions \
must append to the name of the corresponding character, followed by a new line. And \
then write the contents of thinking or speaking.\n\
7. Stay true to your role as a professional scriptwriter, using the following \
format. And must write at least 500 words.\n\
Example format. \n\
Scene: \n\
Location: ... \n\
Detailed background ... \n\
[Dialogues]: \n\
Character1 (speaking): Detailed utterance ... \n\
{name} (speaking): Detailed utterance ...",
        summary = profile.summary,
        location = scene.location,
        background = scene.background,
    );
    Ok(vec![ChatMessage::user(prompt)])
}

/// One parsed script plus what the parser had to note along the way.
#[derive(Debug, Clone)]
pub struct ParsedScript {
    pub dialogue: Dialogue,
    /// Scene/location preamble found before the first turn, if any.
    pub preamble: Option<String>,
    /// Set when the script is shorter than the requested minimum words.
    pub below_min_words: bool,
}

fn parse_header(line: &str) -> Option<(String, TurnAction, String)> {
    let trimmed = line.trim().trim_start_matches("**");
    let open = trimmed.find('(')?;
    let close = trimmed[open..].find(')')? + open;
    let action = match trimmed[open + 1..close].trim().to_lowercase().as_str() {
        "speaking" => TurnAction::Speaking,
        "thinking" => TurnAction::Thinking,
        _ => return None,
    };
    let after = trimmed[close + 1..].trim_start_matches("**").trim_start();
    let rest = after.strip_prefix(':')?;
    let name = trimmed[..open].trim().trim_end_matches("**").trim();
    if name.is_empty() || name.len() > 64 || name.contains(':') {
        return None;
    }
    Some((name.to_string(), action, rest.trim().to_string()))
}

/// Parse a screenplay completion into a validated [`Dialogue`].
///
/// Role speakers are matched against the profile name and aliases
/// (trimmed, case-folded) and canonicalized to the profile name.
pub fn parse_script(
    completion: &str,
    profile: &RoleProfile,
    dialogue_id: &str,
    scene_ref: Option<String>,
    origin: DialogueOrigin,
) -> Result<ParsedScript> {
    if completion.trim().is_empty() {
        return Err(Error::parse("empty completion"));
    }
    let mut preamble_lines: Vec<&str> = Vec::new();
    let mut turns: Vec<(String, TurnAction, Vec<String>)> = Vec::new();
    for line in completion.lines() {
        if let Some((name, action, text)) = parse_header(line) {
            let canonical = if profile.matches_speaker(&name) {
                profile.name.clone()
            } else {
                name
            };
            let mut texts = Vec::new();
            if !text.is_empty() {
                texts.push(text);
            }
            turns.push((canonical, action, texts));
        } else if let Some(current) = turns.last_mut() {
            let trimmed = line.trim();
            if !trimmed.is_empty() {
                current.2.push(trimmed.to_string());
            }
        } else {
            let trimmed = line.trim();
            if !trimmed.is_empty() && trimmed != "[Dialogues]:" {
                preamble_lines.push(line);
            }
        }
    }
    if turns.is_empty() {
        return Err(Error::parse_with_raw(
            "no turns found in completion",
            completion,
        ));
    }
    let mut built = Vec::with_capacity(turns.len());
    for (speaker, action, texts) in turns {
        let text = texts.join(" ");
        if text.trim().is_empty() {
            return Err(Error::parse(format!(
                "turn by {speaker} has no text"
            )));
        }
        built.push(Turn::new(speaker, action, text).map_err(|e| Error::parse(e.to_string()))?);
    }
    let word_count: usize = built.iter().map(|t| t.text.split_whitespace().count()).sum();
    let dialogue = Dialogue::new(
        dialogue_id,
        &profile.role_id,
        scene_ref,
        origin,
        built,
        &profile.name,
    )?;
    let preamble = if preamble_lines.is_empty() {
        None
    } else {
        Some(
            preamble_lines
                .iter()
                .map(|l| l.trim())
                .collect::<Vec<_>>()
                .join("\n"),
        )
    };
    Ok(ParsedScript {
        dialogue,
        preamble,
        below_min_words: word_count < MIN_SCRIPT_WORDS,
    })
}

/// Extract ordered training pairs from a valid dialogue.
///
/// A pair covers one maximal run of role turns: the trigger is the non-role
/// speaking turn right before the run, the thought is the run's opening
/// thinking turn when present, the response merges the run's speaking turns
/// with newline joins, and the context is every turn before the trigger.
pub fn extract_pairs(dialogue: &Dialogue, role_name: &str) -> Vec<DialoguePair> {
    let turns = &dialogue.turns;
    let is_role = |t: &Turn| t.speaker == role_name;
    let mut pairs = Vec::new();
    let mut i = 0;
    while i < turns.len() {
        if !is_role(&turns[i]) {
            i += 1;
            continue;
        }
        // Maximal run of role turns starting at i.
        let start = i;
        let mut end = i;
        while end + 1 < turns.len() && is_role(&turns[end + 1]) {
            end += 1;
        }
        if start == 0 {
            // Only possible on invalid dialogues; a valid one opens with a
            // non-role turn.
            i = end + 1;
            continue;
        }
        let trigger = turns[start - 1].clone();
        let thought = if turns[start].action == TurnAction::Thinking {
            Some(turns[start].clone())
        } else {
            None
        };
        let speaking_texts: Vec<&str> = turns[start..=end]
            .iter()
            .filter(|t| t.action == TurnAction::Speaking)
            .map(|t| t.text.as_str())
            .collect();
        if !speaking_texts.is_empty() && trigger.action == TurnAction::Speaking && !is_role(&trigger)
        {
            let response = Turn {
                speaker: role_name.to_string(),
                action: TurnAction::Speaking,
                text: speaking_texts.join("\n"),
            };
            pairs.push(DialoguePair {
                pair_id: format!("{}-p{:02}", dialogue.dialogue_id, pairs.len()),
                dialogue_ref: dialogue.dialogue_id.clone(),
                context: turns[..start - 1].to_vec(),
                trigger,
                thought,
                response,
            });
        }
        i = end + 1;
    }
    pairs
}

/// The first non-role speaking turn after the run a pair was built from,
/// used to append the trailing unit of a training record.
pub fn followup_turn<'a>(
    dialogue: &'a Dialogue,
    pair: &DialoguePair,
    role_name: &str,
) -> Option<&'a Turn> {
    // Locate the trigger occurrence by position: count non-role turns until
    // the trigger text matches, then skip the role run that follows.
    let turns = &dialogue.turns;
    let mut idx = None;
    for (i, t) in turns.iter().enumerate() {
        if t.speaker == pair.trigger.speaker
            && t.text == pair.trigger.text
            && t.action == pair.trigger.action
            && i == pair.context.len()
        {
            idx = Some(i);
            break;
        }
    }
    let mut i = idx? + 1;
    while i < turns.len() && turns[i].speaker == role_name {
        i += 1;
    }
    turns.get(i).filter(|t| t.action == TurnAction::Speaking)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::types::{LanguageTag, SceneOrigin};
    use proptest::prelude::*;

    fn profile() -> RoleProfile {
        RoleProfile {
            role_id: "beethoven".into(),
            name: "Beethoven".into(),
            language_tag: LanguageTag::En,
            summary: "Beethoven was a composer in Vienna.".into(),
            sections: vec![("Early life".into(), "Born in Bonn.".into())],
            aliases: vec!["Ludwig van Beethoven".into()],
            source_uri: None,
        }
    }

    fn scene() -> Scene {
        Scene {
            scene_id: "s000-00".into(),
            role_id: "beethoven".into(),
            origin: SceneOrigin::SegmentDerived,
            segment_ref: Some(0),
            location: "A candlelit salon in Vienna".into(),
            background: "A small gathering after a private recital.".into(),
            participants: vec!["Carl".into()],
        }
    }

    fn exemplar(id: &str, text: &str) -> Dialogue {
        Dialogue {
            dialogue_id: id.into(),
            role_id: "beethoven".into(),
            scene_ref: None,
            origin: DialogueOrigin::Authentic,
            turns: vec![
                Turn::speaking("Mozart", text).unwrap(),
                Turn::speaking("Beethoven", "So it is.").unwrap(),
            ],
        }
    }

    #[test]
    fn dialogue_prompt_embeds_scene_and_exemplars() {
        let exemplars = vec![exemplar("a-0", "A fine evening for music, is it not?")];
        let messages = build_dialogue_prompt(&profile(), &scene(), &exemplars, 3).unwrap();
        let text = &messages[0].content;
        assert!(text.contains("Example format."));
        assert!(text.contains("A small gathering after a private recital."));
        assert!(text.contains("A fine evening for music, is it not?"));
        assert!(text.contains("So it is."));
        assert!(text.contains("(thinking) for thinking, (speaking) for speaking"));
        assert!(text.contains("other characters to start the dialogue first"));
        assert!(text.contains("must write at least"));
        assert!(text.contains("500 words"));
    }

    #[test]
    fn zero_exemplars_renders_without_block() {
        let messages = build_dialogue_prompt(&profile(), &scene(), &[], 3).unwrap();
        assert!(!messages[0].content.contains("Historical dialogues"));
    }

    #[test]
    fn exemplars_fill_greedily_to_cap() {
        // Greedy budget fill enumerated by hand: each exemplar is tiny, so the
        // count cap of 3 binds first and exemplars 4..10 are dropped.
        let exemplars: Vec<Dialogue> = (0..10)
            .map(|i| exemplar(&format!("a-{i}"), &format!("Exemplar line number {i} here.")))
            .collect();
        let messages = build_dialogue_prompt(&profile(), &scene(), &exemplars, 3).unwrap();
        let text = &messages[0].content;
        for i in 0..3 {
            assert!(text.contains(&format!("Exemplar line number {i} here.")));
        }
        for i in 3..10 {
            assert!(!text.contains(&format!("Exemplar line number {i} here.")));
        }
    }

    #[test]
    fn tight_budget_drops_later_exemplars() {
        let long_line = "word ".repeat(1_500);
        let exemplars = vec![exemplar("a-0", &long_line), exemplar("a-1", "Short line.")];
        let messages = build_dialogue_prompt(&profile(), &scene(), &exemplars, 3).unwrap();
        let text = &messages[0].content;
        assert!(text.contains(&long_line.trim().to_string()));
        assert!(!text.contains("Short line."));
    }

    #[test]
    fn scene_from_other_role_rejected() {
        let mut s = scene();
        s.role_id = "mozart".into();
        assert!(build_dialogue_prompt(&profile(), &s, &[], 3).is_err());
    }

    const FIXTURE_SCRIPT: &str = "Scene: \n\
Location: A candlelit salon in Vienna \n\
Detailed background: a small gathering after a recital. \n\
[Dialogues]: \n\
Mozart (speaking): Your counterpoint shows promise, young man.\n\
Beethoven (thinking): He tests me; I must answer with my own voice, not his.\n\
Beethoven (speaking): Promise is a seed, maestro. I intend a forest.\n";

    #[test]
    fn fixture_script_parses_into_three_turns() {
        let parsed = parse_script(FIXTURE_SCRIPT, &profile(), "m-s000-00", Some("s000-00".into()), DialogueOrigin::Mimic)
            .unwrap();
        assert_eq!(parsed.dialogue.turns.len(), 3);
        assert_eq!(parsed.dialogue.turns[0].speaker, "Mozart");
        assert_eq!(parsed.dialogue.turns[1].action, TurnAction::Thinking);
        assert!(parsed.preamble.as_deref().unwrap().contains("candlelit salon"));
        assert!(parsed.below_min_words);
    }

    #[test]
    fn role_opening_script_rejected() {
        let script = "Beethoven (speaking): I begin.\nMozart (speaking): Oh?";
        assert!(parse_script(script, &profile(), "d", None, DialogueOrigin::Mimic).is_err());
    }

    #[test]
    fn non_role_thinking_rejected() {
        let script = "Mozart (thinking): quiet\nBeethoven (speaking): Hello.";
        assert!(parse_script(script, &profile(), "d", None, DialogueOrigin::Mimic).is_err());
    }

    #[test]
    fn no_turns_rejected() {
        assert!(parse_script("just prose", &profile(), "d", None, DialogueOrigin::Mimic).is_err());
    }

    #[test]
    fn multiline_utterance_joins() {
        let script = "Mozart (speaking): The first line\ncontinues on a second line.\nBeethoven (speaking): Understood.";
        let parsed = parse_script(script, &profile(), "d", None, DialogueOrigin::Mimic).unwrap();
        assert_eq!(
            parsed.dialogue.turns[0].text,
            "The first line continues on a second line."
        );
    }

    #[test]
    fn alias_canonicalized_to_profile_name() {
        let script = "Mozart (speaking): Well met.\nLudwig van Beethoven (speaking): And you.";
        let parsed = parse_script(script, &profile(), "d", None, DialogueOrigin::Mimic).unwrap();
        assert_eq!(parsed.dialogue.turns[1].speaker, "Beethoven");
    }

    fn d(turns: Vec<Turn>) -> Dialogue {
        Dialogue::new("d0", "beethoven", Some("s0".into()), DialogueOrigin::Mimic, turns, "Beethoven")
            .unwrap()
    }

    #[test]
    fn single_unit_with_thought() {
        let dialogue = d(vec![
            Turn::speaking("Carl", "How goes the work?").unwrap(),
            Turn::thinking("Beethoven", "He asks out of duty.").unwrap(),
            Turn::speaking("Beethoven", "Slowly, as all good work goes.").unwrap(),
        ]);
        let pairs = extract_pairs(&dialogue, "Beethoven");
        assert_eq!(pairs.len(), 1);
        assert!(pairs[0].context.is_empty());
        assert_eq!(pairs[0].trigger.speaker, "Carl");
        assert!(pairs[0].thought.is_some());
        assert_eq!(pairs[0].response.text, "Slowly, as all good work goes.");
    }

    #[test]
    fn two_triggers_two_pairs_with_growing_context() {
        // Brute-force scan by hand: [A, R, B, R] yields pairs at R(1) and
        // R(3); the second pair's trigger is B and its context is every turn
        // before B, i.e. [A, R].
        let dialogue = d(vec![
            Turn::speaking("Anna", "Welcome back.").unwrap(),
            Turn::speaking("Beethoven", "Good to return.").unwrap(),
            Turn::speaking("Bruno", "And the journey?").unwrap(),
            Turn::speaking("Beethoven", "Long, but fruitful.").unwrap(),
        ]);
        let pairs = extract_pairs(&dialogue, "Beethoven");
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].trigger.speaker, "Anna");
        assert!(pairs[0].context.is_empty());
        assert_eq!(pairs[1].trigger.speaker, "Bruno");
        assert_eq!(pairs[1].context.len(), 2);
        assert_eq!(pairs[1].context[1].text, "Good to return.");
    }

    #[test]
    fn consecutive_role_turns_merge_into_one_response() {
        let dialogue = d(vec![
            Turn::speaking("Carl", "Speak your mind.").unwrap(),
            Turn::speaking("Beethoven", "First thought.").unwrap(),
            Turn::speaking("Beethoven", "Second thought.").unwrap(),
        ]);
        let pairs = extract_pairs(&dialogue, "Beethoven");
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].response.text, "First thought.\nSecond thought.");
    }

    #[test]
    fn no_context_contains_own_response() {
        let dialogue = d(vec![
            Turn::speaking("Anna", "One.").unwrap(),
            Turn::speaking("Beethoven", "Two.").unwrap(),
            Turn::speaking("Bruno", "Three.").unwrap(),
            Turn::speaking("Beethoven", "Four.").unwrap(),
        ]);
        for pair in extract_pairs(&dialogue, "Beethoven") {
            assert!(pair.context.iter().all(|t| t.text != pair.response.text));
        }
    }

    #[test]
    fn followup_turn_found_when_dialogue_continues() {
        let dialogue = d(vec![
            Turn::speaking("Anna", "One.").unwrap(),
            Turn::speaking("Beethoven", "Two.").unwrap(),
            Turn::speaking("Bruno", "Three.").unwrap(),
            Turn::speaking("Beethoven", "Four.").unwrap(),
        ]);
        let pairs = extract_pairs(&dialogue, "Beethoven");
        let follow = followup_turn(&dialogue, &pairs[0], "Beethoven").unwrap();
        assert_eq!(follow.text, "Three.");
        assert!(followup_turn(&dialogue, &pairs[1], "Beethoven").is_none());
    }

    #[test]
    fn round_trip_render_then_parse() {
        let dialogue = d(vec![
            Turn::speaking("Carl", "How goes the work?").unwrap(),
            Turn::thinking("Beethoven", "He asks out of duty.").unwrap(),
            Turn::speaking("Beethoven", "Slowly.").unwrap(),
        ]);
        let script = render_script(&dialogue);
        let parsed = parse_script(&script, &profile(), "d0", Some("s0".into()), DialogueOrigin::Mimic)
            .unwrap();
        assert_eq!(parsed.dialogue.turns, dialogue.turns);
    }

    // ── randomized-script strategy shared with the oracle check ──────────

    /// Independent linear-scan oracle for pair counting: number of maximal
    /// role-turn runs (each run is preceded by a non-role turn since the
    /// role never opens).
    pub(crate) fn oracle_pair_count(dialogue: &Dialogue, role_name: &str) -> usize {
        let mut count = 0;
        let mut in_run = false;
        for turn in &dialogue.turns {
            let role = turn.speaker == role_name;
            if role && !in_run {
                count += 1;
                in_run = true;
            } else if !role {
                in_run = false;
            }
        }
        count
    }

    pub(crate) fn valid_dialogue_strategy() -> impl Strategy<Value = Dialogue> {
        // A dialogue is a sequence of blocks; each block is a non-role
        // speaking turn followed optionally by a role run.
        let other = prop_oneof![Just("Anna"), Just("Bruno"), Just("Cara")];
        let block = (
            other,
            proptest::option::of((any::<bool>(), 1usize..3)),
            0u32..1000,
        );
        proptest::collection::vec(block, 1..8).prop_map(|blocks| {
            let mut turns = Vec::new();
            let mut k = 0;
            let mut has_role = false;
            for (speaker, run, salt) in blocks {
                turns.push(Turn::speaking(speaker, format!("line {k} {salt}")).unwrap());
                k += 1;
                if let Some((with_thought, n_speak)) = run {
                    has_role = true;
                    if with_thought {
                        turns.push(Turn::thinking("Role", format!("thought {k}")).unwrap());
                        k += 1;
                    }
                    for _ in 0..n_speak {
                        turns.push(Turn::speaking("Role", format!("reply {k}")).unwrap());
                        k += 1;
                    }
                }
            }
            if !has_role {
                turns.push(Turn::speaking("Role", "closing reply").unwrap());
            }
            Dialogue::new("d0", "r", Some("s".into()), DialogueOrigin::Mimic, turns, "Role")
                .unwrap()
        })
    }

    proptest! {
        /// extract_pairs count equals the independent run-count oracle, and
        /// every pair satisfies the pair invariants.
        #[test]
        fn pair_count_matches_oracle(dialogue in valid_dialogue_strategy()) {
            let pairs = extract_pairs(&dialogue, "Role");
            prop_assert_eq!(pairs.len(), oracle_pair_count(&dialogue, "Role"));
            for pair in &pairs {
                prop_assert!(pair.validate("Role").is_ok());
                prop_assert!(pair.context.iter().all(|t| t.text != pair.response.text));
            }
        }

        /// parse_script(render_script(d)) reproduces d exactly.
        #[test]
        fn script_round_trip(dialogue in valid_dialogue_strategy()) {
            let mut p = profile();
            p.role_id = "r".into();
            p.name = "Role".into();
            p.aliases.clear();
            let script = render_script(&dialogue);
            let parsed = parse_script(&script, &p, "d0", Some("s".into()), DialogueOrigin::Mimic)
                .unwrap();
            prop_assert_eq!(parsed.dialogue.turns, dialogue.turns);
        }
    }
}
