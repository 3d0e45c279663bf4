//! Thought annotation: generating the pre-response thinking turn for each
//! dialogue pair.
//!
//! The prompt shows the judge-visible dialogue (context, trigger, and the
//! already-articulated response) because the thought conditions on what the
//! role actually said; annotation never rewrites the response itself.

use crate::corpus::types::{DialoguePair, RoleProfile, Scene, Turn, TurnAction};
use crate::error::{Error, Result};
use crate::gateway::ChatMessage;

/// Hard cap on thought length; longer completions truncate at a sentence
/// boundary.
pub const MAX_THOUGHT_WORDS: usize = 120;

/// Prompt asking for the role's thought process before its response.
pub fn build_thought_prompt(
    profile: &RoleProfile,
    scene: &Scene,
    pair: &DialoguePair,
) -> Result<Vec<ChatMessage>> {
    if pair.thought.is_some() {
        return Err(Error::validation(format!(
            "pair {} is already annotated",
            pair.pair_id
        )));
    }
    pair.validate(&profile.name)?;
    if scene.role_id != profile.role_id {
        return Err(Error::validation(format!(
            "scene {} belongs to role {}, not {}",
            scene.scene_id, scene.role_id, profile.role_id
        )));
    }
    let name = &profile.name;
    let mut dialogue_lines: Vec<String> = Vec::new();
    for turn in &pair.context {
        if turn.action == TurnAction::Speaking {
            dialogue_lines.push(turn.render());
        }
    }
    dialogue_lines.push(pair.trigger.render());
    dialogue_lines.push(pair.response.render());
    let prompt = format!(
        "The current scene is:\n\
Location: {location}\n\
{background}\n\
{dialogues}\n\
Please briefly outline the thought process of {name} as they articulate their \
current dialogue. It shouldn't be too long. Pay attention to {name}'s personality \
and knowledge, and try to mimic {name}'s tone and character. Also, consider the \
relationships between the characters and the relationships mentioned in the \
dialogue. Based on your understanding of {name}, speculate on their thought \
process, keeping character relationships in mind. Please note that the thought \
process you give is the key to guiding him in generating the dialogue, and that \
his responses depend on the responses you give. Please be as comprehensive as \
possible, but keep it short.\n\
Begin with {name} (thinking).  \n\
{name} (thinking):",
        location = scene.location,
        background = scene.background,
        dialogues = dialogue_lines.join("\n"),
    );
    Ok(vec![ChatMessage::user(prompt)])
}

/// Sentence-boundary characters shared with the trainset statistics.
pub const SENTENCE_TERMINATORS: &[char] = &['.', '!', '?', '。', '！', '？'];

/// Truncate to at most `max_words`, preferring the last sentence boundary
/// inside the window; falls back to a hard word cut.
fn truncate_at_sentence(text: &str, max_words: usize) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.len() <= max_words {
        return text.trim().to_string();
    }
    let window = words[..max_words].join(" ");
    match window.rfind(|c| SENTENCE_TERMINATORS.contains(&c)) {
        Some(pos) => window[..=pos].trim().to_string(),
        None => window,
    }
}

/// Parse a thought completion into a thinking turn by the role.
///
/// A leading `<name> (thinking):` echo is stripped when present; completions
/// that try to speak for the character are rejected.
pub fn parse_thought(completion: &str, role_name: &str) -> Result<Turn> {
    if completion.trim().is_empty() {
        return Err(Error::parse("empty completion"));
    }
    if completion.contains("(speaking):") {
        return Err(Error::parse_with_raw(
            "thought completion contains a speaking turn",
            completion,
        ));
    }
    let mut text = completion.trim();
    let prefix = format!("{role_name} (thinking):");
    if let Some(rest) = text.strip_prefix(&prefix) {
        text = rest.trim();
    } else if let Some(rest) = text.strip_prefix("(thinking):") {
        text = rest.trim();
    }
    if text.is_empty() {
        return Err(Error::parse("thought is empty after stripping the prefix"));
    }
    let text = truncate_at_sentence(&text.split_whitespace().collect::<Vec<_>>().join(" "), MAX_THOUGHT_WORDS);
    Turn::thinking(role_name, text)
}

/// Attach a thought to a pair, write-once. Returns a new pair; the original
/// is untouched.
pub fn annotate_pair(pair: &DialoguePair, thought: Turn, role_name: &str) -> Result<DialoguePair> {
    if pair.thought.is_some() {
        return Err(Error::validation(format!(
            "pair {} is already annotated",
            pair.pair_id
        )));
    }
    if thought.speaker != role_name || thought.action != TurnAction::Thinking {
        return Err(Error::validation(format!(
            "thought for pair {} must be a thinking turn by {role_name}",
            pair.pair_id
        )));
    }
    let mut annotated = pair.clone();
    annotated.thought = Some(thought);
    annotated.validate(role_name)?;
    Ok(annotated)
}

/// Completeness audit: ids of pairs still lacking a thought.
pub fn unannotated_pairs(pairs: &[DialoguePair]) -> Vec<String> {
    pairs
        .iter()
        .filter(|p| p.thought.is_none())
        .map(|p| p.pair_id.clone())
        .collect()
}
