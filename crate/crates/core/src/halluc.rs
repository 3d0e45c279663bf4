//! Knowledge-boundary probes: indirect questions about things the role
//! cannot know, paired with in-voice refusals for negative-sample training.

use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::types::{HallucinationProbe, RoleProfile, UNFAMILIARITY_CUES};
use crate::error::{Error, Result};
use crate::gateway::ChatMessage;

pub const DEFAULT_PROBE_COUNT: usize = 20;
/// Probe records may make up at most this share of a trainset.
pub const DEFAULT_PROBE_CAP: f64 = 0.05;

/// One anachronism topic with its term lexicon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub name: String,
    pub terms: Vec<String>,
}

/// Parse a topic lexicon file: one topic per line, `topic<TAB>term,term,...`.
pub fn parse_topic_lexicon(raw: &str) -> Result<Vec<Topic>> {
    let mut topics = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, terms) = line.split_once('\t').ok_or_else(|| {
            Error::parse(format!(
                "topic lexicon line {}: expected 'topic<TAB>term,term,...'",
                lineno + 1
            ))
        })?;
        let terms: Vec<String> = terms
            .split(',')
            .map(|t| t.trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        if name.trim().is_empty() || terms.is_empty() {
            return Err(Error::parse(format!(
                "topic lexicon line {}: empty topic or term list",
                lineno + 1
            )));
        }
        topics.push(Topic {
            name: name.trim().to_string(),
            terms,
        });
    }
    if topics.is_empty() {
        return Err(Error::validation("topic lexicon holds no topics"));
    }
    Ok(topics)
}

pub fn load_topic_lexicon(path: &Path) -> Result<Vec<Topic>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_topic_lexicon(&raw)
}

fn question_count_phrase(count: usize) -> String {
    if count == 1 {
        "1 question".to_string()
    } else {
        format!("{count} questions")
    }
}

/// Prompt asking for indirect out-of-knowledge questions across the given
/// topics.
pub fn build_probe_prompt(
    profile: &RoleProfile,
    topics: &[Topic],
    probe_count: usize,
) -> Result<Vec<ChatMessage>> {
    if probe_count < 1 {
        return Err(Error::validation("probe_count must be at least 1"));
    }
    if topics.is_empty() {
        return Err(Error::validation("topic list is empty"));
    }
    let name = &profile.name;
    let mut topic_block = String::new();
    for topic in topics {
        let _ = writeln!(topic_block, "- {}: {}", topic.name, topic.terms.join(", "));
    }
    let prompt = format!(
        "Summary of {name}: \n\
{summary}\n\
***\n\
Recently a group of {name} imitators have appeared on the Internet, and you are so \
disgusted that you wish to dismantle them by inducing the person to say something \
beyond {name}'s knowledge. Next, please write {count} that will lead them to make \
a mistake. \n\
Draw on the following topics, all beyond {name}'s knowledge:\n\
{topic_block}\
Ask in an indirect manner that slips the unknown thing into an otherwise natural \
question, for example \"Maestro, your Ninth Symphony is a marvel. Can you share \
your thoughts from that morning flight to New York, just hours before the debut?\" \
rather than a direct question like \"Do you know what an airplane is?\".\n\
Number each question on its own line.",
        summary = profile.summary,
        count = question_count_phrase(probe_count),
    );
    Ok(vec![ChatMessage::user(prompt)])
}

/// Warnings surfaced while parsing a probe completion.
#[derive(Debug, Clone)]
pub struct ProbeWarnings {
    pub direct_questions: Vec<String>,
}

fn numbered_item(line: &str) -> Option<String> {
    let trimmed = line.trim();
    let digits: String = trimmed.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    let rest = trimmed[digits.len()..]
        .trim_start_matches(['.', ')', ':'])
        .trim();
    if rest.is_empty() {
        None
    } else {
        Some(rest.to_string())
    }
}

fn is_direct_question(question: &str) -> bool {
    let folded = question.trim().to_lowercase();
    folded.starts_with("do you know") || folded.starts_with("have you heard of")
}

fn topic_for_question<'a>(question: &str, topics: &'a [Topic], ordinal: usize) -> &'a Topic {
    let folded = question.to_lowercase();
    topics
        .iter()
        .find(|topic| topic.terms.iter().any(|term| folded.contains(term.as_str())))
        .unwrap_or(&topics[ordinal % topics.len()])
}

/// Parse numbered-list items into probes, instantiating each refusal from
/// the role's template. Direct questions are kept but flagged.
pub fn parse_probes(
    completion: &str,
    profile: &RoleProfile,
    topics: &[Topic],
) -> Result<(Vec<HallucinationProbe>, ProbeWarnings)> {
    if completion.trim().is_empty() {
        return Err(Error::parse("empty completion"));
    }
    if topics.is_empty() {
        return Err(Error::validation("topic list is empty"));
    }
    let mut probes = Vec::new();
    let mut warnings = ProbeWarnings {
        direct_questions: Vec::new(),
    };
    for line in completion.lines() {
        let Some(question) = numbered_item(line) else {
            continue;
        };
        let ordinal = probes.len();
        let topic = topic_for_question(&question, topics, ordinal);
        let flagged_direct = is_direct_question(&question);
        let probe_id = format!("pr-{ordinal:03}");
        let refusal = render_refusal(profile, &question, topic);
        if flagged_direct {
            warnings.direct_questions.push(probe_id.clone());
            log::warn!("probe {probe_id} is phrased directly: {question:?}");
        }
        let probe = HallucinationProbe {
            probe_id,
            role_id: profile.role_id.clone(),
            question,
            anachronism_topic: topic.name.clone(),
            refusal,
            flagged_direct,
        };
        probe.validate()?;
        probes.push(probe);
    }
    if probes.is_empty() {
        return Err(Error::parse_with_raw(
            "no numbered question items found in completion",
            completion,
        ));
    }
    Ok((probes, warnings))
}

/// Refusal templates: an unfamiliarity statement plus an in-era deflection.
/// The template never names the anachronism affirmatively.
const REFUSAL_TEMPLATES: &[&str] = &[
    "I must confess this {topic} you speak of is wholly unfamiliar to me. I have never seen such a thing, and I will not pretend otherwise; let us speak instead of matters I know.",
    "Of this {topic} I know nothing; no such thing exists in the world I have lived. Ask me rather of what my own days have taught me.",
    "Forgive me, but this {topic} you describe is unknown to me; nothing of it has ever crossed my path, and I would sooner admit my ignorance than invent an answer.",
];

/// Deterministic refusal in the role's voice for a probe question.
pub fn render_refusal(profile: &RoleProfile, question: &str, topic: &Topic) -> String {
    // Deterministic template choice: stable hash over the question bytes.
    let idx = question
        .bytes()
        .fold(0usize, |acc, b| acc.wrapping_mul(31).wrapping_add(b as usize))
        % REFUSAL_TEMPLATES.len();
    let _ = profile;
    REFUSAL_TEMPLATES[idx].replace("{topic}", &topic.name)
}

/// Scan-based refusal check: every lexicon term occurring in the refusal
/// must sit in a sentence that carries an unfamiliarity or negation cue;
/// a term explained affirmatively fails.
pub fn validate_refusal(refusal: &str, topic: &Topic) -> Result<()> {
    let folded = refusal.to_lowercase();
    let sentences: Vec<&str> = folded
        .split_inclusive(['.', '!', '?'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    for term in &topic.terms {
        for sentence in &sentences {
            if !sentence.contains(term.as_str()) {
                continue;
            }
            let negated = UNFAMILIARITY_CUES
                .iter()
                .any(|cue| sentence.contains(cue))
                || sentence.contains(" not ")
                || sentence.contains("no such");
            if !negated {
                return Err(Error::validation(format!(
                    "refusal uses the term {term:?} affirmatively: {sentence:?}"
                )));
            }
        }
    }
    Ok(())
}

/// Largest probe count whose records keep `probes/(dialogues+probes)` at or
/// below `cap`.
pub fn max_probes_under_cap(dialogue_records: usize, cap: f64) -> usize {
    if !(0.0..1.0).contains(&cap) {
        return 0;
    }
    ((dialogue_records as f64) * cap / (1.0 - cap)).floor() as usize
}
