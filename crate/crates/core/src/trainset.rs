//! Training-record assembly and emission.
//!
//! Records follow the instruction/input/output layout with an always-empty
//! `input`. The instruction stacks, in order: the act-like preamble, the
//! profile summary, the scenario, the thinking-output directive, the
//! unfamiliarity directive, and the interaction turns. The output holds the
//! role's thinking line, its speaking line, and an end-of-unit separator,
//! plus the next non-role turn when the dialogue continues.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::cache::{atomic_write, sha256_hex};
use crate::corpus::types::{
    DialoguePair, HallucinationProbe, LanguageTag, RoleProfile, Scene, Turn, TurnAction,
};
use crate::error::{Error, Result};
use crate::tokens::estimate_tokens;

pub const DEFAULT_SEPARATOR: &str = "<|endoftext|>";
/// Instruction token budget, matching the training maximum sequence length.
pub const DEFAULT_INSTRUCTION_BUDGET: usize = 2_048;

/// One instruction/input/output unit, exactly as written to the train file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Dialogue,
    Probe,
}

/// A record plus the bookkeeping the emitter needs (never serialized into
/// the train file).
#[derive(Debug, Clone)]
pub struct KindedRecord {
    pub id: String,
    pub kind: RecordKind,
    pub record: TrainRecord,
}

// ── instruction assembly ───────────────────────────────────────────────────

/// Render the instruction, truncating context turns oldest-first when the
/// token budget overflows. The summary is never truncated; if the prompt
/// still overflows with zero context turns, assembly fails.
pub fn assemble_instruction(
    profile: &RoleProfile,
    scene_location: &str,
    scene_background: &str,
    context_turns: &[Turn],
    budget: usize,
) -> Result<String> {
    if profile.summary.trim().is_empty() {
        return Err(Error::validation("profile summary is empty"));
    }
    if scene_background.trim().is_empty() {
        return Err(Error::validation("scenario background is empty"));
    }
    let mut kept: Vec<&Turn> = context_turns
        .iter()
        .filter(|t| t.action == TurnAction::Speaking)
        .collect();
    loop {
        let rendered = render_instruction(profile, scene_location, scene_background, &kept);
        if estimate_tokens(&rendered) <= budget {
            return Ok(rendered);
        }
        if kept.is_empty() {
            return Err(Error::validation(format!(
                "instruction exceeds the {budget}-token budget even with no context turns"
            )));
        }
        kept.remove(0);
    }
}

fn render_instruction(
    profile: &RoleProfile,
    scene_location: &str,
    scene_background: &str,
    context_turns: &[&Turn],
) -> String {
    let name = &profile.name;
    let mut interactions = String::new();
    for turn in context_turns {
        interactions.push_str(&turn.render());
        interactions.push('\n');
    }
    format!(
        "I want you to act like {name}, I want you to respond and answer like {name}. \
Using the tone, manner and vocabulary {name} would use. \n\
You must know all of the knowledge of {name}. \n\
Summary of {name}: \n\
{summary}\n\
The scenario is as follows: \n\
Location: {scene_location}\n\
{scene_background}\n\
I want you to respond by first thinking about the character relationships and \
exporting your thoughts in a way that '{name} (thinking): ' then generates dialogue \
responses based on those thoughts. \n\
If you think the current dialogue is beyond {name}'s knowledge, please say that you \
are unfamiliar with the thing. \n\
The interactions are as follows: \n\
{interactions}",
        summary = profile.summary,
    )
}

// ── record assembly ────────────────────────────────────────────────────────

/// Synthetic scenario block for probe records, which have no corpus scene.
pub fn probe_scene(profile: &RoleProfile) -> (String, String) {
    (
        format!("A quiet room where {} receives a curious visitor", profile.name),
        format!(
            "A stranger has sought out {} and presses him with questions about \
matters no one of his time could know.",
            profile.name
        ),
    )
}

/// Deterministic refusal rationale used as the thinking line of probe
/// records when rationale thoughts are enabled.
pub fn probe_rationale(profile: &RoleProfile) -> Turn {
    Turn {
        speaker: profile.name.clone(),
        action: TurnAction::Thinking,
        text: "They ask of things far beyond my world; I sense a trap laid in the question. \
Honesty about my ignorance serves me better than invention."
            .to_string(),
    }
}

/// Who voices probe questions inside the instruction's interactions block.
pub const PROBE_INTERROGATOR: &str = "Stranger";

/// Assemble a record from an annotated dialogue pair. `followup` is the
/// non-role turn right after the pair's response, when the dialogue
/// continues.
pub fn assemble_pair_record(
    pair: &DialoguePair,
    profile: &RoleProfile,
    scene: &Scene,
    followup: Option<&Turn>,
    separator: &str,
    budget: usize,
) -> Result<KindedRecord> {
    let thought = pair.thought.as_ref().ok_or_else(|| {
        Error::validation(format!(
            "pair {} lacks a thought; run the thought stage first",
            pair.pair_id
        ))
    })?;
    pair.validate(&profile.name)?;
    let mut interaction_context: Vec<Turn> = pair.context.clone();
    interaction_context.push(pair.trigger.clone());
    let instruction = assemble_instruction(
        profile,
        &scene.location,
        &scene.background,
        &interaction_context,
        budget,
    )?;
    let name = &profile.name;
    let mut output = format!(
        "{name} (thinking):'{thought}' \n{name} (speaking):'{response}' {separator}",
        thought = thought.text,
        response = pair.response.text,
    );
    if let Some(next) = followup {
        output.push_str(&format!(
            "\n{} (speaking): '{}' {separator}",
            next.speaker, next.text
        ));
    }
    Ok(KindedRecord {
        id: pair.pair_id.clone(),
        kind: RecordKind::Dialogue,
        record: TrainRecord {
            instruction,
            input: String::new(),
            output,
        },
    })
}

/// Assemble a refusal record from a probe. When `with_rationale` is set the
/// output opens with a deterministic refusal-rationale thinking line.
pub fn assemble_probe_record(
    probe: &HallucinationProbe,
    profile: &RoleProfile,
    with_rationale: bool,
    separator: &str,
    budget: usize,
) -> Result<KindedRecord> {
    probe.validate()?;
    let (location, background) = probe_scene(profile);
    let trigger = Turn {
        speaker: PROBE_INTERROGATOR.to_string(),
        action: TurnAction::Speaking,
        text: probe.question.clone(),
    };
    let instruction = assemble_instruction(profile, &location, &background, &[trigger], budget)?;
    let name = &profile.name;
    let output = if with_rationale {
        let rationale = probe_rationale(profile);
        format!(
            "{name} (thinking):'{}' \n{name} (speaking):'{}' {separator}",
            rationale.text, probe.refusal
        )
    } else {
        format!("{name} (speaking):'{}' {separator}", probe.refusal)
    };
    Ok(KindedRecord {
        id: probe.probe_id.clone(),
        kind: RecordKind::Probe,
        record: TrainRecord {
            instruction,
            input: String::new(),
            output,
        },
    })
}

// ── emission ───────────────────────────────────────────────────────────────

/// Train-file statistics in the shape of the per-role dataset summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub records: usize,
    pub sentences: usize,
    pub average_words_per_sentence: f64,
    pub language: LanguageTag,
}

/// Count sentences by terminal punctuation (Latin and CJK); a trailing
/// unterminated chunk counts as one sentence.
pub fn count_sentences(text: &str) -> usize {
    const TERMINATORS: &[char] = &['.', '!', '?', '。', '！', '？'];
    let mut count = 0;
    let mut has_content = false;
    for c in text.chars() {
        if TERMINATORS.contains(&c) {
            if has_content {
                count += 1;
                has_content = false;
            }
        } else if !c.is_whitespace() {
            has_content = true;
        }
    }
    if has_content {
        count += 1;
    }
    count
}

fn order_key(seed: u64, id: &str) -> String {
    sha256_hex(format!("{seed}:{id}").as_bytes())
}

/// Write the train file: line-delimited JSON with keys exactly
/// instruction/input/output, deterministically shuffled by seed. Returns
/// the stats block for the manifest.
pub fn emit_trainset(
    records: &[KindedRecord],
    path: &Path,
    shuffle_seed: u64,
    language: LanguageTag,
) -> Result<TrainStats> {
    if records.is_empty() {
        return Err(Error::validation("no records to emit"));
    }
    let mut ordered: Vec<&KindedRecord> = records.iter().collect();
    ordered.sort_by_key(|r| order_key(shuffle_seed, &r.id));

    let mut body = String::new();
    let mut sentences = 0usize;
    let mut words = 0usize;
    for kinded in &ordered {
        let line = serde_json::to_string(&kinded.record)
            .map_err(|e| Error::validation(format!("record serialization: {e}")))?;
        body.push_str(&line);
        body.push('\n');
        let full = format!("{}\n{}", kinded.record.instruction, kinded.record.output);
        sentences += count_sentences(&full);
        words += full.split_whitespace().count();
    }
    atomic_write(path, body.as_bytes())?;
    let average = if sentences == 0 {
        0.0
    } else {
        words as f64 / sentences as f64
    };
    Ok(TrainStats {
        records: records.len(),
        sentences,
        average_words_per_sentence: average,
        language,
    })
}

// ── manifest ───────────────────────────────────────────────────────────────

/// Adapter-training hyperparameter manifest plus dataset bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub base_model_hint: String,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub epochs: u32,
    pub max_sequence_length: u32,
    pub adapter_rank: u32,
    pub adapter_alpha: u32,
    pub optimizer_name: String,
    pub separator_token: String,
    pub shuffle_seed: u64,
    /// Fields the operator overrode away from the defaults.
    pub overridden: Vec<String>,
    pub record_counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<TrainStats>,
}

impl Default for TrainManifest {
    fn default() -> Self {
        TrainManifest {
            base_model_hint: String::new(),
            batch_size: 64,
            learning_rate: 5e-5,
            epochs: 10,
            max_sequence_length: 2_048,
            adapter_rank: 8,
            adapter_alpha: 16,
            optimizer_name: "AdamW".to_string(),
            separator_token: DEFAULT_SEPARATOR.to_string(),
            shuffle_seed: 0,
            overridden: Vec::new(),
            record_counts: BTreeMap::new(),
            stats: None,
        }
    }
}

/// Operator overrides for the manifest defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ManifestOverrides {
    pub base_model_hint: Option<String>,
    pub batch_size: Option<u32>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<u32>,
    pub max_sequence_length: Option<u32>,
    pub adapter_rank: Option<u32>,
    pub adapter_alpha: Option<u32>,
    pub optimizer_name: Option<String>,
    pub separator_token: Option<String>,
}

/// Build a manifest from the defaults plus overrides, recording which
/// fields were overridden.
pub fn build_manifest(overrides: &ManifestOverrides) -> Result<TrainManifest> {
    let mut manifest = TrainManifest::default();
    let mut overridden = Vec::new();
    if let Some(v) = &overrides.base_model_hint {
        manifest.base_model_hint = v.clone();
        overridden.push("base_model_hint".to_string());
    }
    if let Some(v) = overrides.batch_size {
        manifest.batch_size = v;
        overridden.push("batch_size".to_string());
    }
    if let Some(v) = overrides.learning_rate {
        manifest.learning_rate = v;
        overridden.push("learning_rate".to_string());
    }
    if let Some(v) = overrides.epochs {
        manifest.epochs = v;
        overridden.push("epochs".to_string());
    }
    if let Some(v) = overrides.max_sequence_length {
        manifest.max_sequence_length = v;
        overridden.push("max_sequence_length".to_string());
    }
    if let Some(v) = overrides.adapter_rank {
        manifest.adapter_rank = v;
        overridden.push("adapter_rank".to_string());
    }
    if let Some(v) = overrides.adapter_alpha {
        manifest.adapter_alpha = v;
        overridden.push("adapter_alpha".to_string());
    }
    if let Some(v) = &overrides.optimizer_name {
        manifest.optimizer_name = v.clone();
        overridden.push("optimizer_name".to_string());
    }
    if let Some(v) = &overrides.separator_token {
        manifest.separator_token = v.clone();
        overridden.push("separator_token".to_string());
    }
    manifest.overridden = overridden;
    validate_manifest(&manifest)?;
    Ok(manifest)
}

fn validate_manifest(m: &TrainManifest) -> Result<()> {
    if m.learning_rate <= 0.0 {
        return Err(Error::validation("learning_rate must be positive"));
    }
    for (name, value) in [
        ("batch_size", m.batch_size),
        ("epochs", m.epochs),
        ("max_sequence_length", m.max_sequence_length),
        ("adapter_rank", m.adapter_rank),
        ("adapter_alpha", m.adapter_alpha),
    ] {
        if value == 0 {
            return Err(Error::validation(format!("{name} must be positive")));
        }
    }
    if m.separator_token.is_empty() {
        return Err(Error::validation("separator_token must be non-empty"));
    }
    Ok(())
}

pub fn write_manifest(manifest: &TrainManifest, path: &Path) -> Result<()> {
    let body = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::validation(format!("manifest serialization: {e}")))?;
    atomic_write(path, body.as_bytes())
}

// ── audit ──────────────────────────────────────────────────────────────────

/// Violations found while auditing an emitted train file.
#[derive(Debug, Clone, Default)]
pub struct RecordAudit {
    pub records: usize,
    /// Records whose output opens with the role thinking line.
    pub thinking_prefixed: usize,
    pub violations: Vec<String>,
}

impl RecordAudit {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Instruction block markers, in required order.
fn instruction_markers(name: &str) -> [String; 6] {
    [
        "I want you to act like".to_string(),
        format!("Summary of {name}:"),
        "The scenario is as follows:".to_string(),
        "respond by first thinking".to_string(),
        "you are unfamiliar with the thing".to_string(),
        "The interactions are as follows:".to_string(),
    ]
}

fn audit_one(record: &TrainRecord, name: &str, separator: &str, lineno: usize) -> Vec<String> {
    let mut violations = Vec::new();
    let mut push = |msg: String| violations.push(format!("record {lineno}: {msg}"));

    if !record.input.is_empty() {
        push("input is not empty".to_string());
    }
    let mut cursor = 0usize;
    for marker in instruction_markers(name) {
        match record.instruction[cursor..].find(&marker) {
            Some(offset) => cursor += offset + marker.len(),
            None => push(format!("instruction lacks ordered block {marker:?}")),
        }
    }
    let interactions = record
        .instruction
        .split("The interactions are as follows:")
        .nth(1)
        .unwrap_or("");
    if !interactions.contains("(speaking):") {
        push("interactions block has no speaking turn".to_string());
    }
    if !record.output.trim_end().ends_with(separator) {
        push("output does not end with the separator".to_string());
    }
    let role_speaking = format!("{name} (speaking):");
    let speaking_count = record.output.matches(&role_speaking).count();
    if speaking_count != 1 {
        push(format!(
            "output carries {speaking_count} role speaking lines instead of 1"
        ));
    }
    let role_thinking = format!("{name} (thinking):");
    let thinking_count = record.output.matches(&role_thinking).count();
    if thinking_count > 1 {
        push("output carries more than one thinking line".to_string());
    }
    if thinking_count == 1 && !record.output.starts_with(&role_thinking) {
        push("thinking line is not at the start of the output".to_string());
    }
    // Separator placement: each non-empty unit between separators must hold
    // exactly one speaking line, and nothing may trail the final separator.
    let units: Vec<&str> = record.output.split(separator).collect();
    match units.last() {
        Some(tail) if !tail.trim().is_empty() => {
            push("content after the final separator".to_string())
        }
        _ => {}
    }
    for unit in &units[..units.len().saturating_sub(1)] {
        if unit.matches("(speaking):").count() != 1 {
            push(format!(
                "separator unit does not hold exactly one speaking line: {unit:?}"
            ));
        }
    }
    violations
}

/// Round-trip audit over an emitted train file: every line must parse back
/// into a record satisfying all record invariants.
pub fn audit_train_file(path: &Path, role_name: &str, separator: &str) -> Result<RecordAudit> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut audit = RecordAudit::default();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TrainRecord = serde_json::from_str(line).map_err(|e| {
            Error::parse(format!("train file line {}: {e}", i + 1))
        })?;
        audit.records += 1;
        if record.output.starts_with(&format!("{role_name} (thinking):")) {
            audit.thinking_prefixed += 1;
        }
        audit
            .violations
            .extend(audit_one(&record, role_name, separator, i + 1));
    }
    if audit.records == 0 {
        return Err(Error::validation(format!(
            "train file {} holds no records",
            path.display()
        )));
    }
    Ok(audit)
}
