//! Stage drivers shared by the CLI and the test suites.
//!
//! Each function loads what it needs from the workspace, talks to the
//! gateway, and persists its outputs, so stages are independently
//! re-runnable. Re-running a completed stage with an unchanged workspace is
//! a no-op: completions come back from the cache and record files are
//! rewritten byte-identically.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::concurrency::parallel_map;
use crate::corpus::profile::{build_profile, read_profile_dir};
use crate::corpus::segment::{normalize_ws, segment_life_experience};
use crate::corpus::types::{Dialogue, DialogueOrigin, DialoguePair, Scene, SceneOrigin};
use crate::corpus::workspace::{init_workspace, Workspace};
use crate::dialogue::{build_dialogue_prompt, extract_pairs, followup_turn, parse_script};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate, judge_transcripts, load_question_bank, run_multi_turn, run_single_turn,
    JudgeVerdict, Metric, MetricReport, MultiTurnOutcome, Transcript, MULTI_TURN_ROUNDS,
};
use crate::gateway::{ChatMessage, Gateway, MockRule, SamplingParams};
use crate::halluc::{
    build_probe_prompt, load_topic_lexicon, max_probes_under_cap, parse_probes, validate_refusal,
    Topic, DEFAULT_PROBE_CAP,
};
use crate::scenario::{
    build_real_dialogue_scene_prompt, build_segment_scene_prompt, parse_scenes,
    validate_scene_against_dialogue, SceneCheck,
};
use crate::thought::{annotate_pair, build_thought_prompt, parse_thought, unannotated_pairs};
use crate::trainset::{
    assemble_pair_record, assemble_probe_record, audit_train_file, build_manifest, emit_trainset,
    write_manifest, KindedRecord, ManifestOverrides, DEFAULT_INSTRUCTION_BUDGET,
    DEFAULT_SEPARATOR,
};

pub const DEFAULT_MAX_SEGMENT_CHARS: usize = 1_800;

// ── ingest ─────────────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub role_id: String,
    pub sections: usize,
    pub segments: usize,
    pub authentic_dialogues: usize,
    pub summary_generated: bool,
}

/// Build a role workspace from a profile directory: profile, life segments,
/// and any authentic dialogues shipped as script files under `dialogues/`.
pub fn ingest(
    root: &Path,
    role_id: &str,
    profile_dir: &Path,
    gateway: Option<&Gateway>,
    summary_budget: usize,
    max_segment_chars: usize,
) -> Result<IngestReport> {
    let ws = init_workspace(root, role_id)?;
    let source = read_profile_dir(profile_dir)?;
    let summary_generated = source.supplied_summary.is_none();
    let mut summarize = |instruction: &str| -> Result<String> {
        let gw = gateway.ok_or_else(|| {
            Error::validation(
                "no summary.txt supplied and no backend configured to generate one",
            )
        })?;
        gw.complete(
            &[ChatMessage::user(instruction)],
            &SamplingParams::generation(),
        )
    };
    let profile = build_profile(role_id, source, summary_budget, &mut summarize)?;
    let segments = segment_life_experience(&profile, max_segment_chars)?;

    let mut authentic = Vec::new();
    let scripts_dir = profile_dir.join("dialogues");
    if scripts_dir.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(&scripts_dir)
            .map_err(|e| Error::io(&scripts_dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().map(|x| x == "txt").unwrap_or(false))
            .collect();
        files.sort();
        for (i, path) in files.iter().enumerate() {
            let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let parsed = parse_script(
                &raw,
                &profile,
                &format!("a-{i:03}"),
                None,
                DialogueOrigin::Authentic,
            )
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
            authentic.push(parsed.dialogue);
        }
    }

    ws.save_profile(&profile)?;
    ws.save_segments(&segments)?;
    if !authentic.is_empty() {
        ws.save_dialogues(&authentic)?;
    }
    Ok(IngestReport {
        role_id: role_id.to_string(),
        sections: profile.sections.len(),
        segments: segments.len(),
        authentic_dialogues: authentic.len(),
        summary_generated,
    })
}

// ── scene generation ───────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct SceneStageReport {
    pub scenes: usize,
    pub dropped: usize,
    pub shortfall: usize,
}

pub fn gen_scenes(
    ws: &Workspace,
    gateway: &Arc<Gateway>,
    scene_count: usize,
    concurrency: usize,
) -> Result<SceneStageReport> {
    let profile = ws.load_profile()?;
    let segments = ws.load_segments()?;
    if segments.is_empty() {
        return Err(Error::validation(
            "no life segments in the workspace; run ingest first",
        ));
    }
    let results = parallel_map(segments, concurrency, |segment| -> Result<_> {
        let prompt = build_segment_scene_prompt(&profile, segment, scene_count)?;
        let completion = gateway.complete(&prompt, &SamplingParams::generation())?;
        parse_scenes(
            &completion,
            &profile.role_id,
            SceneOrigin::SegmentDerived,
            Some(segment.segment_index),
            scene_count,
        )
    });
    let mut scenes = Vec::new();
    let mut dropped = 0;
    let mut shortfall = 0;
    for result in results {
        let parsed = result?;
        dropped += parsed.dropped.len();
        shortfall += parsed.shortfall.unwrap_or(0);
        scenes.extend(parsed.scenes);
    }
    // Keep any real-dialogue scenes from a previous stage run.
    let existing = ws.load_scenes()?;
    scenes.extend(
        existing
            .into_iter()
            .filter(|s| s.origin == SceneOrigin::RealDialogueDerived),
    );
    let report = SceneStageReport {
        scenes: scenes.len(),
        dropped,
        shortfall,
    };
    ws.save_scenes(&scenes)?;
    Ok(report)
}

// ── dialogue generation + pair extraction ──────────────────────────────────

#[derive(Debug, Clone)]
pub struct DialogueStageReport {
    pub mimic_dialogues: usize,
    pub authentic_dialogues: usize,
    pub pairs: usize,
    pub below_min_words: usize,
}

pub fn gen_dialogues(
    ws: &Workspace,
    gateway: &Arc<Gateway>,
    exemplar_cap: usize,
    concurrency: usize,
) -> Result<DialogueStageReport> {
    gen_dialogues_with_options(ws, gateway, exemplar_cap, concurrency, false)
}

/// `regenerate_short`: scripts under the requested minimum length get one
/// cache-bypassing regeneration; the replacement is kept when it parses.
pub fn gen_dialogues_with_options(
    ws: &Workspace,
    gateway: &Arc<Gateway>,
    exemplar_cap: usize,
    concurrency: usize,
    regenerate_short: bool,
) -> Result<DialogueStageReport> {
    let profile = ws.load_profile()?;
    let scenes = ws.load_scenes()?;
    let seg_scenes: Vec<Scene> = scenes
        .iter()
        .filter(|s| s.origin == SceneOrigin::SegmentDerived)
        .cloned()
        .collect();
    if seg_scenes.is_empty() {
        return Err(Error::validation(
            "no scenes in the workspace; run gen-scenes first",
        ));
    }
    let existing = ws.load_dialogues()?;
    let exemplars: Vec<Dialogue> = existing
        .iter()
        .filter(|d| d.origin == DialogueOrigin::Authentic)
        .cloned()
        .collect();

    let results = parallel_map(seg_scenes, concurrency, |scene| -> Result<_> {
        let prompt = build_dialogue_prompt(&profile, scene, &exemplars, exemplar_cap)?;
        let completion = gateway.complete(&prompt, &SamplingParams::generation())?;
        let dialogue_id = format!("m-{}", scene.scene_id);
        let mut parsed = parse_script(
            &completion,
            &profile,
            &dialogue_id,
            Some(scene.scene_id.clone()),
            DialogueOrigin::Mimic,
        )?;
        if parsed.below_min_words && regenerate_short {
            let retry = gateway.complete_uncached(&prompt, &SamplingParams::generation())?;
            match parse_script(
                &retry,
                &profile,
                &dialogue_id,
                Some(scene.scene_id.clone()),
                DialogueOrigin::Mimic,
            ) {
                Ok(replacement) => parsed = replacement,
                Err(err) => log::warn!(
                    "regenerated script for {dialogue_id} failed to parse ({err}); keeping the short one"
                ),
            }
        }
        Ok(parsed)
    });

    let mut dialogues = exemplars.clone();
    let mut below_min_words = 0;
    for result in results {
        let parsed = result?;
        if parsed.below_min_words {
            below_min_words += 1;
            log::warn!(
                "dialogue {} is below the requested minimum length; kept (pass --regenerate-short to replace)",
                parsed.dialogue.dialogue_id
            );
        }
        dialogues.push(parsed.dialogue);
    }

    let mut pairs: Vec<DialoguePair> = Vec::new();
    for dialogue in &dialogues {
        pairs.extend(extract_pairs(dialogue, &profile.name));
    }
    // Keep thoughts already annotated on pairs from a previous run.
    let previous = ws.load_pairs()?;
    for pair in pairs.iter_mut() {
        if let Some(old) = previous.iter().find(|p| p.pair_id == pair.pair_id) {
            if old.thought.is_some()
                && old.trigger == pair.trigger
                && old.response == pair.response
            {
                pair.thought = old.thought.clone();
            }
        }
    }

    let report = DialogueStageReport {
        mimic_dialogues: dialogues
            .iter()
            .filter(|d| d.origin == DialogueOrigin::Mimic)
            .count(),
        authentic_dialogues: exemplars.len(),
        pairs: pairs.len(),
        below_min_words,
    };
    ws.save_dialogues(&dialogues)?;
    ws.save_pairs(&pairs)?;
    Ok(report)
}

// ── real-dialogue scenes ───────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct RealSceneStageReport {
    pub scenes: usize,
    pub leak_failures: usize,
}

pub fn gen_real_scenes(ws: &Workspace, gateway: &Arc<Gateway>) -> Result<RealSceneStageReport> {
    let profile = ws.load_profile()?;
    let mut dialogues = ws.load_dialogues()?;
    let pending: Vec<Dialogue> = dialogues
        .iter()
        .filter(|d| d.origin == DialogueOrigin::Authentic && d.scene_ref.is_none())
        .cloned()
        .collect();
    if pending.is_empty() {
        return Err(Error::validation(
            "no authentic dialogues awaiting scenes; ingest scripts first",
        ));
    }
    let mut scenes = ws.load_scenes()?;
    let mut made = 0;
    let mut leak_failures = 0;
    for dialogue in pending {
        let prompt = build_real_dialogue_scene_prompt(&profile, &dialogue)?;
        let mut completion = gateway.complete(&prompt, &SamplingParams::generation())?;
        let mut scene = take_first_scene(&completion, &profile.role_id, &dialogue)?;
        if let SceneCheck::Fail { reasons } = validate_scene_against_dialogue(&scene, &dialogue) {
            log::warn!(
                "scene for {} leaks dialogue content ({}); regenerating once",
                dialogue.dialogue_id,
                reasons.join("; ")
            );
            completion = gateway.complete_uncached(&prompt, &SamplingParams::generation())?;
            scene = take_first_scene(&completion, &profile.role_id, &dialogue)?;
            if let SceneCheck::Fail { reasons } = validate_scene_against_dialogue(&scene, &dialogue)
            {
                leak_failures += 1;
                log::warn!(
                    "scene for {} still leaks dialogue content ({}); dialogue left without a scene",
                    dialogue.dialogue_id,
                    reasons.join("; ")
                );
                continue;
            }
        }
        scenes.retain(|s| s.scene_id != scene.scene_id);
        if let Some(d) = dialogues
            .iter_mut()
            .find(|d| d.dialogue_id == dialogue.dialogue_id)
        {
            d.scene_ref = Some(scene.scene_id.clone());
        }
        scenes.push(scene);
        made += 1;
    }
    let report = RealSceneStageReport {
        scenes: made,
        leak_failures,
    };
    ws.save_scenes(&scenes)?;
    ws.save_dialogues(&dialogues)?;
    Ok(report)
}

fn take_first_scene(completion: &str, role_id: &str, dialogue: &Dialogue) -> Result<Scene> {
    let parsed = parse_scenes(completion, role_id, SceneOrigin::RealDialogueDerived, None, 1)?;
    let mut scene = parsed.scenes.into_iter().next().expect("non-empty by contract");
    scene.scene_id = format!("rd-{}", dialogue.dialogue_id);
    Ok(scene)
}

// ── thought annotation ─────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct ThoughtStageReport {
    pub annotated: usize,
    pub already_annotated: usize,
    pub missing_scene: usize,
}

pub fn gen_thoughts(
    ws: &Workspace,
    gateway: &Arc<Gateway>,
    concurrency: usize,
) -> Result<ThoughtStageReport> {
    let profile = ws.load_profile()?;
    let pairs = ws.load_pairs()?;
    if pairs.is_empty() {
        return Err(Error::validation(
            "no dialogue pairs in the workspace; run gen-dialogues first",
        ));
    }
    let dialogues = ws.load_dialogues()?;
    let scenes = ws.load_scenes()?;
    let scene_for = |pair: &DialoguePair| -> Option<Scene> {
        let dialogue = dialogues.iter().find(|d| d.dialogue_id == pair.dialogue_ref)?;
        let scene_id = dialogue.scene_ref.as_ref()?;
        scenes.iter().find(|s| &s.scene_id == scene_id).cloned()
    };

    let already_annotated = pairs.iter().filter(|p| p.thought.is_some()).count();
    let results = parallel_map(pairs, concurrency, |pair| -> Result<DialoguePair> {
        if pair.thought.is_some() {
            return Ok(pair.clone());
        }
        let Some(scene) = scene_for(pair) else {
            return Ok(pair.clone()); // counted below; scene arrives in a later stage
        };
        let prompt = build_thought_prompt(&profile, &scene, pair)?;
        let completion = gateway.complete(&prompt, &SamplingParams::generation())?;
        let thought = parse_thought(&completion, &profile.name)?;
        annotate_pair(pair, thought, &profile.name)
    });
    let mut annotated_pairs = Vec::new();
    for result in results {
        annotated_pairs.push(result?);
    }
    let missing_scene = annotated_pairs
        .iter()
        .filter(|p| p.thought.is_none())
        .count();
    let report = ThoughtStageReport {
        annotated: annotated_pairs.iter().filter(|p| p.thought.is_some()).count()
            - already_annotated,
        already_annotated,
        missing_scene,
    };
    if missing_scene > 0 {
        log::warn!(
            "{missing_scene} pairs still lack scenes; run gen-real-scenes then gen-thoughts again"
        );
    }
    ws.save_pairs(&annotated_pairs)?;
    Ok(report)
}

// ── probes ─────────────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct ProbeStageReport {
    pub probes: usize,
    pub flagged_direct: usize,
    pub refusal_scan_failures: usize,
}

pub fn gen_probes(
    ws: &Workspace,
    gateway: &Arc<Gateway>,
    topics_path: &Path,
    probe_count: usize,
) -> Result<ProbeStageReport> {
    let profile = ws.load_profile()?;
    let topics = load_topic_lexicon(topics_path)?;
    let prompt = build_probe_prompt(&profile, &topics, probe_count)?;
    let completion = gateway.complete(&prompt, &SamplingParams::generation())?;
    let (probes, warnings) = parse_probes(&completion, &profile, &topics)?;
    let mut refusal_scan_failures = 0;
    for probe in &probes {
        let topic = topics
            .iter()
            .find(|t| t.name == probe.anachronism_topic)
            .cloned()
            .unwrap_or(Topic {
                name: probe.anachronism_topic.clone(),
                terms: vec![],
            });
        if let Err(err) = validate_refusal(&probe.refusal, &topic) {
            refusal_scan_failures += 1;
            log::warn!("probe {}: {err}", probe.probe_id);
        }
    }
    let report = ProbeStageReport {
        probes: probes.len(),
        flagged_direct: warnings.direct_questions.len(),
        refusal_scan_failures,
    };
    ws.save_probes(&probes)?;
    Ok(report)
}

// ── trainset ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainsetStageReport {
    pub dialogue_records: usize,
    pub probe_records: usize,
    pub probes_excluded_by_cap: usize,
    pub sentences: usize,
}

pub struct TrainsetOptions {
    pub shuffle_seed: u64,
    pub probe_cap: f64,
    pub separator: String,
    pub instruction_budget: usize,
    pub probe_rationale_thoughts: bool,
    pub overrides: ManifestOverrides,
}

impl Default for TrainsetOptions {
    fn default() -> Self {
        TrainsetOptions {
            shuffle_seed: 0,
            probe_cap: DEFAULT_PROBE_CAP,
            separator: DEFAULT_SEPARATOR.to_string(),
            instruction_budget: DEFAULT_INSTRUCTION_BUDGET,
            probe_rationale_thoughts: true,
            overrides: ManifestOverrides::default(),
        }
    }
}

pub fn build_trainset(ws: &Workspace, options: &TrainsetOptions) -> Result<TrainsetStageReport> {
    let profile = ws.load_profile()?;
    let pairs = ws.load_pairs()?;
    if pairs.is_empty() {
        return Err(Error::validation(
            "no dialogue pairs in the workspace; run gen-dialogues first",
        ));
    }
    let dialogues = ws.load_dialogues()?;
    let scenes = ws.load_scenes()?;
    let unannotated = unannotated_pairs(&pairs);
    if !unannotated.is_empty() {
        let sceneless = pairs
            .iter()
            .filter(|p| p.thought.is_none())
            .filter(|p| {
                dialogues
                    .iter()
                    .find(|d| d.dialogue_id == p.dialogue_ref)
                    .map(|d| d.scene_ref.is_none())
                    .unwrap_or(false)
            })
            .count();
        let advice = if sceneless > 0 {
            format!("{sceneless} of them belong to dialogues without scenes; run gen-real-scenes, then gen-thoughts")
        } else {
            "run gen-thoughts first".to_string()
        };
        return Err(Error::validation(format!(
            "{} pairs lack thoughts (e.g. {}); {advice}",
            unannotated.len(),
            unannotated[0]
        )));
    }

    let mut records: Vec<KindedRecord> = Vec::new();
    for pair in &pairs {
        let dialogue = dialogues
            .iter()
            .find(|d| d.dialogue_id == pair.dialogue_ref)
            .ok_or_else(|| {
                Error::validation(format!(
                    "pair {} references missing dialogue {}",
                    pair.pair_id, pair.dialogue_ref
                ))
            })?;
        let scene_id = dialogue.scene_ref.as_ref().ok_or_else(|| {
            Error::validation(format!(
                "dialogue {} has no scene; run gen-real-scenes first",
                dialogue.dialogue_id
            ))
        })?;
        let scene = scenes
            .iter()
            .find(|s| &s.scene_id == scene_id)
            .ok_or_else(|| {
                Error::validation(format!(
                    "dialogue {} references missing scene {scene_id}",
                    dialogue.dialogue_id
                ))
            })?;
        let follow = followup_turn(dialogue, pair, &profile.name);
        records.push(assemble_pair_record(
            pair,
            &profile,
            scene,
            follow,
            &options.separator,
            options.instruction_budget,
        )?);
    }
    let dialogue_records = records.len();

    let probes = ws.load_probes()?;
    let allowed = max_probes_under_cap(dialogue_records, options.probe_cap);
    let included = probes.len().min(allowed);
    for probe in probes.iter().take(included) {
        records.push(assemble_probe_record(
            probe,
            &profile,
            options.probe_rationale_thoughts,
            &options.separator,
            options.instruction_budget,
        )?);
    }
    let excluded = probes.len() - included;
    if excluded > 0 {
        log::warn!(
            "{excluded} probes excluded to keep the probe share at or below {}",
            options.probe_cap
        );
    }

    let train_path = ws.trainset_dir().join("train.jsonl");
    let stats = emit_trainset(&records, &train_path, options.shuffle_seed, profile.language_tag)?;

    let mut manifest = build_manifest(&options.overrides)?;
    manifest.shuffle_seed = options.shuffle_seed;
    manifest.separator_token = options.separator.clone();
    manifest
        .record_counts
        .insert("dialogue".to_string(), dialogue_records);
    manifest
        .record_counts
        .insert("probe".to_string(), included);
    manifest.stats = Some(stats.clone());
    write_manifest(&manifest, &ws.trainset_dir().join("manifest.json"))?;
    ws.refresh_manifest()?;

    Ok(TrainsetStageReport {
        dialogue_records,
        probe_records: included,
        probes_excluded_by_cap: excluded,
        sentences: stats.sentences,
    })
}

// ── audit ──────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl AuditReport {
    fn push(&mut self, name: &str, result: std::result::Result<String, String>) {
        match result {
            Ok(detail) => self.checks.push(AuditCheck {
                name: name.to_string(),
                passed: true,
                detail,
            }),
            Err(detail) => self.checks.push(AuditCheck {
                name: name.to_string(),
                passed: false,
                detail,
            }),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Run every invariant check across the persisted workspace.
pub fn audit(ws: &Workspace, summary_budget: usize) -> Result<AuditReport> {
    let mut report = AuditReport::default();
    let profile = ws.load_profile()?;
    report.push(
        "profile",
        profile
            .validate(summary_budget)
            .map(|()| format!("role {}", profile.role_id))
            .map_err(|e| e.to_string()),
    );

    let segments = ws.load_segments()?;
    report.push("segments", {
        let mut problems = Vec::new();
        for (i, seg) in segments.iter().enumerate() {
            if seg.segment_index != i {
                problems.push(format!("segment {i} carries index {}", seg.segment_index));
            }
            if let Err(e) = seg.validate() {
                problems.push(e.to_string());
            }
        }
        if !segments.is_empty() {
            let joined = segments
                .iter()
                .map(|s| s.narrative.as_str())
                .collect::<Vec<_>>()
                .join("\n\n");
            if normalize_ws(&joined) != normalize_ws(&profile.life_experience_text()) {
                problems.push("segment concatenation no longer matches the profile".to_string());
            }
        }
        if problems.is_empty() {
            Ok(format!("{} segments", segments.len()))
        } else {
            Err(problems.join("; "))
        }
    });

    let scenes = ws.load_scenes()?;
    report.push("scenes", {
        let problems: Vec<String> = scenes
            .iter()
            .filter_map(|s| s.validate().err().map(|e| e.to_string()))
            .collect();
        if problems.is_empty() {
            Ok(format!("{} scenes", scenes.len()))
        } else {
            Err(problems.join("; "))
        }
    });

    let dialogues = ws.load_dialogues()?;
    report.push("dialogues", {
        let mut problems = Vec::new();
        for d in &dialogues {
            if let Err(e) = d.validate(&profile.name) {
                problems.push(e.to_string());
            }
            if d.origin == DialogueOrigin::Mimic && d.scene_ref.is_none() {
                problems.push(format!("mimic dialogue {} lacks a scene", d.dialogue_id));
            }
        }
        if problems.is_empty() {
            Ok(format!("{} dialogues", dialogues.len()))
        } else {
            Err(problems.join("; "))
        }
    });

    let pairs = ws.load_pairs()?;
    report.push("pairs", {
        let problems: Vec<String> = pairs
            .iter()
            .filter_map(|p| p.validate(&profile.name).err().map(|e| e.to_string()))
            .collect();
        if problems.is_empty() {
            Ok(format!("{} pairs", pairs.len()))
        } else {
            Err(problems.join("; "))
        }
    });

    let probes = ws.load_probes()?;
    report.push("probes", {
        let problems: Vec<String> = probes
            .iter()
            .filter_map(|p| p.validate().err().map(|e| e.to_string()))
            .collect();
        if problems.is_empty() {
            Ok(format!("{} probes", probes.len()))
        } else {
            Err(problems.join("; "))
        }
    });

    let train_path = ws.trainset_dir().join("train.jsonl");
    if train_path.exists() {
        let separator = read_manifest_separator(ws).unwrap_or_else(|| DEFAULT_SEPARATOR.to_string());
        match audit_train_file(&train_path, &profile.name, &separator) {
            Ok(train_audit) => report.push(
                "trainset",
                if train_audit.passed() {
                    Ok(format!("{} records", train_audit.records))
                } else {
                    Err(train_audit.violations.join("; "))
                },
            ),
            Err(e) => report.push("trainset", Err(e.to_string())),
        }
    }

    let transcripts: Vec<Transcript> = ws.load_records("eval/transcripts.jsonl")?;
    if !transcripts.is_empty() {
        report.push("transcripts", {
            let problems: Vec<String> = transcripts
                .iter()
                .filter_map(|t| t.validate(MULTI_TURN_ROUNDS).err().map(|e| e.to_string()))
                .collect();
            if problems.is_empty() {
                Ok(format!("{} transcripts", transcripts.len()))
            } else {
                Err(problems.join("; "))
            }
        });
    }
    let verdicts: Vec<JudgeVerdict> = ws.load_records("eval/verdicts.jsonl")?;
    if !verdicts.is_empty() {
        report.push("verdicts", {
            let problems: Vec<String> = verdicts
                .iter()
                .filter_map(|v| v.validate().err().map(|e| e.to_string()))
                .collect();
            if problems.is_empty() {
                Ok(format!("{} verdicts", verdicts.len()))
            } else {
                Err(problems.join("; "))
            }
        });
    }
    Ok(report)
}

fn read_manifest_separator(ws: &Workspace) -> Option<String> {
    let raw = std::fs::read_to_string(ws.trainset_dir().join("manifest.json")).ok()?;
    let value: serde_json::Value = serde_json::from_str(&raw).ok()?;
    value
        .get("separator_token")
        .and_then(|v| v.as_str())
        .map(|s| s.to_string())
}

// ── eval stages ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRunSummary {
    pub transcripts: usize,
    pub skipped: usize,
    pub incomplete: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Single,
    Multi,
}

#[allow(clippy::too_many_arguments)]
pub fn eval_run(
    ws: &Workspace,
    agent: &Gateway,
    interrogator: &Gateway,
    bank_path: &Path,
    mode: EvalMode,
    rounds: usize,
    agent_params: &SamplingParams,
    interrogator_params: &SamplingParams,
) -> Result<EvalRunSummary> {
    let profile = ws.load_profile()?;
    let bank = load_question_bank(bank_path)?;
    let questions = bank.for_role(ws.role_id());
    if questions.is_empty() {
        return Err(Error::validation("question bank holds no usable questions"));
    }
    let mut transcripts: Vec<Transcript> = Vec::new();
    let mut skips: Vec<serde_json::Value> = Vec::new();
    let mut incomplete: Vec<serde_json::Value> = Vec::new();
    match mode {
        EvalMode::Single => {
            let report = run_single_turn(agent, ws.role_id(), &questions, agent_params)?;
            transcripts = report.transcripts;
            skips = report
                .skipped
                .iter()
                .map(|s| {
                    serde_json::json!({"question_id": s.question_id, "reason": s.reason})
                })
                .collect();
        }
        EvalMode::Multi => {
            for question in questions {
                match run_multi_turn(
                    agent,
                    interrogator,
                    &profile,
                    question,
                    rounds,
                    agent_params,
                    interrogator_params,
                )? {
                    MultiTurnOutcome::Complete(t) => transcripts.push(t),
                    MultiTurnOutcome::Incomplete {
                        transcript_id,
                        rounds_done,
                        reason,
                    } => incomplete.push(serde_json::json!({
                        "transcript_id": transcript_id,
                        "rounds_done": rounds_done,
                        "reason": reason,
                    })),
                }
            }
            if transcripts.is_empty() {
                return Err(Error::transport(
                    "every multi-turn run ended incomplete; nothing to judge",
                ));
            }
        }
    }
    let summary = EvalRunSummary {
        transcripts: transcripts.len(),
        skipped: skips.len(),
        incomplete: incomplete.len(),
    };
    ws.save_records("eval/transcripts.jsonl", &transcripts, |t| {
        t.transcript_id.clone()
    })?;
    ws.save_records("eval/skips.jsonl", &skips, |v| {
        v["question_id"].as_str().unwrap_or_default().to_string()
    })?;
    ws.save_records("eval/incomplete.jsonl", &incomplete, |v| {
        v["transcript_id"].as_str().unwrap_or_default().to_string()
    })?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalJudgeSummary {
    pub verdicts: usize,
    pub unjudged: usize,
}

pub fn eval_judge(
    ws: &Workspace,
    judge: &Gateway,
    metrics: &[Metric],
    params: &SamplingParams,
    multi_rounds: usize,
) -> Result<EvalJudgeSummary> {
    let profile = ws.load_profile()?;
    let transcripts: Vec<Transcript> = ws.load_records("eval/transcripts.jsonl")?;
    if transcripts.is_empty() {
        return Err(Error::validation(
            "no transcripts in the workspace; run eval run first",
        ));
    }
    let outcome = judge_transcripts(judge, metrics, &profile, &transcripts, params, multi_rounds)?;
    let summary = EvalJudgeSummary {
        verdicts: outcome.verdicts.len(),
        unjudged: outcome.unjudged.len(),
    };
    ws.save_records("eval/verdicts.jsonl", &outcome.verdicts, |v| {
        format!("{}:{}", v.transcript_ref, v.metric_id)
    })?;
    let unjudged: Vec<serde_json::Value> = outcome
        .unjudged
        .iter()
        .map(|u| {
            serde_json::json!({
                "transcript_ref": u.transcript_ref,
                "metric_id": u.metric_id,
                "reason": u.reason,
            })
        })
        .collect();
    ws.save_records("eval/unjudged.jsonl", &unjudged, |v| {
        format!(
            "{}:{}",
            v["transcript_ref"].as_str().unwrap_or_default(),
            v["metric_id"].as_str().unwrap_or_default()
        )
    })?;
    Ok(summary)
}

pub fn eval_report(ws: &Workspace) -> Result<MetricReport> {
    let verdicts: Vec<JudgeVerdict> = ws.load_records("eval/verdicts.jsonl")?;
    if verdicts.is_empty() {
        return Err(Error::validation(
            "no verdicts in the workspace; run eval judge first",
        ));
    }
    let transcripts: Vec<Transcript> = ws.load_records("eval/transcripts.jsonl")?;
    let model_id = transcripts
        .first()
        .map(|t| t.agent_backend.clone())
        .unwrap_or_else(|| "unknown".to_string());
    let report = aggregate(&verdicts, &model_id)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::validation(format!("report serialization: {e}")))?;
    crate::corpus::cache::atomic_write(&ws.eval_dir().join("report.json"), json.as_bytes())?;
    let table = crate::eval::render_report_table(&report);
    crate::corpus::cache::atomic_write(&ws.eval_dir().join("report.txt"), table.as_bytes())?;
    Ok(report)
}

// ── offline mock fixtures ──────────────────────────────────────────────────

/// Deterministic rule table for fully offline runs, templated with the
/// role's name so generated scripts and thoughts parse against the profile.
pub fn default_mock_rules(role_name: &str) -> (Vec<MockRule>, String) {
    let scenes = "\
Scene 1.
Location: A modest workshop near the old quarter
Background.
{name} spends the morning at work while a visitor waits by the door, eager to ask after the latest undertaking.

Scene 2.
Location: A busy market square at midday
Background.
Vendors call their wares as {name} crosses the square, stopped every few paces by admirers and skeptics alike.

Scene 3.
Location: A patron's drawing room in the evening
Background.
Candles burn low while {name} entertains questions from the patron's guests about craft and ambition.

Scene 4.
Location: A quiet garden behind the residence
Background.
An old friend finds {name} resting among the hedges, ready to talk of earlier years.
";
    let real_scene = "\
Scene:
Location: A coaching inn on the road between two cities
Detailed background: Travelers rest by the fire after a long day on the road, and the talk drifts toward craft, rivals, and reputation.
";
    let script = "\
Scene:
Location: A candlelit salon
Detailed background: A small gathering after a private recital.
[Dialogues]:
Carl (speaking): Maestro, the evening's performance moved the whole room to silence. How do you answer such silence?
{name} (thinking): Silence is the truest applause; Carl fishes for a pronouncement, yet he means well and deserves a little honesty.
{name} (speaking): Silence, my friend, is the sound of listeners thinking. I will take it over applause any day.
Carl (speaking): And the new work, does it progress as you hoped?
{name} (speaking): It progresses as storms do, in fits, with thunder, and with long unsettling calms between.
";
    let thought = "{name} (thinking): They ask after the work; better to answer with weather than with promises, and keep the storm for the pages themselves.";
    let probes = "\
1. Maestro, before the premiere you took that early flight across the channel; did the airplane's roar trouble your ears?
2. When your letters went astray, why not simply send an email to your patron instead?
3. They say you checked the reviews on a website the morning after; did the critics' words sting?
4. Was the airport crowd in your honor larger than the one at the concert hall?
5. Your followers online quote you daily; which post of yours do they misread most?
6. Did the jet lag from the New York flight dull your hand at the keyboard?
7. Do you know what an airplane is?
8. When the orchestra ran late, did you message them over the internet to hurry?
9. I hear the premiere was streamed on a website for those abroad; did that please you?
10. Which do you prefer for travel now, the coach or the airplane?
11. Your email to the copyist is famous; what did it say?
12. At the airport, did the customs men recognize you?
13. Some say you drafted the finale mid-flight; is that true?
14. Is it true the patron found you through a website notice?
15. How do you keep your scores safe, in a trunk or online?
16. The morning flight to the festival was delayed; did you compose in the terminal?
17. Did you answer your admirers' emails yourself, or did a copyist?
18. Was the internet in your city faster than in the capital?
19. After the flight home, did your ears ring more than usual?
20. Your website lists the wrong birth year; will you have it corrected?
";
    let judge = "\
The answers stay within the character's era and voice. The responses refuse what the character could not know while keeping the tone consistent with the profile, and the reactions fit the scene described.

6";
    let interrogator = "And what of your earliest teachers, what did they make of you?";
    let summary = "{name} stands among the most storied figures of his age, remembered for a fierce will, an exacting craft, and a life spent turning hardship into lasting work.";

    let rules = vec![
        MockRule::new("Summarize the profile of", summary.replace("{name}", role_name)),
        MockRule::new("talented scene designer", scenes.replace("{name}", role_name)),
        MockRule::new("very creative writer", real_scene.to_string()),
        MockRule::new("professional scriptwriter", script.replace("{name}", role_name)),
        MockRule::new("outline the thought process", thought.replace("{name}", role_name)),
        MockRule::new("imitators have appeared on the Internet", probes.to_string()),
        MockRule::new("You will be given responses", judge.to_string()),
        MockRule::new("generate the next question", interrogator.to_string()),
    ];
    let default_response =
        "I will answer as plainly as my nature allows, and no further than my knowledge reaches."
            .to_string();
    (rules, default_response)
}
