//! Per-role on-disk workspace.
//!
//! Layout under `<root>/<role_id>/`:
//!
//! ```text
//! profile/    profile.json + sections/NN-title.txt (plain text)
//! segments/   segments.jsonl
//! scenes/     scenes.jsonl
//! dialogues/  dialogues.jsonl
//! pairs/      pairs.jsonl
//! probes/     probes.jsonl
//! trainset/   train.jsonl + manifest.json
//! eval/       transcripts.jsonl, verdicts.jsonl, report.{json,txt}
//! cache/      one file per completion key
//! manifest.json   artifact counts and digests
//! ```
//!
//! Record files are line-delimited JSON, one object per line, written
//! atomically and sorted by id so repeated saves are byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::corpus::cache::{atomic_write, sha256_hex, CacheStore};
use crate::corpus::types::{
    Dialogue, DialoguePair, HallucinationProbe, LifeSegment, RoleProfile, Scene,
};
use crate::error::{Error, Result};

pub const SUBDIRS: &[&str] = &[
    "profile",
    "profile/sections",
    "segments",
    "scenes",
    "dialogues",
    "pairs",
    "probes",
    "trainset",
    "eval",
    "cache",
];

/// Handle to one role's workspace directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    role_id: String,
}

/// Artifact counts and content digests for one role.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkspaceManifest {
    pub role_id: String,
    /// file name -> (record count, sha256 of file bytes), sorted by name.
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub count: usize,
    pub sha256: String,
}

fn valid_role_id(role_id: &str) -> bool {
    !role_id.is_empty()
        && !role_id.contains(['/', '\\'])
        && role_id != "."
        && role_id != ".."
        && role_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Create (or re-open) the per-role directory tree. Idempotent: a second
/// call on the same arguments changes nothing.
pub fn init_workspace(root: &Path, role_id: &str) -> Result<Workspace> {
    if !valid_role_id(role_id) {
        return Err(Error::validation(format!(
            "invalid role_id {role_id:?}: must be non-empty and free of path separators"
        )));
    }
    let ws = Workspace {
        root: root.to_path_buf(),
        role_id: role_id.to_string(),
    };
    for sub in SUBDIRS {
        let dir = ws.role_dir().join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    if !ws.manifest_path().exists() {
        ws.write_manifest(&WorkspaceManifest {
            role_id: role_id.to_string(),
            artifacts: BTreeMap::new(),
        })?;
    }
    Ok(ws)
}

impl Workspace {
    pub fn open(root: &Path, role_id: &str) -> Result<Workspace> {
        if !valid_role_id(role_id) {
            return Err(Error::validation(format!("invalid role_id {role_id:?}")));
        }
        let ws = Workspace {
            root: root.to_path_buf(),
            role_id: role_id.to_string(),
        };
        if !ws.role_dir().is_dir() {
            return Err(Error::validation(format!(
                "workspace for role {role_id:?} not found under {}; run ingest first",
                root.display()
            )));
        }
        Ok(ws)
    }

    pub fn role_id(&self) -> &str {
        &self.role_id
    }

    pub fn role_dir(&self) -> PathBuf {
        self.root.join(&self.role_id)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.role_dir().join("manifest.json")
    }

    pub fn cache(&self) -> CacheStore {
        CacheStore::new(self.role_dir().join("cache"))
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.role_dir().join("eval")
    }

    pub fn trainset_dir(&self) -> PathBuf {
        self.role_dir().join("trainset")
    }

    // ── profile ───────────────────────────────────────────────────────────

    /// Persist the profile: metadata as JSON, section bodies as plain text.
    pub fn save_profile(&self, profile: &RoleProfile) -> Result<()> {
        let sections_dir = self.role_dir().join("profile/sections");
        for (i, (title, body)) in profile.sections.iter().enumerate() {
            let slug: String = title
                .to_lowercase()
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
                .collect();
            let path = sections_dir.join(format!("{i:02}-{slug}.txt"));
            atomic_write(&path, body.as_bytes())?;
        }
        let meta = serde_json::to_string_pretty(profile)
            .map_err(|e| Error::validation(format!("profile serialization: {e}")))?;
        atomic_write(&self.role_dir().join("profile/profile.json"), meta.as_bytes())?;
        self.refresh_manifest()
    }

    pub fn load_profile(&self) -> Result<RoleProfile> {
        let path = self.role_dir().join("profile/profile.json");
        let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&raw)
            .map_err(|e| Error::parse(format!("profile.json: {e}")))
    }

    pub fn has_profile(&self) -> bool {
        self.role_dir().join("profile/profile.json").exists()
    }

    // ── record files ──────────────────────────────────────────────────────

    pub fn save_segments(&self, segments: &[LifeSegment]) -> Result<()> {
        self.save_records("segments/segments.jsonl", segments, |s| {
            format!("{:06}", s.segment_index)
        })
    }

    pub fn load_segments(&self) -> Result<Vec<LifeSegment>> {
        self.load_records("segments/segments.jsonl")
    }

    pub fn save_scenes(&self, scenes: &[Scene]) -> Result<()> {
        self.save_records("scenes/scenes.jsonl", scenes, |s| s.scene_id.clone())
    }

    pub fn load_scenes(&self) -> Result<Vec<Scene>> {
        self.load_records("scenes/scenes.jsonl")
    }

    pub fn save_dialogues(&self, dialogues: &[Dialogue]) -> Result<()> {
        self.save_records("dialogues/dialogues.jsonl", dialogues, |d| {
            d.dialogue_id.clone()
        })
    }

    pub fn load_dialogues(&self) -> Result<Vec<Dialogue>> {
        self.load_records("dialogues/dialogues.jsonl")
    }

    pub fn save_pairs(&self, pairs: &[DialoguePair]) -> Result<()> {
        self.save_records("pairs/pairs.jsonl", pairs, |p| p.pair_id.clone())
    }

    pub fn load_pairs(&self) -> Result<Vec<DialoguePair>> {
        self.load_records("pairs/pairs.jsonl")
    }

    pub fn save_probes(&self, probes: &[HallucinationProbe]) -> Result<()> {
        self.save_records("probes/probes.jsonl", probes, |p| p.probe_id.clone())
    }

    pub fn load_probes(&self) -> Result<Vec<HallucinationProbe>> {
        self.load_records("probes/probes.jsonl")
    }

    /// Write any serializable record list as sorted JSONL, then refresh the
    /// manifest. Sorting by id keeps repeated saves byte-identical.
    pub fn save_records<T: Serialize>(
        &self,
        rel_path: &str,
        records: &[T],
        sort_key: impl Fn(&T) -> String,
    ) -> Result<()> {
        let mut indexed: Vec<(String, &T)> =
            records.iter().map(|r| (sort_key(r), r)).collect();
        indexed.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out = String::new();
        for (_, record) in &indexed {
            let line = serde_json::to_string(record)
                .map_err(|e| Error::validation(format!("record serialization: {e}")))?;
            out.push_str(&line);
            out.push('\n');
        }
        atomic_write(&self.role_dir().join(rel_path), out.as_bytes())?;
        self.refresh_manifest()
    }

    pub fn load_records<T: DeserializeOwned>(&self, rel_path: &str) -> Result<Vec<T>> {
        let path = self.role_dir().join(rel_path);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut records = Vec::new();
        for (lineno, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(line).map_err(|e| {
                Error::parse(format!("{rel_path} line {}: {e}", lineno + 1))
            })?;
            records.push(record);
        }
        Ok(records)
    }

    // ── manifest ──────────────────────────────────────────────────────────

    /// Recompute counts and digests for every tracked artifact file.
    pub fn refresh_manifest(&self) -> Result<()> {
        let tracked = [
            "profile/profile.json",
            "segments/segments.jsonl",
            "scenes/scenes.jsonl",
            "dialogues/dialogues.jsonl",
            "pairs/pairs.jsonl",
            "probes/probes.jsonl",
            "trainset/train.jsonl",
            "trainset/manifest.json",
            "eval/transcripts.jsonl",
            "eval/verdicts.jsonl",
        ];
        let mut artifacts = BTreeMap::new();
        for rel in tracked {
            let path = self.role_dir().join(rel);
            if !path.exists() {
                continue;
            }
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let count = if rel.ends_with(".jsonl") {
                bytes.split(|b| *b == b'\n').filter(|l| !l.is_empty()).count()
            } else {
                1
            };
            artifacts.insert(
                rel.to_string(),
                ArtifactEntry {
                    count,
                    sha256: sha256_hex(&bytes),
                },
            );
        }
        self.write_manifest(&WorkspaceManifest {
            role_id: self.role_id.clone(),
            artifacts,
        })
    }

    fn write_manifest(&self, manifest: &WorkspaceManifest) -> Result<()> {
        let body = serde_json::to_string_pretty(manifest)
            .map_err(|e| Error::validation(format!("manifest serialization: {e}")))?;
        atomic_write(&self.manifest_path(), body.as_bytes())
    }

    pub fn load_manifest(&self) -> Result<WorkspaceManifest> {
        let raw = fs::read_to_string(self.manifest_path())
            .map_err(|e| Error::io(self.manifest_path(), e))?;
        serde_json::from_str(&raw).map_err(|e| Error::parse(format!("manifest.json: {e}")))
    }
}
