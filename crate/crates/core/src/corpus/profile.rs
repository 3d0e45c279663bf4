//! Profile ingestion from local files.
//!
//! Two layouts are accepted inside a profile directory:
//!
//! * `profile.md` — a single sectioned document. The first `# ` heading is
//!   the character's name; each `## ` heading opens a section.
//! * `*.txt` files — one section per file, titled by file stem, ordered by
//!   file name. Requires a `profile.json` carrying at least the name.
//!
//! Optional files: `profile.json` (name, language, aliases, source_uri,
//! era_cutoff_year), `summary.txt` (a ready-made summary). Without
//! `summary.txt` the caller-supplied summarizer produces one, capped at the
//! token budget.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::types::{LanguageTag, RoleProfile};
use crate::error::{Error, Result};
use crate::tokens::estimate_tokens;

/// Sidecar metadata for a profile directory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProfileMeta {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub language: Option<LanguageTag>,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub source_uri: Option<String>,
    /// Last year the role could plausibly know about; informs probe prompts.
    #[serde(default)]
    pub era_cutoff_year: Option<i32>,
}

/// Instruction sent to the gateway when no summary file is supplied.
pub fn summarization_instruction(name: &str, sections_text: &str, token_budget: usize) -> String {
    format!(
        "Summarize the profile of {name} below in at most {token_budget} tokens. \
The summary must mention {name} by name and cover background, relationships, \
personality, and major life events.\n\n{sections_text}"
    )
}

/// Everything read from a profile directory before summary resolution.
#[derive(Debug, Clone)]
pub struct ProfileSource {
    pub meta: ProfileMeta,
    pub name: String,
    pub sections: Vec<(String, String)>,
    pub supplied_summary: Option<String>,
}

/// Read profile sections and metadata from `dir`.
pub fn read_profile_dir(dir: &Path) -> Result<ProfileSource> {
    if !dir.is_dir() {
        return Err(Error::validation(format!(
            "profile directory {} does not exist",
            dir.display()
        )));
    }
    let meta: ProfileMeta = {
        let path = dir.join("profile.json");
        if path.exists() {
            let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            serde_json::from_str(&raw)
                .map_err(|e| Error::parse(format!("profile.json: {e}")))?
        } else {
            ProfileMeta::default()
        }
    };

    let doc_path = dir.join("profile.md");
    let (name, sections) = if doc_path.exists() {
        let raw = fs::read_to_string(&doc_path).map_err(|e| Error::io(&doc_path, e))?;
        let (doc_name, sections) = parse_sectioned_document(&raw)?;
        let name = meta.name.clone().or(doc_name).ok_or_else(|| {
            Error::validation("profile.md has no '# Name' heading and profile.json has no name")
        })?;
        (name, sections)
    } else {
        let name = meta.name.clone().ok_or_else(|| {
            Error::validation("per-file profiles require a profile.json with a name")
        })?;
        let mut files: Vec<_> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().map(|e| e == "txt").unwrap_or(false))
            .filter(|p| p.file_name().map(|n| n != "summary.txt").unwrap_or(true))
            .collect();
        files.sort();
        let mut sections = Vec::new();
        for path in files {
            let body = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let title = path
                .file_stem()
                .map(|s| s.to_string_lossy().replace(['-', '_'], " "))
                .unwrap_or_default();
            sections.push((title, body.trim().to_string()));
        }
        if sections.is_empty() {
            return Err(Error::validation(format!(
                "profile directory {} holds no profile.md and no .txt sections",
                dir.display()
            )));
        }
        (name, sections)
    };

    let supplied_summary = {
        let path = dir.join("summary.txt");
        if path.exists() {
            Some(
                fs::read_to_string(&path)
                    .map_err(|e| Error::io(&path, e))?
                    .trim()
                    .to_string(),
            )
        } else {
            None
        }
    };

    Ok(ProfileSource {
        meta,
        name,
        sections,
        supplied_summary,
    })
}

/// Assemble and validate a `RoleProfile`, producing a summary through
/// `summarize` when none was supplied on disk.
pub fn build_profile(
    role_id: &str,
    source: ProfileSource,
    token_budget: usize,
    summarize: &mut dyn FnMut(&str) -> Result<String>,
) -> Result<RoleProfile> {
    let summary = match source.supplied_summary {
        Some(s) if !s.is_empty() => s,
        _ => {
            let sections_text = source
                .sections
                .iter()
                .map(|(title, body)| format!("## {title}\n{body}"))
                .collect::<Vec<_>>()
                .join("\n\n");
            let instruction =
                summarization_instruction(&source.name, &sections_text, token_budget);
            let generated = summarize(&instruction)?;
            let generated = generated.trim().to_string();
            if estimate_tokens(&generated) > token_budget {
                return Err(Error::validation(format!(
                    "generated summary exceeds the {token_budget}-token budget"
                )));
            }
            generated
        }
    };
    let profile = RoleProfile {
        role_id: role_id.to_string(),
        name: source.name,
        language_tag: source.meta.language.unwrap_or_default(),
        summary,
        sections: source.sections,
        aliases: source.meta.aliases,
        source_uri: source.meta.source_uri,
    };
    profile.validate(token_budget)?;
    Ok(profile)
}

/// (document title, ordered sections) pulled from a profile.md.
type SectionedDocument = (Option<String>, Vec<(String, String)>);

fn parse_sectioned_document(raw: &str) -> Result<SectionedDocument> {
    let mut name = None;
    let mut sections: Vec<(String, String)> = Vec::new();
    let mut current: Option<(String, Vec<&str>)> = None;
    for line in raw.lines() {
        if let Some(title) = line.strip_prefix("## ") {
            if let Some((t, body)) = current.take() {
                sections.push((t, body.join("\n").trim().to_string()));
            }
            current = Some((title.trim().to_string(), Vec::new()));
        } else if let Some(heading) = line.strip_prefix("# ") {
            if name.is_none() {
                name = Some(heading.trim().to_string());
            }
        } else if let Some((_, body)) = current.as_mut() {
            body.push(line);
        }
    }
    if let Some((t, body)) = current.take() {
        sections.push((t, body.join("\n").trim().to_string()));
    }
    if sections.is_empty() {
        return Err(Error::validation(
            "profile.md contains no '## ' section headings",
        ));
    }
    Ok((name, sections))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, rel: &str, body: &str) {
        fs::write(dir.join(rel), body).unwrap();
    }

    #[test]
    fn sectioned_document_parses() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "profile.md",
            "# Beethoven\n## Overview\nA composer.\n## Early life\nBorn in Bonn.\n\nRaised on music.\n",
        );
        write(dir.path(), "summary.txt", "Beethoven composed symphonies.");
        let source = read_profile_dir(dir.path()).unwrap();
        assert_eq!(source.name, "Beethoven");
        assert_eq!(source.sections.len(), 2);
        assert_eq!(source.sections[1].0, "Early life");
        assert!(source.sections[1].1.contains("Raised on music."));

        let mut no_summarizer = |_: &str| -> Result<String> {
            panic!("summarizer must not run when summary.txt exists")
        };
        let profile = build_profile("beethoven", source, 1_500, &mut no_summarizer).unwrap();
        assert_eq!(profile.summary, "Beethoven composed symphonies.");
    }

    #[test]
    fn per_file_sections_require_meta_name() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "early-life.txt", "Born in Bonn.");
        assert!(read_profile_dir(dir.path()).is_err());

        write(dir.path(), "profile.json", r#"{"name":"Beethoven"}"#);
        let source = read_profile_dir(dir.path()).unwrap();
        assert_eq!(source.name, "Beethoven");
        assert_eq!(source.sections[0].0, "early life");
    }

    #[test]
    fn missing_summary_invokes_summarizer() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "profile.md",
            "# Beethoven\n## Early life\nBorn in Bonn.",
        );
        let source = read_profile_dir(dir.path()).unwrap();
        let mut calls = 0;
        let mut summarizer = |instruction: &str| -> Result<String> {
            calls += 1;
            assert!(instruction.contains("Summarize the profile of Beethoven"));
            Ok("Beethoven, a composer from Bonn.".into())
        };
        let profile = build_profile("beethoven", source, 1_500, &mut summarizer).unwrap();
        assert_eq!(calls, 1);
        assert!(profile.summary.contains("Beethoven"));
    }

    #[test]
    fn generated_summary_missing_name_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "profile.md",
            "# Beethoven\n## Early life\nBorn in Bonn.",
        );
        let source = read_profile_dir(dir.path()).unwrap();
        let mut summarizer = |_: &str| -> Result<String> { Ok("A composer from Bonn.".into()) };
        assert!(build_profile("beethoven", source, 1_500, &mut summarizer).is_err());
    }

    #[test]
    fn document_without_sections_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "profile.md", "# Beethoven\njust prose\n");
        assert!(read_profile_dir(dir.path()).is_err());
    }
}
