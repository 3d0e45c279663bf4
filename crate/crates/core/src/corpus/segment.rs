//! Life-experience segmentation: greedy paragraph packing.

use crate::corpus::types::{is_life_experience_title, LifeSegment, RoleProfile};
use crate::error::{Error, Result};

pub const MIN_SEGMENT_CHARS: usize = 500;

/// Collapse whitespace runs to single spaces for the concatenation check.
pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn split_paragraphs(text: &str) -> Vec<&str> {
    text.split("\n\n")
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect()
}

/// Split a role's life experience into ordered segments.
///
/// Paragraphs pack greedily into segments of at most `max_segment_chars`;
/// a single paragraph over the cap becomes its own segment. Segments never
/// cross section boundaries, so each keeps its section title as a period
/// label. Concatenating all narratives in order reproduces the source
/// life-experience text up to whitespace normalization.
pub fn segment_life_experience(
    profile: &RoleProfile,
    max_segment_chars: usize,
) -> Result<Vec<LifeSegment>> {
    if max_segment_chars < MIN_SEGMENT_CHARS {
        return Err(Error::validation(format!(
            "max_segment_chars {max_segment_chars} below minimum {MIN_SEGMENT_CHARS}"
        )));
    }
    let life_sections: Vec<&(String, String)> = profile
        .sections
        .iter()
        .filter(|(title, _)| is_life_experience_title(title))
        .collect();
    if life_sections.is_empty() {
        return Err(Error::validation(format!(
            "profile {} has no life-experience section",
            profile.role_id
        )));
    }

    let mut segments = Vec::new();
    for (title, body) in life_sections {
        let paragraphs = split_paragraphs(body);
        if paragraphs.is_empty() {
            return Err(Error::validation(format!(
                "life-experience section {title:?} is empty"
            )));
        }
        let mut current = String::new();
        for paragraph in paragraphs {
            if current.is_empty() {
                current = paragraph.to_string();
                continue;
            }
            if current.len() + 2 + paragraph.len() <= max_segment_chars {
                current.push_str("\n\n");
                current.push_str(paragraph);
            } else {
                segments.push((title.clone(), std::mem::take(&mut current)));
                current = paragraph.to_string();
            }
        }
        if !current.is_empty() {
            segments.push((title.clone(), current));
        }
    }

    Ok(segments
        .into_iter()
        .enumerate()
        .map(|(i, (period_label, narrative))| LifeSegment {
            role_id: profile.role_id.clone(),
            segment_index: i,
            period_label,
            narrative,
        })
        .collect())
}
