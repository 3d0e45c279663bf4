//! Verdict parsing and transcript judging.

use super::rubrics::{build_judge_prompt, Metric};
use super::{JudgeVerdict, Transcript};
use crate::corpus::types::RoleProfile;
use crate::error::{Error, Result};
use crate::gateway::{Gateway, SamplingParams};

/// Score and evidence pulled out of a judge completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedVerdict {
    pub score: u8,
    pub evidence: String,
}

fn parse_standalone_int(line: &str) -> Option<i64> {
    let trimmed = line.trim().trim_end_matches('.');
    if trimmed.is_empty() || !trimmed.chars().all(|c| c.is_ascii_digit() || c == '-') {
        return None;
    }
    trimmed.parse().ok()
}

/// `N/7` fraction anywhere in the line; returns the numerator.
fn parse_fraction_score(line: &str) -> Option<i64> {
    let bytes = line.as_bytes();
    let mut best = None;
    for (i, window) in bytes.windows(2).enumerate() {
        if window[1] == b'7' && window[0] == b'/' {
            // Walk back over optional spaces then digits.
            let mut j = i;
            while j > 0 && bytes[j - 1] == b' ' {
                j -= 1;
            }
            let end = j;
            while j > 0 && bytes[j - 1].is_ascii_digit() {
                j -= 1;
            }
            if j < end {
                if let Ok(n) = line[j..end].parse::<i64>() {
                    best = Some(n);
                }
            }
        }
    }
    best
}

/// Last standalone integer token in the line (split on non-digit bytes).
fn last_integer_token(line: &str) -> Option<i64> {
    let mut best = None;
    let mut current = String::new();
    for c in line.chars() {
        if c.is_ascii_digit() {
            current.push(c);
        } else {
            if !current.is_empty() {
                best = current.parse::<i64>().ok().or(best);
                current.clear();
            }
        }
    }
    if !current.is_empty() {
        best = current.parse::<i64>().ok().or(best);
    }
    best
}

/// Extract the score and evidence from a judge completion.
///
/// Primary rule: the last non-empty line must hold only an integer in
/// [1, 7]; everything before it is the evidence. Recovery: scan the last
/// three non-empty lines for an `N/7` fraction (numerator wins) or a final
/// standalone integer in range. Anything else is a parse error.
pub fn parse_verdict(completion: &str) -> Result<ParsedVerdict> {
    if completion.trim().is_empty() {
        return Err(Error::parse("empty judge completion"));
    }
    let lines: Vec<&str> = completion.lines().collect();
    let nonempty: Vec<(usize, &str)> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i, *l))
        .collect();
    let Some(&(last_idx, last_line)) = nonempty.last() else {
        return Err(Error::parse("empty judge completion"));
    };

    let finish = |score: i64, score_line: usize| -> Result<ParsedVerdict> {
        if !(1..=7).contains(&score) {
            return Err(Error::parse_with_raw(
                format!("score {score} outside [1, 7]"),
                completion,
            ));
        }
        let evidence = lines[..score_line].join("\n").trim().to_string();
        if evidence.is_empty() {
            return Err(Error::parse_with_raw(
                "no evidence text before the score",
                completion,
            ));
        }
        Ok(ParsedVerdict {
            score: score as u8,
            evidence,
        })
    };

    if let Some(n) = parse_standalone_int(last_line) {
        if (1..=7).contains(&n) {
            return finish(n, last_idx);
        }
        // An out-of-range bare integer falls through to recovery, which will
        // fail unless an in-range score appears in the final lines.
    }

    // Recovery scan over the last three non-empty lines, newest first.
    for &(idx, line) in nonempty.iter().rev().take(3) {
        if let Some(n) = parse_fraction_score(line) {
            return finish(n, idx);
        }
        if let Some(n) = last_integer_token(line) {
            if (1..=7).contains(&n) {
                return finish(n, idx);
            }
        }
    }
    Err(Error::parse_with_raw(
        "no extractable score in the final lines",
        completion,
    ))
}

/// A (metric, transcript) combination the judge could not score.
#[derive(Debug, Clone)]
pub struct UnjudgedItem {
    pub transcript_ref: String,
    pub metric_id: String,
    pub reason: String,
}

/// Everything a judging run produced.
#[derive(Debug, Clone)]
pub struct JudgeOutcome {
    pub verdicts: Vec<JudgeVerdict>,
    pub unjudged: Vec<UnjudgedItem>,
}

/// Judge every complete transcript on every metric: one verdict per
/// (metric, transcript), one automatic cache-bypassing retry on a verdict
/// that fails to parse, persistent failures recorded as unjudged.
pub fn judge_transcripts(
    judge: &Gateway,
    metrics: &[Metric],
    profile: &RoleProfile,
    transcripts: &[Transcript],
    params: &SamplingParams,
    multi_rounds: usize,
) -> Result<JudgeOutcome> {
    if metrics.is_empty() {
        return Err(Error::validation("no metrics to judge with"));
    }
    if transcripts.is_empty() {
        return Err(Error::validation("no transcripts to judge"));
    }
    let mut verdicts = Vec::new();
    let mut unjudged = Vec::new();
    for transcript in transcripts {
        for metric in metrics {
            match judge_one(judge, metric, profile, transcript, params, multi_rounds) {
                Ok(verdict) => verdicts.push(verdict),
                Err(err) => unjudged.push(UnjudgedItem {
                    transcript_ref: transcript.transcript_id.clone(),
                    metric_id: metric.metric_id.to_string(),
                    reason: err.to_string(),
                }),
            }
        }
    }
    if verdicts.is_empty() {
        let summary = unjudged
            .iter()
            .map(|u| format!("{}/{}", u.transcript_ref, u.metric_id))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::transport(format!(
            "judging produced no verdicts; unjudged items: {summary}"
        )));
    }
    Ok(JudgeOutcome { verdicts, unjudged })
}

fn judge_one(
    judge: &Gateway,
    metric: &Metric,
    profile: &RoleProfile,
    transcript: &Transcript,
    params: &SamplingParams,
    multi_rounds: usize,
) -> Result<JudgeVerdict> {
    let messages = build_judge_prompt(metric, profile, transcript, multi_rounds)?;
    let completion = judge.complete(&messages, params)?;
    let parsed = match parse_verdict(&completion) {
        Ok(parsed) => parsed,
        Err(first_err) => {
            log::warn!(
                "unparseable verdict for {}/{}: {first_err}; re-asking the judge once",
                transcript.transcript_id,
                metric.metric_id
            );
            let retry_completion = judge.complete_uncached(&messages, params)?;
            parse_verdict(&retry_completion)?
        }
    };
    JudgeVerdict::new(
        &transcript.transcript_id,
        metric.metric_id.clone(),
        parsed.evidence,
        parsed.score,
        completion,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::types::LanguageTag;
    use crate::eval::rubrics::builtin_metrics;
    use crate::eval::{MetricId, Round, TranscriptMode};
    use crate::gateway::{mock_rule_table, ScriptedBackend};
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn clean_verdict_parses() {
        let parsed = parse_verdict("The AI stays in period voice.\nIt refuses politely.\n\n6").unwrap();
        assert_eq!(parsed.score, 6);
        assert!(parsed.evidence.contains("period voice"));
    }

    #[test]
    fn fraction_recovery_takes_numerator() {
        let parsed = parse_verdict("Good fit to the role.\nScore: 7/7").unwrap();
        assert_eq!(parsed.score, 7);
        let parsed = parse_verdict("Weak in places.\nScore: 3/7").unwrap();
        assert_eq!(parsed.score, 3);
    }

    #[test]
    fn trailing_prose_recovery() {
        let parsed = parse_verdict("Evidence paragraph.\nI give this a 5 overall.").unwrap();
        assert_eq!(parsed.score, 5);
    }

    #[test]
    fn no_digit_is_parse_error() {
        let err = parse_verdict("the performance is great").unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn out_of_range_standalone_is_error() {
        assert!(parse_verdict("solid evidence\n9").is_err());
        assert!(parse_verdict("solid evidence\n0").is_err());
    }

    #[test]
    fn score_without_evidence_is_error() {
        assert!(parse_verdict("6").is_err());
    }

    fn profile() -> RoleProfile {
        RoleProfile {
            role_id: "beethoven".into(),
            name: "Beethoven".into(),
            language_tag: LanguageTag::En,
            summary: "Beethoven was a composer.".into(),
            sections: vec![("Early life".into(), "Born in Bonn.".into())],
            aliases: vec![],
            source_uri: None,
        }
    }

    fn transcript(id: &str) -> Transcript {
        Transcript {
            transcript_id: id.into(),
            role_id: "beethoven".into(),
            agent_backend: "mock".into(),
            mode: TranscriptMode::SingleTurn,
            rounds: vec![Round {
                user_text: "How do you work?".into(),
                agent_text: "In fits of fury.".into(),
            }],
        }
    }

    #[test]
    fn two_transcripts_six_metrics_give_twelve_verdicts() {
        let judge_backend = mock_rule_table(vec![], "Stays in character throughout.\n\n5");
        let judge = Gateway::new(Arc::new(judge_backend));
        let outcome = judge_transcripts(
            &judge,
            &builtin_metrics(),
            &profile(),
            &[transcript("t0"), transcript("t1")],
            &SamplingParams::judging(),
            5,
        )
        .unwrap();
        assert_eq!(outcome.verdicts.len(), 12);
        assert!(outcome.unjudged.is_empty());
        assert!(outcome.verdicts.iter().all(|v| v.score == 5));
    }

    #[test]
    fn garbage_then_five_recovers_on_retry() {
        let judge_backend = ScriptedBackend::replies(
            "judge",
            &["total nonsense with no score", "Convincing voice.\n\n5"],
        );
        let judge = Gateway::new(Arc::new(judge_backend));
        let metrics: Vec<Metric> = builtin_metrics()
            .into_iter()
            .filter(|m| m.metric_id == MetricId::Overall)
            .collect();
        let outcome = judge_transcripts(
            &judge,
            &metrics,
            &profile(),
            &[transcript("t0")],
            &SamplingParams::judging(),
            5,
        )
        .unwrap();
        assert_eq!(outcome.verdicts.len(), 1);
        assert_eq!(outcome.verdicts[0].score, 5);
    }

    #[test]
    fn all_failures_is_run_error_listing_items() {
        let judge_backend = ScriptedBackend::replies("judge", &[]).with_fallback("no score here");
        let judge = Gateway::new(Arc::new(judge_backend));
        let metrics: Vec<Metric> = builtin_metrics()
            .into_iter()
            .filter(|m| m.metric_id == MetricId::Overall)
            .collect();
        let err = judge_transcripts(
            &judge,
            &metrics,
            &profile(),
            &[transcript("t0")],
            &SamplingParams::judging(),
            5,
        )
        .unwrap_err();
        assert!(err.to_string().contains("t0/overall"));
    }

    proptest! {
        /// Fuzzing the parser: never panics, never yields an out-of-range
        /// score.
        #[test]
        fn parse_verdict_never_out_of_range(completion in "(?s).{0,400}") {
            if let Ok(parsed) = parse_verdict(&completion) {
                prop_assert!((1..=7).contains(&parsed.score));
                prop_assert!(!parsed.evidence.is_empty());
            }
        }
    }
}
