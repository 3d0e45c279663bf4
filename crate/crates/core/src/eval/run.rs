//! Transcript collection: single-turn runs and interrogator-driven
//! multi-turn runs.

use super::{EvalQuestion, Round, Transcript, TranscriptMode};
use crate::corpus::types::RoleProfile;
use crate::error::{Error, Result};
use crate::gateway::{ChatMessage, Gateway, SamplingParams};

/// A question the agent failed to answer, kept for the run report.
#[derive(Debug, Clone)]
pub struct SkippedQuestion {
    pub question_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct SingleTurnReport {
    pub transcripts: Vec<Transcript>,
    pub skipped: Vec<SkippedQuestion>,
}

/// One transcript per question; failures are recorded as skipped, never
/// silently dropped. Errors only when every question failed.
pub fn run_single_turn(
    agent: &Gateway,
    role_id: &str,
    questions: &[&EvalQuestion],
    params: &SamplingParams,
) -> Result<SingleTurnReport> {
    if questions.is_empty() {
        return Err(Error::validation("no questions to run"));
    }
    let mut transcripts = Vec::new();
    let mut skipped = Vec::new();
    for question in questions {
        match agent.complete(&[ChatMessage::user(&question.text)], params) {
            Ok(answer) => transcripts.push(Transcript {
                transcript_id: format!("st-{}", question.question_id),
                role_id: role_id.to_string(),
                agent_backend: agent.backend_id().to_string(),
                mode: TranscriptMode::SingleTurn,
                rounds: vec![Round {
                    user_text: question.text.clone(),
                    agent_text: answer,
                }],
            }),
            Err(err) => {
                log::warn!("question {} skipped: {err}", question.question_id);
                skipped.push(SkippedQuestion {
                    question_id: question.question_id.clone(),
                    reason: err.to_string(),
                });
            }
        }
    }
    if transcripts.is_empty() {
        return Err(Error::transport(format!(
            "all {} questions failed; first failure: {}",
            skipped.len(),
            skipped.first().map(|s| s.reason.as_str()).unwrap_or("?")
        )));
    }
    Ok(SingleTurnReport {
        transcripts,
        skipped,
    })
}

/// Prompt asking the interrogator for the next question given the dialog
/// so far.
pub fn build_interrogator_prompt(
    profile: &RoleProfile,
    rounds: &[Round],
) -> Vec<ChatMessage> {
    let name = &profile.name;
    let mut dialog = String::new();
    for round in rounds {
        dialog.push_str(&format!("User: {}\n", round.user_text));
        dialog.push_str(&format!("{name}: {}\n", round.agent_text));
    }
    let prompt = format!(
        "You are interviewing {name}, who answers in character. The dialog so far:\n\
{dialog}\
Based on the dialog content, please generate the next question to ask {name}. \
Reply with the question only."
    );
    vec![ChatMessage::user(prompt)]
}

/// A finished or truncated multi-turn collection.
#[derive(Debug, Clone)]
pub enum MultiTurnOutcome {
    Complete(Transcript),
    /// The interrogator or agent failed mid-run; never judged.
    Incomplete {
        transcript_id: String,
        rounds_done: usize,
        reason: String,
    },
}

/// Drive a multi-turn dialog: the seed question opens round 1, then the
/// interrogator generates each next question from the transcript so far,
/// until exactly `rounds` rounds exist.
pub fn run_multi_turn(
    agent: &Gateway,
    interrogator: &Gateway,
    profile: &RoleProfile,
    seed_question: &EvalQuestion,
    rounds: usize,
    agent_params: &SamplingParams,
    interrogator_params: &SamplingParams,
) -> Result<MultiTurnOutcome> {
    if rounds == 0 {
        return Err(Error::validation("rounds must be at least 1"));
    }
    let transcript_id = format!("mt-{}", seed_question.question_id);
    let mut collected: Vec<Round> = Vec::new();
    let mut next_question = seed_question.text.clone();
    for round_no in 0..rounds {
        let answer = match agent.complete(&[ChatMessage::user(&next_question)], agent_params) {
            Ok(a) => a,
            Err(err) => {
                return Ok(MultiTurnOutcome::Incomplete {
                    transcript_id,
                    rounds_done: collected.len(),
                    reason: format!("agent failed at round {}: {err}", round_no + 1),
                });
            }
        };
        collected.push(Round {
            user_text: next_question.clone(),
            agent_text: answer,
        });
        if round_no + 1 == rounds {
            break;
        }
        let prompt = build_interrogator_prompt(profile, &collected);
        next_question = match interrogator.complete(&prompt, interrogator_params) {
            Ok(q) => q.trim().to_string(),
            Err(err) => {
                return Ok(MultiTurnOutcome::Incomplete {
                    transcript_id,
                    rounds_done: collected.len(),
                    reason: format!("interrogator failed after round {}: {err}", round_no + 1),
                });
            }
        };
    }
    let mode = if rounds == 1 {
        TranscriptMode::SingleTurn
    } else {
        TranscriptMode::MultiTurn
    };
    let transcript = Transcript {
        transcript_id,
        role_id: profile.role_id.clone(),
        agent_backend: agent.backend_id().to_string(),
        mode,
        rounds: collected,
    };
    transcript.validate(rounds)?;
    Ok(MultiTurnOutcome::Complete(transcript))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::types::LanguageTag;
    use crate::eval::QuestionKind;
    use crate::gateway::{mock_rule_table, ScriptedBackend};
    use std::sync::Arc;

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

    fn question(id: &str, text: &str) -> EvalQuestion {
        EvalQuestion {
            question_id: id.into(),
            role_id: None,
            kind: QuestionKind::Common,
            category: "childhood".into(),
            text: text.into(),
        }
    }

    #[test]
    fn three_questions_three_transcripts() {
        let agent = Gateway::new(Arc::new(mock_rule_table(vec![], "In character, always.")));
        let questions = [
            question("q0", "Where were you born?"),
            question("q1", "Who taught you?"),
            question("q2", "What do you fear?"),
        ];
        let refs: Vec<&EvalQuestion> = questions.iter().collect();
        let report =
            run_single_turn(&agent, "beethoven", &refs, &SamplingParams::generation()).unwrap();
        assert_eq!(report.transcripts.len(), 3);
        assert!(report.skipped.is_empty());
        for t in &report.transcripts {
            t.validate(5).unwrap();
            assert_eq!(t.mode, TranscriptMode::SingleTurn);
        }
        assert_eq!(report.transcripts[0].transcript_id, "st-q0");
    }

    #[test]
    fn partial_failure_becomes_skip_record() {
        use crate::gateway::mock::ScriptStep;
        let agent = Gateway::new(Arc::new(ScriptedBackend::new(
            "agent",
            vec![
                ScriptStep::Reply("Answer one.".into()),
                ScriptStep::FatalFailure("401".into()),
                ScriptStep::Reply("Answer three.".into()),
            ],
        )));
        let questions = [
            question("q0", "One?"),
            question("q1", "Two?"),
            question("q2", "Three?"),
        ];
        let refs: Vec<&EvalQuestion> = questions.iter().collect();
        let report =
            run_single_turn(&agent, "beethoven", &refs, &SamplingParams::generation()).unwrap();
        assert_eq!(report.transcripts.len(), 2);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].question_id, "q1");
    }

    #[test]
    fn empty_question_list_rejected() {
        let agent = Gateway::new(Arc::new(mock_rule_table(vec![], "x")));
        assert!(run_single_turn(&agent, "b", &[], &SamplingParams::generation()).is_err());
    }

    #[test]
    fn all_failures_is_run_error() {
        let agent = Gateway::new(Arc::new(
            ScriptedBackend::new("agent", vec![]),
        ));
        let q = question("q0", "One?");
        let err =
            run_single_turn(&agent, "b", &[&q], &SamplingParams::generation()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn scripted_interrogator_yields_five_alternating_rounds() {
        let agent = Gateway::new(Arc::new(mock_rule_table(vec![], "A reply in voice.")));
        let interrogator = Gateway::new(Arc::new(ScriptedBackend::replies(
            "gpt-4o",
            &["Q2?", "Q3?", "Q4?", "Q5?"],
        )));
        let seed = question("q0", "Q1?");
        let outcome = run_multi_turn(
            &agent,
            &interrogator,
            &profile(),
            &seed,
            5,
            &SamplingParams::generation(),
            &SamplingParams::generation(),
        )
        .unwrap();
        let MultiTurnOutcome::Complete(transcript) = outcome else {
            panic!("expected a complete transcript");
        };
        assert_eq!(transcript.rounds.len(), 5);
        assert_eq!(transcript.rounds[0].user_text, "Q1?");
        assert_eq!(transcript.rounds[4].user_text, "Q5?");
        for round in &transcript.rounds {
            assert!(!round.agent_text.is_empty());
        }
        transcript.validate(5).unwrap();
    }

    #[test]
    fn one_round_behaves_as_single_turn() {
        let agent = Gateway::new(Arc::new(mock_rule_table(vec![], "Reply.")));
        let interrogator = Gateway::new(Arc::new(ScriptedBackend::replies("i", &[])));
        let outcome = run_multi_turn(
            &agent,
            &interrogator,
            &profile(),
            &question("q0", "Only?"),
            1,
            &SamplingParams::generation(),
            &SamplingParams::generation(),
        )
        .unwrap();
        let MultiTurnOutcome::Complete(t) = outcome else {
            panic!("expected complete");
        };
        assert_eq!(t.mode, TranscriptMode::SingleTurn);
        assert_eq!(t.rounds.len(), 1);
    }

    #[test]
    fn interrogator_failure_flags_incomplete() {
        let agent = Gateway::new(Arc::new(mock_rule_table(vec![], "Reply.")));
        // Interrogator answers twice then runs dry (round 3's question fails).
        let interrogator = Gateway::new(Arc::new(ScriptedBackend::replies("i", &["Q2?", "Q3?"])));
        let outcome = run_multi_turn(
            &agent,
            &interrogator,
            &profile(),
            &question("q0", "Q1?"),
            5,
            &SamplingParams::generation(),
            &SamplingParams::generation(),
        )
        .unwrap();
        match outcome {
            MultiTurnOutcome::Incomplete {
                rounds_done,
                reason,
                ..
            } => {
                assert_eq!(rounds_done, 3);
                assert!(reason.contains("interrogator failed"));
            }
            MultiTurnOutcome::Complete(_) => panic!("expected incomplete"),
        }
    }

    #[test]
    fn interrogator_sees_dialog_so_far() {
        let agent = Gateway::new(Arc::new(mock_rule_table(vec![], "A reply.")));
        let interrogator_backend = Arc::new(ScriptedBackend::replies("i", &["Q2?"]));
        let interrogator = Gateway::new(interrogator_backend.clone());
        let _ = run_multi_turn(
            &agent,
            &interrogator,
            &profile(),
            &question("q0", "Q1?"),
            2,
            &SamplingParams::generation(),
            &SamplingParams::generation(),
        )
        .unwrap();
        let calls = interrogator_backend.recorded();
        assert_eq!(calls.len(), 1);
        assert!(calls[0].prompt.contains("User: Q1?"));
        assert!(calls[0].prompt.contains("Beethoven: A reply."));
        assert!(calls[0].prompt.contains("generate the next question"));
    }
}
