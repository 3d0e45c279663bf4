//! The six shipped judge rubrics and custom rubric loading.
//!
//! Every rubric shares one skeleton: the rater preamble, the profile and
//! interaction blocks, a criterion line, and six evaluation steps of which
//! steps 2 and 3 carry the metric-specific instructions. The criterion line
//! is identical across all six shipped rubrics; the steps are what
//! differentiate the dimensions.
//!
//! Custom rubric files reuse the same slot names (`{agent_name}`,
//! `{agent_context}`, `{interactions}`) and plug into the same verdict
//! pipeline; none beyond the six ship built in.

use std::path::Path;

use super::{MetricId, Transcript};
use crate::corpus::types::RoleProfile;
use crate::error::{Error, Result};
use crate::gateway::ChatMessage;

/// A metric dimension with its judge rubric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metric {
    pub metric_id: MetricId,
    pub rubric_text: String,
}

impl Metric {
    pub fn validate(&self) -> Result<()> {
        if !self.rubric_text.contains("scale of 1 to 7") {
            return Err(Error::validation(format!(
                "metric {} rubric lacks the 1-7 scale instruction",
                self.metric_id
            )));
        }
        if !self.rubric_text.contains("give evidence first") {
            return Err(Error::validation(format!(
                "metric {} rubric lacks the evidence-first step",
                self.metric_id
            )));
        }
        Ok(())
    }
}

fn rubric_skeleton(step2: &str, step3: &str) -> String {
    format!(
        "You will be given responses written by an AI assistant mimicing the character \
{{agent_name}}. Your task is to rate the performance of {{agent_name}} using the \
specific criterion by following the evaluation steps. Below is the data:\n\
***\n\
Profile : \n\
{{agent_context}}\n\
***\n\
Interactions : \n\
{{interactions}}\n\
***\n\
Is the current response fully integrated into the current dialogue scene, and does \
it correctly demonstrate the character's reactions and behaviors as they should be \
in that scene? \n\
[Evaluation Steps] \n\
1. Read the given character knowledge and background to get a clear understanding \
of the character. \n\
2. {step2} \n\
3. {step3} \n\
4. Score the AI on a scale of 1 to 7, where 7 is the highest score and 1 is the \
lowest. \n\
5. Follow the above steps for scoring. You will need to give evidence to justify \
the score you have given. Please do not give a score directly; you need to give \
evidence first, then reason about the current performance of the AI, and finally \
give a score. \n\
6. Finally, give the score in a new line. Note that you only need to give the \
number here and do not need to output any additional content."
    )
}

fn builtin_rubric(id: &MetricId) -> String {
    match id {
        MetricId::Contextual => rubric_skeleton(
            "Carefully read the scene and dialogues in the given conversation, and then \
compare them with the character's introduction to find evidence that the AI mimics \
the character's reactions and behaviors.",
            "Compare the evidence found with the character's profile and check that the \
evidence found matches the character's integration in the scene of the dialogue. If \
the evidence shows that the character can integrate well into the current dialogue \
scene and can perfectly represent the reactions and behaviors that the character \
would correctly perform in that scene, give a high score. If all the evidence fails \
to prove this, give a low score.",
        ),
        MetricId::Emotional => rubric_skeleton(
            "Carefully read the scenes and dialogues in the given interactions and then \
compare them with the character's profile to find evidence that the AI can express \
the character's personal charisma.",
            "Compare the evidence found with the character's profile. Check whether the \
evidence found is in line with the character, and give a high score if the current \
AI parody contains the character's emotions and can engage the participant's \
immersive input through the text, or a low score if all the evidence fails to \
demonstrate this.",
        ),
        MetricId::Language => rubric_skeleton(
            "Carefully read the scenes and dialogues in the given interactions, and then \
compare them with the character's profile to find evidence that the AI can correctly \
imitate the character's language style, including vocabulary, sentence structure, \
and so on.",
            "Compare the found evidence with the character's profile. Check whether the \
found evidence is in line with the character's characteristics. Give a high score if \
the current AI's imitation is very much in line with the character's linguistic \
style, the vocabulary used is basically the same, and the sentence structure is \
exactly the same. Give a low score if all the evidence does not prove this.",
        ),
        MetricId::Logical => rubric_skeleton(
            "Carefully read the scenes and dialogues in the given interactions, and then \
compare them with the character's profile to find evidence that the AI is simulating \
the character's thinking during the dialogues, and identify the logic of the AI's \
thinking during the dialogues.",
            "Compare the evidence found with the character's profile. Check whether the \
evidence found is consistent with the character's thinking logic. If the current AI \
dialogue logic is consistent with the character's thinking logic, a high score will \
be given according to the degree of consistency. If all the evidence fails to prove \
this, a low score will be given.",
        ),
        MetricId::Adaptability => rubric_skeleton(
            "Carefully read the scenes and dialogues in the given interactions, and then \
compare them with the character's profile to find evidence of the AI's resilience to \
unexpected questions during the dialogues, and to determine how it reacts in the \
face of the character's unknown knowledge.",
            "Compare the evidence found with the character's profile. Check whether the \
AI answered questions that the character didn't know and whether its handling of \
unexpected situations was in line with the character's personality traits. Give the \
AI a high score if it didn't answer the unknown knowledge and handled the unexpected \
situation in line with the character's logic, and a low score if all the evidence \
doesn't prove this.",
        ),
        MetricId::Overall => rubric_skeleton(
            "Read through the scene and dialogue in the given conversation and then \
compare it to the character's profile. Put yourself in the user's shoes and consider \
how the current character is behaving, and try to find evidence that the current \
user might feel that it is not a real character.",
            "Compare the evidence found with the character's profile to check if the AI \
has been found not to be a real character. Give a high score if there is little \
evidence that the AI has been found not to be a real character and the user's \
experience feels good. Give a low score if the AI's answers can easily be seen not \
to be a real character.",
        ),
        MetricId::Custom(name) => {
            unreachable!("no built-in rubric for custom metric {name}")
        }
    }
}

/// The six shipped metrics with their rubrics.
pub fn builtin_metrics() -> Vec<Metric> {
    MetricId::BUILTIN
        .iter()
        .map(|id| Metric {
            metric_id: id.clone(),
            rubric_text: builtin_rubric(id),
        })
        .collect()
}

/// Load a user-supplied rubric as a custom metric named after the file stem.
pub fn load_custom_rubric(path: &Path) -> Result<Metric> {
    let rubric_text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_lowercase())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::validation(format!("rubric path {} has no stem", path.display())))?;
    let metric_id = MetricId::try_from(name).map_err(Error::Validation)?;
    let metric = Metric {
        metric_id,
        rubric_text,
    };
    metric.validate()?;
    Ok(metric)
}

/// Render a metric's rubric over a complete transcript.
pub fn build_judge_prompt(
    metric: &Metric,
    profile: &RoleProfile,
    transcript: &Transcript,
    multi_rounds: usize,
) -> Result<Vec<ChatMessage>> {
    metric.validate()?;
    transcript.validate(multi_rounds)?;
    let prompt = metric
        .rubric_text
        .replace("{agent_name}", &profile.name)
        .replace("{agent_context}", &profile.summary)
        .replace("{interactions}", &transcript.render_interactions(&profile.name));
    if prompt.contains("{agent_name}") || prompt.contains("{agent_context}") || prompt.contains("{interactions}")
    {
        return Err(Error::validation(format!(
            "rubric for {} still holds unresolved slots after rendering",
            metric.metric_id
        )));
    }
    Ok(vec![ChatMessage::user(prompt)])
}
