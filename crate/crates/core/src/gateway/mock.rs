//! Offline backends: a rule-table mock and a scripted queue.
//!
//! Both record every request they see so tests can assert on the exact
//! prompts and sampling parameters that reached the backend.

use std::collections::VecDeque;
use std::sync::Mutex;

use super::{Backend, BackendFailure, ChatMessage, SamplingParams};

/// One request as a backend saw it.
#[derive(Debug, Clone)]
pub struct RecordedCall {
    /// User-visible prompt text: all message contents joined by newlines.
    pub prompt: String,
    pub params: SamplingParams,
}

fn prompt_of(messages: &[ChatMessage]) -> String {
    messages
        .iter()
        .map(|m| m.content.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

/// A substring rule: fires when every pattern occurs in the prompt.
#[derive(Debug, Clone)]
pub struct MockRule {
    pub patterns: Vec<String>,
    pub response: String,
}

impl MockRule {
    pub fn new(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        MockRule {
            patterns: vec![pattern.into()],
            response: response.into(),
        }
    }

    pub fn all_of(patterns: &[&str], response: impl Into<String>) -> Self {
        MockRule {
            patterns: patterns.iter().map(|p| p.to_string()).collect(),
            response: response.into(),
        }
    }

    fn matches(&self, prompt: &str) -> bool {
        self.patterns.iter().all(|p| prompt.contains(p.as_str()))
    }
}

/// Deterministic rule-table backend. The first rule (in declaration order)
/// whose patterns all match wins; the default response always matches.
pub struct MockBackend {
    rules: Vec<MockRule>,
    default_response: String,
    recorded: Mutex<Vec<RecordedCall>>,
}

/// Build a rule-table mock backend.
pub fn mock_rule_table(rules: Vec<MockRule>, default_response: impl Into<String>) -> MockBackend {
    MockBackend {
        rules,
        default_response: default_response.into(),
        recorded: Mutex::new(Vec::new()),
    }
}

impl MockBackend {
    pub fn recorded(&self) -> Vec<RecordedCall> {
        self.recorded.lock().unwrap().clone()
    }
}

impl Backend for MockBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn model_id(&self) -> &str {
        "mock-model"
    }

    fn complete_once(
        &self,
        messages: &[ChatMessage],
        params: &SamplingParams,
    ) -> Result<String, BackendFailure> {
        let prompt = prompt_of(messages);
        self.recorded.lock().unwrap().push(RecordedCall {
            prompt: prompt.clone(),
            params: params.clone(),
        });
        let response = self
            .rules
            .iter()
            .find(|rule| rule.matches(&prompt))
            .map(|rule| rule.response.clone())
            .unwrap_or_else(|| self.default_response.clone());
        Ok(response)
    }
}

/// Scripted step for [`ScriptedBackend`].
#[derive(Debug, Clone)]
pub enum ScriptStep {
    Reply(String),
    TransientFailure(String),
    FatalFailure(String),
}

/// Pops scripted steps in order; used for fault injection and for scripted
/// agents, interrogators, and judges in tests. When the script runs dry the
/// backend repeats `fallback` if set, otherwise fails fatally.
pub struct ScriptedBackend {
    id: String,
    steps: Mutex<VecDeque<ScriptStep>>,
    fallback: Option<String>,
    recorded: Mutex<Vec<RecordedCall>>,
}

impl ScriptedBackend {
    pub fn new(id: impl Into<String>, steps: Vec<ScriptStep>) -> Self {
        ScriptedBackend {
            id: id.into(),
            steps: Mutex::new(steps.into()),
            fallback: None,
            recorded: Mutex::new(Vec::new()),
        }
    }

    pub fn replies(id: impl Into<String>, replies: &[&str]) -> Self {
        Self::new(
            id,
            replies
                .iter()
                .map(|r| ScriptStep::Reply(r.to_string()))
                .collect(),
        )
    }

    pub fn with_fallback(mut self, fallback: impl Into<String>) -> Self {
        self.fallback = Some(fallback.into());
        self
    }

    pub fn recorded(&self) -> Vec<RecordedCall> {
        self.recorded.lock().unwrap().clone()
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn model_id(&self) -> &str {
        "scripted-model"
    }

    fn complete_once(
        &self,
        messages: &[ChatMessage],
        params: &SamplingParams,
    ) -> Result<String, BackendFailure> {
        self.recorded.lock().unwrap().push(RecordedCall {
            prompt: prompt_of(messages),
            params: params.clone(),
        });
        match self.steps.lock().unwrap().pop_front() {
            Some(ScriptStep::Reply(text)) => Ok(text),
            Some(ScriptStep::TransientFailure(msg)) => Err(BackendFailure::Transient(msg)),
            Some(ScriptStep::FatalFailure(msg)) => Err(BackendFailure::Fatal(msg)),
            None => match &self.fallback {
                Some(text) => Ok(text.clone()),
                None => Err(BackendFailure::Fatal("script exhausted".into())),
            },
        }
    }
}
