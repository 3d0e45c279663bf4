//! roleforge: build role-play fine-tuning datasets and judge role-play agents.
//!
//! The pipeline turns a character profile into training records in five
//! generation stages (scenes, dialogues, real-dialogue scenes, thoughts,
//! knowledge-boundary probes) and assembles them into an
//! instruction/input/output training file plus an adapter hyperparameter
//! manifest. The evaluation harness collects single-turn and five-round
//! transcripts from a role-play agent and scores them against six rubric
//! dimensions with an LLM judge.

pub mod concurrency;
pub mod corpus;
pub mod dialogue;
pub mod error;
pub mod eval;
pub mod gateway;
pub mod halluc;
pub mod pipeline;
pub mod scenario;
pub mod thought;
pub mod tokens;
pub mod trainset;

pub use error::{Error, Result};
