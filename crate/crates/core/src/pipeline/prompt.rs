//! Prompt frames sent to the spoken dialogue model.

use serde::{Deserialize, Serialize};

use super::Mode;
use crate::error::{Error, Result};

pub const SYSTEM_PROMPT: &str = "The User will provide you with a speech instruction. Do it step by step. First, think about the instruction and respond in an interleaved manner, with 13 text tokens followed by 26 audio tokens.";

pub const QA_INSTRUCTION: &str = "You are an assistant for question-answering tasks. Use the following pieces of retrieved context to answer the question. If you don't know the answer, just say that you don't know. Use three sentences maximum and keep the answer concise.";

pub const ASSISTANT_PREFIX: &str = "streaming_transcription";

/// Stands in for the question when the spoken query itself is sent as audio.
pub const SPEECH_QUERY_MARKER: &str = "<speech query>";

pub const CONTEXT_SEPARATOR: &str = "\n\n";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QuestionSlot {
    Text(String),
    /// The audio accompanies the prompt; the slot holds a marker.
    Speech,
}

impl QuestionSlot {
    pub fn as_str(&self) -> &str {
        match self {
            QuestionSlot::Text(t) => t,
            QuestionSlot::Speech => SPEECH_QUERY_MARKER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub human: String,
    pub assistant_prefix: String,
}

impl PromptBundle {
    /// Role-labelled transcript of the whole prompt.
    pub fn render(&self) -> String {
        format!("system: {}\nHuman: {}\nassistant: {}\n", self.system, self.human, self.assistant_prefix)
    }
}

/// Fills the question-answering frame. Context chunks are joined in the
/// given (score-descending) order; `no_rag` omits the context line.
pub fn assemble_prompt<S: AsRef<str>>(mode: Mode, question: &QuestionSlot, context: &[S]) -> Result<PromptBundle> {
    let human = if mode == Mode::NoRag {
        if !context.is_empty() {
            return Err(Error::FatalConfig("no_rag prompts carry no context".into()));
        }
        format!("{QA_INSTRUCTION}\nQuestion: {}", question.as_str())
    } else {
        let parts: Vec<&str> = context.iter().map(AsRef::as_ref).filter(|c| !c.trim().is_empty()).collect();
        if parts.is_empty() {
            return Err(Error::EmptyContext);
        }
        format!("{QA_INSTRUCTION}\nQuestion: {}\nContext: {}", question.as_str(), parts.join(CONTEXT_SEPARATOR))
    };
    Ok(PromptBundle { system: SYSTEM_PROMPT.to_string(), human, assistant_prefix: ASSISTANT_PREFIX.to_string() })
}
