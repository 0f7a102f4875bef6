//! Clients for the answer generator.

use std::path::Path;
use std::time::Instant;

use super::prompt::PromptBundle;
use crate::error::{Error, Result};

#[cfg(feature = "remote")]
use crate::service::{audio_request, ServiceClient};
#[cfg(feature = "remote")]
use crate::wire::GenerateRequest;

pub const ECHO_NO_CONTEXT: &str = "I don't know.";

#[derive(Debug, Clone)]
pub enum Generator {
    /// Answers with the prompt's context verbatim: a reader that never
    /// misses what retrieval delivered. Used for desk-scale runs.
    Echo,
    #[cfg(feature = "remote")]
    Remote(ServiceClient),
}

impl Generator {
    /// `mock` (echo) or `remote:URL`.
    pub fn parse(spec: &str) -> Result<Self> {
        match spec.split_once(':').unwrap_or((spec, "")) {
            ("mock", "") | ("mock", "echo") => Ok(Generator::Echo),
            #[cfg(feature = "remote")]
            ("remote", url) => Generator::remote(url, crate::service::GENERATE_TIMEOUT),
            #[cfg(feature = "remote")]
            ("http", _) => Generator::remote(spec, crate::service::GENERATE_TIMEOUT),
            _ => Err(Error::BadSpec { spec: spec.into(), reason: "expected mock or remote:URL".into() }),
        }
    }

    #[cfg(feature = "remote")]
    pub fn remote(url: &str, timeout: std::time::Duration) -> Result<Self> {
        Ok(Generator::Remote(ServiceClient::new(url, timeout)?))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Generator::Echo => "echo",
            #[cfg(feature = "remote")]
            Generator::Remote(_) => "remote",
        }
    }

    /// Returns the top-1 answer text and the generation time in seconds.
    pub fn generate(&self, p: &PromptBundle, audio: Option<&Path>) -> Result<(String, f64)> {
        let start = Instant::now();
        match self {
            Generator::Echo => {
                let _ = audio;
                let answer = p
                    .human
                    .split_once("\nContext: ")
                    .map(|(_, ctx)| ctx.to_string())
                    .unwrap_or_else(|| ECHO_NO_CONTEXT.to_string());
                Ok((answer, start.elapsed().as_secs_f64()))
            }
            #[cfg(feature = "remote")]
            Generator::Remote(client) => {
                let audio_b64 = match audio {
                    Some(path) => audio_request(path)?.audio_b64,
                    None => None,
                };
                let req = GenerateRequest {
                    system: p.system.clone(),
                    human: p.human.clone(),
                    assistant_prefix: p.assistant_prefix.clone(),
                    audio_b64,
                };
                let resp = client.generate(&req)?;
                Ok((resp.text, start.elapsed().as_secs_f64()))
            }
        }
    }
}

/// One-shot generation against a service endpoint.
#[cfg(feature = "remote")]
pub fn generate(endpoint: &str, p: &PromptBundle, audio: Option<&Path>) -> Result<(String, f64)> {
    Generator::remote(endpoint, crate::service::GENERATE_TIMEOUT)?.generate(p, audio)
}
