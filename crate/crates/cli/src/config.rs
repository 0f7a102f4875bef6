//! Run configuration: an optional TOML file, environment overrides for
//! service endpoints, and command-line flags on top.
//!
//! ```toml
//! seed = 7
//! workers = 1
//! k = 4
//!
//! [data]
//! dataset = "hotpotqa"
//! input = "data/hotpot_dev.json"
//! manifest = "speech/manifest.jsonl"
//!
//! [backends]
//! text_encoder = "remote"
//! speech_encoder = "remote"
//! asr = "mock:delay=0.3,wer=0.13"
//! generator = "mock"
//!
//! [endpoints]
//! encoder = "http://${ENCODER_HOST}:8080"
//! ```
//!
//! A backend spec of plain `remote` takes its URL from the matching
//! endpoint: `--*-url` flag, then `CMRAG_ENCODER_URL` / `CMRAG_ASR_URL` /
//! `CMRAG_GEN_URL`, then `[endpoints]`.

use std::path::{Path, PathBuf};

use cmrag_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const ENCODER_URL_VAR: &str = "CMRAG_ENCODER_URL";
pub const ASR_URL_VAR: &str = "CMRAG_ASR_URL";
pub const GEN_URL_VAR: &str = "CMRAG_GEN_URL";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub k: Option<usize>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub backends: BackendSection,
    #[serde(default)]
    pub endpoints: EndpointSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub dataset: Option<String>,
    pub input: Option<PathBuf>,
    pub lang: Option<String>,
    pub manifest: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub max_chars: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    pub text_encoder: Option<String>,
    pub speech_encoder: Option<String>,
    pub asr: Option<String>,
    pub generator: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSection {
    pub encoder: Option<String>,
    pub asr: Option<String>,
    pub generator: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: FileConfig =
            toml::from_str(&text).map_err(|e| Error::FatalConfig(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self> {
        path.map(Self::load).transpose().map(Option::unwrap_or_default)
    }
}

/// Replaces `${NAME}` with the value of environment variable `NAME`.
pub fn expand_env(s: &str) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let tail = &rest[start + 2..];
        let end = tail.find('}').ok_or_else(|| Error::FatalConfig(format!("unterminated ${{ in {s:?}")))?;
        let name = &tail[..end];
        let value = std::env::var(name).map_err(|_| Error::FatalConfig(format!("{name} is not set (in {s:?})")))?;
        out.push_str(&value);
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn env_nonempty(var: &str) -> Option<String> {
    std::env::var(var).ok().filter(|v| !v.trim().is_empty())
}

/// Which service an endpoint belongs to.
#[derive(Debug, Clone, Copy)]
pub enum Service {
    Encoder,
    Asr,
    Generator,
}

impl Service {
    fn var(self) -> &'static str {
        match self {
            Service::Encoder => ENCODER_URL_VAR,
            Service::Asr => ASR_URL_VAR,
            Service::Generator => GEN_URL_VAR,
        }
    }

    fn file_value(self, f: &FileConfig) -> Option<&String> {
        match self {
            Service::Encoder => f.endpoints.encoder.as_ref(),
            Service::Asr => f.endpoints.asr.as_ref(),
            Service::Generator => f.endpoints.generator.as_ref(),
        }
    }
}

/// Picks the flag value over the file value, then fills a bare `remote`
/// spec with the endpoint for `service`.
pub fn resolve_spec(
    flag: Option<&str>,
    file: Option<&str>,
    url_flag: Option<&str>,
    service: Service,
    cfg: &FileConfig,
) -> Result<Option<String>> {
    let Some(spec) = flag.or(file) else { return Ok(None) };
    let spec = expand_env(spec)?;
    if spec != "remote" {
        return Ok(Some(spec));
    }
    let url = match url_flag.map(str::to_string).or_else(|| env_nonempty(service.var())) {
        Some(u) => u,
        None => match service.file_value(cfg) {
            Some(u) => expand_env(u)?,
            None => {
                return Err(Error::FatalConfig(format!(
                    "spec \"remote\" needs an endpoint: pass a URL flag, set {} or add [endpoints]",
                    service.var()
                )))
            }
        },
    };
    Ok(Some(format!("remote:{url}")))
}

/// The effective settings of a run, echoed into its report.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Effective {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text_encoder: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speech_encoder: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asr: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    pub k: usize,
    pub workers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}
