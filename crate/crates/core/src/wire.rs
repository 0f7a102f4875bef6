//! JSON bodies of the encoder / ASR / generation service protocol.
//!
//! ```text
//! GET  /v1/info           -> InfoResponse
//! POST /v1/encode_text    EncodeTextRequest  -> EncodeTextResponse
//! POST /v1/encode_speech  AudioRequest       -> EncodeSpeechResponse
//! POST /v1/transcribe     AudioRequest       -> TextResponse
//! POST /v1/generate       GenerateRequest    -> TextResponse
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const INFO_PATH: &str = "/v1/info";
pub const ENCODE_TEXT_PATH: &str = "/v1/encode_text";
pub const ENCODE_SPEECH_PATH: &str = "/v1/encode_speech";
pub const TRANSCRIBE_PATH: &str = "/v1/transcribe";
pub const GENERATE_PATH: &str = "/v1/generate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoResponse {
    pub dim: usize,
    #[serde(default)]
    pub models: BTreeMap<String, serde_json::Value>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeTextRequest {
    pub texts: Vec<String>,
    pub lang: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeTextResponse {
    pub embeddings: Vec<Vec<f32>>,
}

/// Audio either inline (base64 WAV) or as a path local to the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub sample_rate: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeSpeechResponse {
    pub embedding: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextResponse {
    pub text: String,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub system: String,
    pub human: String,
    pub assistant_prefix: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_b64: Option<String>,
}
