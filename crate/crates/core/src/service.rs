//! Blocking HTTP client for the model service (encoders, ASR, generation).

use std::path::Path;
use std::time::Duration;

use base64::Engine;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::Lang;
use crate::wire::*;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const GENERATE_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone)]
pub struct ServiceClient {
    base: String,
    http: reqwest::blocking::Client,
}

enum Failure {
    Transient(Error),
    Permanent(Error),
}

impl ServiceClient {
    pub fn new(base: &str, timeout: Duration) -> Result<Self> {
        let base = base.trim_end_matches('/').to_string();
        // built without a TLS stack: the services are local sidecars
        if !base.starts_with("http://") {
            return Err(Error::BadSpec { spec: base, reason: "endpoint must be an http:// URL".into() });
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::BackendUnavailable(e.to_string()))?;
        Ok(ServiceClient { base, http })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn finish<T: DeserializeOwned>(
        &self,
        resp: reqwest::Result<reqwest::blocking::Response>,
    ) -> std::result::Result<T, Failure> {
        let resp = resp.map_err(|e| Failure::Transient(Error::BackendUnavailable(e.to_string())))?;
        let status = resp.status();
        let body = resp.bytes().map_err(|e| Failure::Transient(Error::BackendUnavailable(e.to_string())))?;
        if status.is_server_error() {
            return Err(Failure::Transient(Error::BackendUnavailable(format!(
                "{status}: {}",
                String::from_utf8_lossy(&body)
            ))));
        }
        if !status.is_success() {
            return Err(Failure::Permanent(Error::MalformedResponse(format!(
                "{status}: {}",
                String::from_utf8_lossy(&body)
            ))));
        }
        serde_json::from_slice(&body).map_err(|e| Failure::Permanent(Error::MalformedResponse(e.to_string())))
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        let resp = self.http.get(format!("{}{path}", self.base)).send();
        self.finish(resp).map_err(|f| match f {
            Failure::Transient(e) | Failure::Permanent(e) => e,
        })
    }

    /// POSTs `body`; transient failures are retried `retries` times.
    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B, retries: usize) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let mut attempt = 0;
        loop {
            let resp = self.http.post(&url).json(body).send();
            match self.finish(resp) {
                Ok(v) => return Ok(v),
                Err(Failure::Transient(e)) if attempt < retries => {
                    log::warn!("{url}: {e}; retrying");
                    attempt += 1;
                }
                Err(Failure::Transient(e)) | Err(Failure::Permanent(e)) => return Err(e),
            }
        }
    }

    pub fn info(&self) -> Result<InfoResponse> {
        let info: InfoResponse = self.get(INFO_PATH)?;
        if info.dim == 0 {
            return Err(Error::MalformedResponse("service advertises dim 0".into()));
        }
        Ok(info)
    }

    pub fn encode_text(&self, texts: &[&str], lang: Lang) -> Result<Vec<Vec<f32>>> {
        let req = EncodeTextRequest { texts: texts.iter().map(|t| t.to_string()).collect(), lang: lang.to_string() };
        let resp: EncodeTextResponse = self.post(ENCODE_TEXT_PATH, &req, 1)?;
        if resp.embeddings.len() != texts.len() {
            return Err(Error::MalformedResponse(format!(
                "{} embeddings for {} texts",
                resp.embeddings.len(),
                texts.len()
            )));
        }
        Ok(resp.embeddings)
    }

    pub fn encode_speech(&self, audio: &AudioRequest) -> Result<Vec<f32>> {
        let resp: EncodeSpeechResponse = self.post(ENCODE_SPEECH_PATH, audio, 1)?;
        Ok(resp.embedding)
    }

    pub fn transcribe(&self, audio: &AudioRequest) -> Result<TextResponse> {
        self.post(TRANSCRIBE_PATH, audio, 0)
    }

    pub fn generate(&self, req: &GenerateRequest) -> Result<TextResponse> {
        self.post(GENERATE_PATH, req, 0)
    }
}

/// Reads a WAV file and packages it as an inline audio request.
pub fn audio_request(path: &Path) -> Result<AudioRequest> {
    let unreadable = |reason: String| Error::AudioUnreadable { path: path.to_path_buf(), reason };
    let bytes = std::fs::read(path).map_err(|e| unreadable(e.to_string()))?;
    let reader = hound::WavReader::new(std::io::Cursor::new(&bytes)).map_err(|e| unreadable(e.to_string()))?;
    let sample_rate = reader.spec().sample_rate;
    if sample_rate == 0 {
        return Err(unreadable("sample rate 0".into()));
    }
    Ok(AudioRequest {
        audio_b64: Some(base64::engine::general_purpose::STANDARD.encode(&bytes)),
        path: None,
        sample_rate,
    })
}
