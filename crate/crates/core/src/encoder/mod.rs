//! Text and speech encoders mapping into one shared vector space.
//!
//! Three backends sit behind [`EncoderHandle`]:
//!
//! * `mock` - deterministic feature hashing, with a noisy speech side;
//! * `fixture` - embeddings precomputed offline and read from disk;
//! * `remote` - the model service over HTTP (feature `remote`).
//!
//! Backends are selected with a spec string, e.g.
//! `mock:dim=256,seed=7,eps=0.5,delay=0.05`, `fixture:emb/chunks.bin` or
//! `remote:http://127.0.0.1:8080`.

pub mod asr;
pub mod fixture;
pub mod mock;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::types::{EmbeddingVector, Lang, QueryRecord};

pub use asr::{AsrHandle, MockAsr};
pub use fixture::FixtureEncoder;
pub use mock::{mock_text_encode, perturb, MockEncoder};

#[cfg(feature = "remote")]
use crate::service::{audio_request, ServiceClient};
#[cfg(feature = "remote")]
use crate::types::validate_embedding;

pub const DEFAULT_MOCK_DIM: usize = 256;
/// Texts per request to the remote encoder.
pub const REMOTE_BATCH: usize = 32;

#[cfg(feature = "remote")]
#[derive(Debug, Clone)]
pub struct RemoteEncoder {
    pub client: ServiceClient,
    pub dim: usize,
    pub label: String,
}

#[cfg(feature = "remote")]
impl RemoteEncoder {
    /// Connects and reads the advertised dimension from `/v1/info`.
    pub fn connect(url: &str) -> Result<Self> {
        let client = ServiceClient::new(url, crate::service::DEFAULT_TIMEOUT)?;
        let info = client.info()?;
        let label = info
            .models
            .get("text")
            .and_then(|v| v.as_str())
            .unwrap_or("remote")
            .to_string();
        Ok(RemoteEncoder { client, dim: info.dim, label })
    }

    fn check(&self, values: Vec<f32>) -> Result<EmbeddingVector> {
        if values.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: values.len() });
        }
        validate_embedding(EmbeddingVector { dim: self.dim, values, normalized: false })
    }
}

#[derive(Debug, Clone)]
pub enum EncoderHandle {
    Mock(MockEncoder),
    Fixture(Arc<FixtureEncoder>),
    #[cfg(feature = "remote")]
    Remote(RemoteEncoder),
}

pub(crate) fn parse_kv<'a>(spec: &str, rest: &'a str) -> Result<BTreeMap<&'a str, &'a str>> {
    let mut kv = BTreeMap::new();
    for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::BadSpec { spec: spec.into(), reason: format!("expected key=value, got {part:?}") })?;
        kv.insert(k.trim(), v.trim());
    }
    Ok(kv)
}

pub(crate) fn num(spec: &str, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::BadSpec { spec: spec.into(), reason: format!("{key}={v:?} is not a number") })
}

impl EncoderHandle {
    pub fn mock(dim: usize, seed: u64) -> Self {
        EncoderHandle::Mock(MockEncoder::new(dim, seed))
    }

    /// Builds a backend from its spec string.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match kind {
            "mock" => {
                let kv = parse_kv(spec, rest)?;
                for k in kv.keys() {
                    if !matches!(*k, "dim" | "seed" | "eps" | "delay") {
                        return Err(Error::BadSpec { spec: spec.into(), reason: format!("unknown key {k:?}") });
                    }
                }
                let get = |k: &str| kv.get(k).map(|v| num(spec, k, v)).transpose();
                let dim = get("dim")?.unwrap_or(DEFAULT_MOCK_DIM as f64) as usize;
                if dim < mock::MIN_MOCK_DIM {
                    return Err(Error::BadSpec { spec: spec.into(), reason: "mock dim must be >= 8".into() });
                }
                let seed = kv
                    .get("seed")
                    .map(|s| s.parse::<u64>())
                    .transpose()
                    .map_err(|e| Error::BadSpec { spec: spec.into(), reason: e.to_string() })?
                    .unwrap_or(0);
                let eps = get("eps")?.unwrap_or(0.0);
                let delay = get("delay")?.unwrap_or(0.0);
                if eps < 0.0 || delay < 0.0 {
                    return Err(Error::BadSpec { spec: spec.into(), reason: "eps and delay must be >= 0".into() });
                }
                Ok(EncoderHandle::Mock(MockEncoder::new(dim, seed).with_eps(eps).with_delay(delay)))
            }
            "fixture" => {
                if rest.is_empty() {
                    return Err(Error::BadSpec { spec: spec.into(), reason: "fixture needs a path".into() });
                }
                Ok(EncoderHandle::Fixture(Arc::new(FixtureEncoder::load(&PathBuf::from(rest))?)))
            }
            #[cfg(feature = "remote")]
            "remote" => Ok(EncoderHandle::Remote(RemoteEncoder::connect(rest)?)),
            _ => Err(Error::BadSpec { spec: spec.into(), reason: "expected mock:..., fixture:PATH or remote:URL".into() }),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EncoderHandle::Mock(m) => m.dim,
            EncoderHandle::Fixture(f) => f.dim(),
            #[cfg(feature = "remote")]
            EncoderHandle::Remote(r) => r.dim,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            EncoderHandle::Mock(_) => "mock",
            EncoderHandle::Fixture(_) => "fixture",
            #[cfg(feature = "remote")]
            EncoderHandle::Remote(_) => "remote",
        }
    }

    /// Short name used in report tables.
    pub fn label(&self) -> String {
        match self {
            EncoderHandle::Mock(m) if m.eps > 0.0 => format!("mock(eps={})", m.eps),
            EncoderHandle::Mock(_) => "mock".into(),
            EncoderHandle::Fixture(f) => f
                .path()
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "fixture".into()),
            #[cfg(feature = "remote")]
            EncoderHandle::Remote(r) => r.label.clone(),
        }
    }

    pub fn as_mock(&self) -> Option<&MockEncoder> {
        match self {
            EncoderHandle::Mock(m) => Some(m),
            _ => None,
        }
    }

    /// Encodes texts in order. Fixture backends look texts up by the text itself.
    pub fn encode_text_batch(&self, texts: &[&str], lang: Lang) -> Result<Vec<EmbeddingVector>> {
        let items: Vec<(String, &str)> = texts.iter().map(|t| (t.to_string(), *t)).collect();
        self.encode_keyed_batch(&items, lang)
    }

    /// Encodes `(key, text)` pairs in order. Fixture backends use the key
    /// (a chunk or query id); the other backends use the text.
    pub fn encode_keyed_batch(&self, items: &[(String, &str)], lang: Lang) -> Result<Vec<EmbeddingVector>> {
        if items.iter().any(|(_, t)| t.trim().is_empty()) {
            return Err(Error::EmptyText);
        }
        match self {
            EncoderHandle::Mock(m) => {
                let texts: Vec<&str> = items.iter().map(|(_, t)| *t).collect();
                m.encode_text_batch(&texts, lang)
            }
            EncoderHandle::Fixture(f) => items.iter().map(|(k, _)| f.lookup(k)).collect(),
            #[cfg(feature = "remote")]
            EncoderHandle::Remote(r) => {
                let mut out = Vec::with_capacity(items.len());
                for batch in items.chunks(REMOTE_BATCH) {
                    let texts: Vec<&str> = batch.iter().map(|(_, t)| *t).collect();
                    for values in r.client.encode_text(&texts, lang)? {
                        out.push(r.check(values)?);
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn encode_text_keyed(&self, key: &str, text: &str, lang: Lang) -> Result<EmbeddingVector> {
        let mut v = self.encode_keyed_batch(&[(key.to_string(), text)], lang)?;
        Ok(v.remove(0))
    }

    /// Embeds the spoken query directly. Mock backends use the oracle
    /// transcript plus alignment noise; fixtures look up the query id;
    /// remote backends upload the WAV.
    pub fn encode_speech(&self, q: &QueryRecord) -> Result<EmbeddingVector> {
        match self {
            EncoderHandle::Mock(m) => {
                if q.transcript_oracle.trim().is_empty() {
                    return Err(Error::MissingTranscriptForMock(q.id.clone()));
                }
                m.encode_speech_transcript(&q.transcript_oracle, q.lang)
            }
            EncoderHandle::Fixture(f) => f.lookup(&q.id),
            #[cfg(feature = "remote")]
            EncoderHandle::Remote(r) => {
                let audio = q.audio.as_deref().ok_or_else(|| Error::MissingAudio(q.id.clone()))?;
                let req = audio_request(audio)?;
                r.check(r.client.encode_speech(&req)?)
            }
        }
    }
}
