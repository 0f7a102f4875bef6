//! Speech recognition backends for the cascade pipeline.

use std::time::Duration;
#[cfg(feature = "remote")]
use std::time::Instant;

use crate::encoder::mock::{fnv1a64, mix64, SplitMix64};
use crate::error::{Error, Result};
use crate::types::{Lang, QueryRecord};

#[cfg(feature = "remote")]
use crate::service::{audio_request, ServiceClient};

const SYLLABLES: [&str; 12] = ["ka", "lo", "mi", "ren", "tas", "vu", "zel", "po", "qui", "dor", "sen", "fa"];
const ZH_FILLERS: &str = "的一是不了人我在有他这中大来上国个到说们为子和你地出道也时年";

/// Simulated recognizer: the oracle transcript with a fixed fraction of its
/// words (characters for Chinese) substituted, after a fixed delay.
#[derive(Debug, Clone, PartialEq)]
pub struct MockAsr {
    pub delay_s: f64,
    /// Fraction of units substituted, in [0, 1].
    pub wer_knob: f64,
    pub seed: u64,
}

impl MockAsr {
    pub fn new(delay_s: f64, wer_knob: f64, seed: u64) -> Result<Self> {
        if !(delay_s >= 0.0 && delay_s.is_finite()) {
            return Err(Error::BadSpec { spec: delay_s.to_string(), reason: "delay must be >= 0".into() });
        }
        if !(0.0..=1.0).contains(&wer_knob) {
            return Err(Error::BadSpec { spec: wer_knob.to_string(), reason: "wer knob must lie in [0, 1]".into() });
        }
        Ok(MockAsr { delay_s, wer_knob, seed })
    }

    /// Corrupts `transcript` deterministically. Returns the text without
    /// sleeping.
    pub fn corrupt(&self, transcript: &str, lang: Lang) -> String {
        let mut units: Vec<String> = match lang {
            Lang::En => transcript.split_whitespace().map(str::to_string).collect(),
            Lang::Zh => transcript.chars().filter(|c| !c.is_whitespace()).map(|c| c.to_string()).collect(),
        };
        let n = units.len();
        let n_sub = ((self.wer_knob * n as f64) + 1e-9).floor() as usize;
        let mut rng = SplitMix64::new(mix64(self.seed ^ fnv1a64(transcript.as_bytes())));
        let mut order: Vec<usize> = (0..n).collect();
        for i in 0..n_sub.min(n) {
            let j = i + rng.below((n - i) as u64) as usize;
            order.swap(i, j);
        }
        for &pos in &order[..n_sub.min(n)] {
            units[pos] = replacement(&units[pos], lang, &mut rng);
        }
        match lang {
            Lang::En => units.join(" "),
            Lang::Zh => units.concat(),
        }
    }
}

fn replacement(original: &str, lang: Lang, rng: &mut SplitMix64) -> String {
    let original = original.to_lowercase();
    loop {
        let candidate = match lang {
            Lang::En => {
                let n = 2 + rng.below(2);
                (0..n).map(|_| SYLLABLES[rng.below(SYLLABLES.len() as u64) as usize]).collect::<String>()
            }
            Lang::Zh => {
                let fillers: Vec<char> = ZH_FILLERS.chars().collect();
                fillers[rng.below(fillers.len() as u64) as usize].to_string()
            }
        };
        if candidate != original {
            return candidate;
        }
    }
}

#[derive(Debug, Clone)]
pub enum AsrHandle {
    Mock(MockAsr),
    #[cfg(feature = "remote")]
    Remote(ServiceClient),
}

impl AsrHandle {
    /// Parses `mock:delay=0.3,wer=0.13,seed=1` or `remote:http://host:port`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match kind {
            "mock" => {
                let kv = super::parse_kv(spec, rest)?;
                let get = |k: &str, d: f64| kv.get(k).map(|v| super::num(spec, k, v)).unwrap_or(Ok(d));
                let seed = get("seed", 0.0)? as u64;
                Ok(AsrHandle::Mock(MockAsr::new(get("delay", 0.0)?, get("wer", 0.0)?, seed)?))
            }
            #[cfg(feature = "remote")]
            "remote" => Ok(AsrHandle::Remote(ServiceClient::new(rest, crate::service::DEFAULT_TIMEOUT)?)),
            _ => Err(Error::BadSpec { spec: spec.into(), reason: "expected mock:... or remote:URL".into() }),
        }
    }

    pub fn is_mock(&self) -> bool {
        matches!(self, AsrHandle::Mock(_))
    }

    /// Returns the transcript and the elapsed recognition time in seconds.
    pub fn transcribe(&self, q: &QueryRecord) -> Result<(String, f64)> {
        match self {
            AsrHandle::Mock(m) => {
                if q.transcript_oracle.trim().is_empty() {
                    return Err(Error::MissingTranscriptForMock(q.id.clone()));
                }
                if m.delay_s > 0.0 {
                    std::thread::sleep(Duration::from_secs_f64(m.delay_s));
                }
                Ok((m.corrupt(&q.transcript_oracle, q.lang), m.delay_s))
            }
            #[cfg(feature = "remote")]
            AsrHandle::Remote(client) => {
                let audio = q.audio.as_deref().ok_or_else(|| Error::MissingAudio(q.id.clone()))?;
                let start = Instant::now();
                let req = audio_request(audio)?;
                let resp = client.transcribe(&req)?;
                Ok((resp.text, start.elapsed().as_secs_f64()))
            }
        }
    }
}
