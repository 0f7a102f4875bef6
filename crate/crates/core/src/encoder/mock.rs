//! Deterministic stand-ins for the text and speech encoders.
//!
//! The text side is signed feature hashing over a bag of tokens. The speech
//! side encodes the oracle transcript and adds isotropic Gaussian noise of
//! magnitude `eps`, which models imperfect alignment between the speech and
//! text encoders of a shared embedding space.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::types::{EmbeddingVector, Lang};

pub const MIN_MOCK_DIM: usize = 8;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
/// Salt mixed into per-transcript noise seeds for the speech encoder.
pub const SPEECH_SALT: u64 = 0x5350_4545_4348_0001;
/// Salt used for the single re-draw after a zero-norm perturbation.
const REDRAW_SALT: u64 = 0xd1b5_4a32_d192_ed03;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The splitmix64 generator. Used wherever the mocks need a seeded stream,
/// so every mock output is a pure function of its inputs and seed.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [0, n). Modulo bias is irrelevant at the sizes used here.
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

/// `n` standard normal draws: splitmix64 uniforms through Box–Muller, both
/// outputs of each pair used in order.
pub fn standard_normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let u1 = 1.0 - rng.next_f64();
        let u2 = rng.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        out.push(r * theta.cos());
        out.push(r * theta.sin());
    }
    out.truncate(n);
    out
}

/// Lowercased tokens: words split on non-alphanumerics for English, single
/// characters for Chinese.
pub fn mock_tokens(text: &str, lang: Lang) -> Vec<String> {
    let lower = text.to_lowercase();
    match lang {
        Lang::En => lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect(),
        Lang::Zh => lower.chars().filter(|c| c.is_alphanumeric()).map(|c| c.to_string()).collect(),
    }
}

/// Signed feature hashing of the token bag, L2-normalized.
pub fn mock_text_encode(text: &str, lang: Lang, dim: usize, seed: u64) -> Result<EmbeddingVector> {
    if dim < MIN_MOCK_DIM {
        return Err(Error::DimensionMismatch { expected: MIN_MOCK_DIM, actual: dim });
    }
    if text.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let tokens = mock_tokens(text, lang);
    if tokens.is_empty() {
        return Err(Error::AllTokensEmpty);
    }
    let mut acc = vec![0i64; dim];
    for tok in &tokens {
        let h = mix64(fnv1a64(tok.as_bytes()) ^ seed);
        let bucket = (h % dim as u64) as usize;
        acc[bucket] += if h >> 63 == 1 { 1 } else { -1 };
    }
    let norm = acc.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
    if norm == 0.0 {
        // every token cancelled out; fall back to unsigned counts
        for tok in &tokens {
            let h = mix64(fnv1a64(tok.as_bytes()) ^ seed);
            acc[(h % dim as u64) as usize] += 1;
        }
    }
    let norm = acc.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
    let values = acc.iter().map(|&c| (c as f64 / norm) as f32).collect();
    EmbeddingVector::new(values, true)
}

/// `normalize(v + eps * g)` with `g` a seeded standard normal vector.
/// `eps == 0` returns `v` unchanged.
pub fn perturb(v: &EmbeddingVector, eps: f64, seed: u64) -> Result<EmbeddingVector> {
    if eps == 0.0 {
        return Ok(v.clone());
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::BadSpec { spec: eps.to_string(), reason: "eps must be finite and >= 0".into() });
    }
    for s in [seed, mix64(seed ^ REDRAW_SALT)] {
        let g = standard_normals(s, v.dim);
        let w: Vec<f64> = v.values.iter().zip(&g).map(|(&x, &n)| x as f64 + eps * n).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            let values = w.iter().map(|x| (x / norm) as f32).collect();
            return EmbeddingVector::new(values, true);
        }
    }
    Err(Error::ZeroNormAfterPerturbation)
}

/// Noise seed for the mock speech encoding of `transcript`.
pub fn speech_noise_seed(seed: u64, transcript: &str) -> u64 {
    mix64(fnv1a64(transcript.as_bytes()) ^ seed ^ SPEECH_SALT)
}

/// Number of calls made against a mock encoder, shared between clones.
#[derive(Debug, Default)]
pub struct CallCounters {
    pub text_batches: AtomicU64,
    pub speech: AtomicU64,
}

#[derive(Debug, Clone)]
pub struct MockEncoder {
    pub dim: usize,
    pub seed: u64,
    /// Speech-side alignment noise.
    pub eps: f64,
    /// Simulated latency per encode call, seconds.
    pub delay_s: f64,
    pub counters: Arc<CallCounters>,
}

impl MockEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        MockEncoder { dim, seed, eps: 0.0, delay_s: 0.0, counters: Arc::default() }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_delay(mut self, delay_s: f64) -> Self {
        self.delay_s = delay_s;
        self
    }

    fn simulate_latency(&self) {
        if self.delay_s > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(self.delay_s));
        }
    }

    pub fn encode_text_batch(&self, texts: &[&str], lang: Lang) -> Result<Vec<EmbeddingVector>> {
        self.counters.text_batches.fetch_add(1, Ordering::Relaxed);
        self.simulate_latency();
        texts.iter().map(|t| mock_text_encode(t, lang, self.dim, self.seed)).collect()
    }

    /// Text encoding of the transcript, perturbed by the alignment noise.
    pub fn encode_speech_transcript(&self, transcript: &str, lang: Lang) -> Result<EmbeddingVector> {
        self.counters.speech.fetch_add(1, Ordering::Relaxed);
        self.simulate_latency();
        let v = mock_text_encode(transcript, lang, self.dim, self.seed)?;
        perturb(&v, self.eps, speech_noise_seed(self.seed, transcript))
    }

    pub fn text_calls(&self) -> u64 {
        self.counters.text_batches.load(Ordering::Relaxed)
    }

    pub fn speech_calls(&self) -> u64 {
        self.counters.speech.load(Ordering::Relaxed)
    }
}
