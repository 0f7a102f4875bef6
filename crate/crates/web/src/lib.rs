//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export takes plain values and returns a JSON string; the same
//! logic is exposed as ordinary Rust functions for native tests.

use cmrag_core::encoder::{EncoderHandle, MockEncoder};
use cmrag_core::index::{build_index, top_k, RetrievalConfig};
use cmrag_core::ingest::{chunk_document, ChunkingPolicy, Dataset};
use cmrag_core::metrics::{cer, covered_em, token_prf, wer, NormalizationRule};
use cmrag_core::pipeline::sweep::{sweep_alignment, SweepRow};
use cmrag_core::synth::synthetic_dataset;
use cmrag_core::types::{Chunk, Lang};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest synthetic corpus the page may request.
pub const MAX_SWEEP_CHUNKS: usize = 5000;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn parse_eps(list: &str) -> Result<Vec<f64>, String> {
    let eps = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite() && *x >= 0.0))
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| format!("eps must be non-negative numbers: {list:?}"))?;
    if eps.is_empty() {
        return Err("no eps values".into());
    }
    Ok(eps)
}

/// Recall, retrieval F1 and top-1 accuracy of noisy mock speech queries
/// against a synthetic corpus, one row per noise level.
pub fn sweep(n_chunks: usize, n_queries: usize, dim: usize, seed: u64, eps: &str, k: usize) -> Result<Vec<SweepRow>, String> {
    if n_chunks > MAX_SWEEP_CHUNKS {
        return Err(format!("at most {MAX_SWEEP_CHUNKS} chunks"));
    }
    if k == 0 {
        return Err("k must be at least 1".into());
    }
    let eps = parse_eps(eps)?;
    let ds = synthetic_dataset(n_chunks, n_queries, seed).map_err(err)?;
    let enc = MockEncoder::new(dim, seed);
    let ix = build_index(&ds.chunks, &EncoderHandle::Mock(enc.clone())).map_err(err)?;
    sweep_alignment(&ds, &ix, &enc, &eps, &RetrievalConfig { k, ..RetrievalConfig::default() }).map_err(err)
}

#[derive(Debug, Serialize, PartialEq)]
pub struct PlaygroundHit {
    pub rank: usize,
    pub chunk_id: u64,
    pub score: f32,
    pub text: String,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Playground {
    pub n_chunks: usize,
    /// Hits for the query embedded as text.
    pub text_hits: Vec<PlaygroundHit>,
    /// Hits for the query embedded by the noisy speech side.
    pub speech_hits: Vec<PlaygroundHit>,
}

fn parse_lang(lang: &str) -> Result<Lang, String> {
    lang.parse().map_err(err)
}

/// Chunks `corpus` (paragraphs split by blank lines) and retrieves `query`
/// twice: once through the text encoder and once through the speech
/// encoder with alignment noise `eps`.
#[allow(clippy::too_many_arguments)]
pub fn playground(
    corpus: &str,
    query: &str,
    lang: &str,
    max_chars: usize,
    eps: f64,
    k: usize,
    dim: usize,
    seed: u64,
) -> Result<Playground, String> {
    let lang = parse_lang(lang)?;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err("eps must be >= 0".into());
    }
    if k == 0 {
        return Err("k must be at least 1".into());
    }
    let policy = ChunkingPolicy::sentence(max_chars);
    let mut chunks: Vec<Chunk> = Vec::new();
    for (p, para) in corpus.split("\n\n").filter(|p| !p.trim().is_empty()).enumerate() {
        for mut c in chunk_document(&format!("p{p}"), para, lang, &policy).map_err(err)? {
            c.id = chunks.len() as u64;
            chunks.push(c);
        }
    }
    let ds = Dataset { name: "playground".into(), lang, chunks, queries: Vec::new() };
    let text_enc = MockEncoder::new(dim, seed);
    let ix = build_index(&ds.chunks, &EncoderHandle::Mock(text_enc.clone())).map_err(err)?;
    let cfg = RetrievalConfig { k, ..RetrievalConfig::default() };
    let hits = |v| -> Result<Vec<PlaygroundHit>, String> {
        Ok(top_k(&ix, &v, &cfg)
            .map_err(err)?
            .into_iter()
            .enumerate()
            .map(|(i, h)| PlaygroundHit {
                rank: i + 1,
                chunk_id: h.chunk_id,
                score: h.score,
                text: ds.chunks[h.chunk_id as usize].text.clone(),
            })
            .collect())
    };
    let text_q = text_enc.encode_text_batch(&[query], lang).map_err(err)?.remove(0);
    let speech_q = text_enc.clone().with_eps(eps).encode_speech_transcript(query, lang).map_err(err)?;
    Ok(Playground { n_chunks: ds.chunks.len(), text_hits: hits(text_q)?, speech_hits: hits(speech_q)? })
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub covered_em: bool,
    /// Word error rate of the prediction against the gold text.
    pub wer: Option<f64>,
    pub cer: Option<f64>,
}

/// Answer and transcript metrics for one prediction/gold pair.
pub fn score_pair(prediction: &str, gold: &str, lang: &str) -> Result<Scores, String> {
    let rule = NormalizationRule::for_lang(parse_lang(lang)?);
    let prf = token_prf(prediction, gold, &rule);
    Ok(Scores {
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        covered_em: covered_em(prediction, &[gold], &rule),
        wer: wer(gold, prediction).ok(),
        cer: cer(gold, prediction).ok(),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(err)).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn alignment_sweep(n_chunks: usize, n_queries: usize, dim: usize, seed: u32, eps: &str, k: usize) -> Result<String, JsValue> {
    to_js(sweep(n_chunks, n_queries, dim, u64::from(seed), eps, k))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn retrieve(
    corpus: &str,
    query: &str,
    lang: &str,
    max_chars: usize,
    eps: f64,
    k: usize,
    dim: usize,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(playground(corpus, query, lang, max_chars, eps, k, dim, u64::from(seed)))
}

#[wasm_bindgen]
pub fn score(prediction: &str, gold: &str, lang: &str) -> Result<String, JsValue> {
    to_js(score_pair(prediction, gold, lang))
}
