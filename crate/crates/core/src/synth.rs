//! Synthetic corpora for desk-scale experiments.
//!
//! Sentences are drawn from a pseudo-word vocabulary with a skewed word
//! distribution, so frequent words are shared across many chunks and
//! lexical overlap between unrelated chunks is realistic. Every query's
//! transcript equals one distinct chunk text.

use std::collections::HashSet;

use crate::encoder::mock::SplitMix64;
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::types::{Chunk, Lang, QueryRecord};

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr"];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];
const VOCAB: usize = 3000;
const CHUNKS_PER_DOC: usize = 5;

fn vocabulary(rng: &mut SplitMix64) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut words = Vec::with_capacity(VOCAB);
    while words.len() < VOCAB {
        let syllables = 2 + rng.below(2);
        let w: String = (0..syllables)
            .map(|_| {
                let o = ONSETS[rng.below(ONSETS.len() as u64) as usize];
                let v = VOWELS[rng.below(VOWELS.len() as u64) as usize];
                format!("{o}{v}")
            })
            .collect();
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

/// `n_chunks` distinct English sentences and `n_queries` queries, each
/// targeting a different chunk.
pub fn synthetic_dataset(n_chunks: usize, n_queries: usize, seed: u64) -> Result<Dataset> {
    if n_chunks == 0 {
        return Err(Error::EmptyCorpus);
    }
    if n_queries > n_chunks {
        return Err(Error::FatalConfig(format!("{n_queries} queries need at least as many chunks")));
    }
    let mut rng = SplitMix64::new(seed);
    let vocab = vocabulary(&mut rng);
    let mut seen = HashSet::new();
    let mut chunks = Vec::with_capacity(n_chunks);
    while chunks.len() < n_chunks {
        let len = 8 + rng.below(9) as usize;
        let words: Vec<&str> = (0..len)
            .map(|_| {
                let u = rng.next_f64();
                vocab[((u * u) * VOCAB as f64) as usize].as_str()
            })
            .collect();
        let mut text = words.join(" ");
        text.push('.');
        if seen.insert(text.clone()) {
            let id = chunks.len() as u64;
            chunks.push(Chunk { id, doc_id: format!("synth{}", id as usize / CHUNKS_PER_DOC), text, lang: Lang::En });
        }
    }

    let mut order: Vec<usize> = (0..n_chunks).collect();
    for i in 0..n_queries {
        let j = i + rng.below((n_chunks - i) as u64) as usize;
        order.swap(i, j);
    }
    let queries = order[..n_queries]
        .iter()
        .enumerate()
        .map(|(qi, &ci)| {
            let text = chunks[ci].text.clone();
            let answer = text.trim_end_matches('.').rsplit(' ').next().unwrap_or_default().to_string();
            QueryRecord {
                id: format!("sq{qi}"),
                audio: None,
                transcript_oracle: text.clone(),
                gold_answers: vec![answer],
                gold_facts: vec![text],
                lang: Lang::En,
            }
        })
        .collect();
    Ok(Dataset { name: "synthetic".into(), lang: Lang::En, chunks, queries })
}
