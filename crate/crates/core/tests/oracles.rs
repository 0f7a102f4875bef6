//! Independent oracles for the mock encoders, the index and the metrics.
//!
//! Every oracle here is written from the definition, without calling the
//! code path it checks. Frozen vectors were produced by a separate
//! reimplementation outside this crate.

mod common;

use std::collections::HashMap;

use cmrag_core::encoder::mock::{mock_text_encode, perturb, speech_noise_seed};
use cmrag_core::encoder::{EncoderHandle, MockEncoder};
use cmrag_core::index::{top_k, RetrievalConfig, Similarity, VectorIndex};
use cmrag_core::ingest::{chunk_document, ChunkingPolicy};
use cmrag_core::metrics::{cer, covered_em, token_f1, token_prf, wer, NormalizationRule};
use cmrag_core::types::{Chunk, EmbeddingVector, Hit, Lang, QueryRecord, RetrievalMode, RetrievalResult, StageTimings};
use common::oracle::{brute_force, oracle_chars, oracle_edit, oracle_f1, oracle_words};
use proptest::prelude::*;

// ---------------------------------------------------------------- hashing

fn oracle_fnv(bytes: &[u8]) -> u64 {
    let mut h: u64 = 14695981039346656037;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(1099511628211);
    }
    h
}

fn oracle_finalize(x: u64) -> u64 {
    let mut z = x;
    z ^= z >> 30;
    z = z.wrapping_mul(13787848793156543929);
    z ^= z >> 27;
    z = z.wrapping_mul(10723151780598845931);
    z ^ (z >> 31)
}

/// Hash-and-accumulate by brute force over a bucket map.
fn oracle_encode(text: &str, dim: usize, seed: u64) -> Vec<f32> {
    let lower = text.to_lowercase();
    let mut counts: HashMap<usize, i64> = HashMap::new();
    let mut token = String::new();
    for c in lower.chars().chain(std::iter::once(' ')) {
        if c.is_alphanumeric() {
            token.push(c);
        } else if !token.is_empty() {
            let h = oracle_finalize(oracle_fnv(token.as_bytes()) ^ seed);
            let sign = if h & (1 << 63) != 0 { 1 } else { -1 };
            *counts.entry((h % dim as u64) as usize).or_insert(0) += sign;
            token.clear();
        }
    }
    let norm: f64 = counts.values().map(|&c| (c as f64).powi(2)).sum::<f64>().sqrt();
    (0..dim).map(|i| (*counts.get(&i).unwrap_or(&0) as f64 / norm) as f32).collect()
}

#[test]
fn mock_encoding_matches_frozen_vector_dim16() {
    let v = mock_text_encode("laleli mosque", Lang::En, 16, 1).unwrap();
    let mut expected = vec![0.0f32; 16];
    expected[0] = -0.70710677;
    expected[3] = -0.70710677;
    assert_eq!(v.values, expected);
    assert_eq!(v.values, oracle_encode("laleli mosque", 16, 1));
}

#[test]
fn mock_encoding_matches_frozen_vector_dim256() {
    let h = EncoderHandle::mock(256, 7);
    let v = h.encode_text_batch(&["the laleli mosque"], Lang::En).unwrap().remove(0);
    let mut expected = vec![0.0f32; 256];
    expected[73] = 0.57735026;
    expected[115] = 0.57735026;
    expected[126] = -0.57735026;
    assert_eq!(v.values, expected);
    assert_eq!(v.values, oracle_encode("the laleli mosque", 256, 7));
}

proptest! {
    #[test]
    fn mock_encoding_matches_oracle(words in prop::collection::vec("[a-z]{1,8}", 1..20), seed in any::<u64>()) {
        let text = words.join(" ");
        let v = mock_text_encode(&text, Lang::En, 64, seed).unwrap();
        let o = oracle_encode(&text, 64, seed);
        if o.iter().all(|x| x.is_finite()) {
            prop_assert_eq!(v.values, o);
        }
    }

    #[test]
    fn mock_encoding_is_bag_of_tokens(mut words in prop::collection::vec("[a-z]{1,8}", 1..12)) {
        let a = mock_text_encode(&words.join(" "), Lang::En, 64, 3).unwrap();
        words.reverse();
        let b = mock_text_encode(&words.join(", "), Lang::En, 64, 3).unwrap();
        prop_assert_eq!(a, b);
    }
}

// ------------------------------------------------------------ perturbation

/// Box-Muller over a hand-rolled splitmix64 stream.
fn oracle_normals(seed: u64, n: usize) -> Vec<f64> {
    let mut state = seed;
    let mut next = || {
        state = state.wrapping_add(0x9E3779B97F4A7C15);
        oracle_finalize(state)
    };
    let mut out = Vec::new();
    while out.len() < n {
        let a = (next() >> 11) as f64 / 9007199254740992.0;
        let b = (next() >> 11) as f64 / 9007199254740992.0;
        let radius = (-2.0 * (1.0 - a).ln()).sqrt();
        let angle = std::f64::consts::TAU * b;
        out.push(radius * angle.cos());
        out.push(radius * angle.sin());
    }
    out.truncate(n);
    out
}

fn oracle_perturb(v: &[f32], eps: f64, seed: u64) -> Vec<f32> {
    let g = oracle_normals(seed, v.len());
    let w: Vec<f64> = v.iter().zip(&g).map(|(&x, &n)| f64::from(x) + eps * n).collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    w.iter().map(|x| (x / norm) as f32).collect()
}

#[test]
fn speech_perturbation_matches_frozen_vector() {
    let text = "the laleli mosque";
    let enc = MockEncoder::new(16, 7).with_eps(0.5);
    let got = enc.encode_speech_transcript(text, Lang::En).unwrap();
    let expected: [f32; 16] = [
        -0.04150501, 0.10812779, -0.023635972, 0.3527072, 0.05123902, 0.1204307, -0.40724435, 0.47304517,
        -0.1072111, 0.28006396, -0.15590851, 0.14645521, -0.057254773, 0.21057351, -0.35363805, -0.3827665,
    ];
    assert_eq!(got.values, expected);

    let seed = oracle_finalize(oracle_fnv(text.as_bytes()) ^ 7 ^ 0x5350_4545_4348_0001);
    assert_eq!(seed, speech_noise_seed(7, text));
    assert_eq!(got.values, oracle_perturb(&oracle_encode(text, 16, 7), 0.5, seed));
}

#[test]
fn mean_alignment_decreases_with_noise() {
    let v = mock_text_encode("Adriana Trigiani is based in Greenwich Village", Lang::En, 256, 7).unwrap();
    let mean_cos = |eps: f64| {
        (0..1000u64)
            .map(|s| {
                let p = perturb(&v, eps, s).unwrap();
                v.values.iter().zip(&p.values).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum::<f64>()
            })
            .sum::<f64>()
            / 1000.0
    };
    let c: Vec<f64> = [0.2, 0.5, 1.0].iter().map(|&e| mean_cos(e)).collect();
    assert!(c[0] > c[1] && c[1] > c[2], "{c:?}");
    // isotropic noise in 256 dims: E[cos] ~ 1 / sqrt(1 + eps^2 * dim)
    for (eps, got) in [0.2, 0.5, 1.0].iter().zip(&c) {
        let approx = 1.0 / (1.0 + eps * eps * 256.0f64).sqrt();
        assert!((got - approx).abs() < 0.05, "eps {eps}: {got} vs {approx}");
    }
}

// -------------------------------------------------------------------- top-k


fn unit_rows(rows: &[Vec<f32>]) -> VectorIndex {
    let dim = rows[0].len();
    let data: Vec<f32> = rows.iter().flat_map(|r| EmbeddingVector::normalized_from(r).unwrap().values).collect();
    VectorIndex::from_rows(dim, data, true).unwrap()
}

fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-1.0f32..1.0, dim).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn top_k_equals_brute_force(rows in prop::collection::vec(vec_strategy(8), 1..60), q in vec_strategy(8), k in 1usize..12) {
        let ix = unit_rows(&rows);
        let qv = EmbeddingVector::new(q.clone(), false).unwrap();
        let hits = top_k(&ix, &qv, &RetrievalConfig { k, similarity: Similarity::Cosine }).unwrap();
        let got: Vec<(u64, f32)> = hits.iter().map(|h| (h.chunk_id, h.score)).collect();
        prop_assert_eq!(got, brute_force(&ix, &q, k));
    }

    #[test]
    fn top_k_handles_duplicate_rows(base in prop::collection::vec(vec_strategy(4), 1..5), reps in 2usize..6, q in vec_strategy(4)) {
        let rows: Vec<Vec<f32>> = base.iter().cycle().take(base.len() * reps).cloned().collect();
        let ix = unit_rows(&rows);
        let qv = EmbeddingVector::new(q.clone(), false).unwrap();
        let hits = top_k(&ix, &qv, &RetrievalConfig { k: 7, similarity: Similarity::Cosine }).unwrap();
        let got: Vec<(u64, f32)> = hits.iter().map(|h| (h.chunk_id, h.score)).collect();
        prop_assert_eq!(got, brute_force(&ix, &q, 7));
    }

    #[test]
    fn ranking_is_scale_invariant(rows in prop::collection::vec(vec_strategy(8), 1..40), q in vec_strategy(8), c in 0.01f32..100.0) {
        let ix = unit_rows(&rows);
        let cfg = RetrievalConfig { k: 5, similarity: Similarity::Cosine };
        let ids = |v: Vec<f32>| -> Vec<u64> {
            top_k(&ix, &EmbeddingVector::new(v, false).unwrap(), &cfg).unwrap().iter().map(|h| h.chunk_id).collect()
        };
        let base = ids(q.clone());
        prop_assert_eq!(ids(q.iter().map(|x| x * 2.0).collect()), base.clone());
        // non power-of-two scales may move an exact near-tie by one ulp; compare as sets then
        let mut scaled = ids(q.iter().map(|x| x * c).collect());
        let mut b = base;
        scaled.sort();
        b.sort();
        prop_assert_eq!(scaled, b);
    }

    #[test]
    fn top_k_plus_one_extends_top_k(rows in prop::collection::vec(vec_strategy(6), 2..40), q in vec_strategy(6), k in 1usize..10) {
        let ix = unit_rows(&rows);
        let qv = EmbeddingVector::new(q, false).unwrap();
        let a = top_k(&ix, &qv, &RetrievalConfig { k, similarity: Similarity::Cosine }).unwrap();
        let b = top_k(&ix, &qv, &RetrievalConfig { k: k + 1, similarity: Similarity::Cosine }).unwrap();
        prop_assert_eq!(&b[..a.len()], &a[..]);
        prop_assert_eq!(b.len(), (k + 1).min(rows.len()));
    }
}

// ------------------------------------------------------------------ metrics

fn en() -> NormalizationRule {
    NormalizationRule::for_lang(Lang::En)
}





const SENTENCE: &str = "[a-cA-C ,.]{0,24}";

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn token_f1_matches_counting_oracle(a in SENTENCE, b in SENTENCE) {
        let got = token_f1(&a, &b, &en());
        let want = oracle_f1(&en().tokens(&a), &en().tokens(&b));
        prop_assert!((got - want).abs() <= 1e-9);
    }

    #[test]
    fn token_f1_is_symmetric(a in SENTENCE, b in SENTENCE) {
        prop_assert!((token_f1(&a, &b, &en()) - token_f1(&b, &a, &en())).abs() <= 1e-12);
    }

    #[test]
    fn token_aligned_cover_implies_full_recall(p in "[a-d ]{1,20}", g in "[a-d]{1,3}( [a-d]{1,3})?") {
        let (pt, gt) = (en().tokens(&p), en().tokens(&g));
        let aligned = !gt.is_empty() && pt.windows(gt.len()).any(|w| w == gt.as_slice());
        if aligned {
            prop_assert!(covered_em(&p, &[&g], &en()));
            prop_assert_eq!(token_prf(&p, &g, &en()).recall, 1.0);
        }
    }

    #[test]
    fn wer_matches_dp_oracle(a in "[a-c ]{1,30}", b in "[a-c ]{0,30}") {
        let r = oracle_words(&a);
        prop_assume!(!r.is_empty());
        let want = oracle_edit(&r, &oracle_words(&b)) as f64 / r.len() as f64;
        prop_assert!((wer(&a, &b).unwrap() - want).abs() <= 1e-9);
    }

    #[test]
    fn cer_matches_dp_oracle(a in "[a-d北京 ]{1,20}", b in "[a-d北京 ]{0,20}") {
        let r = oracle_chars(&a);
        prop_assume!(!r.is_empty());
        let want = oracle_edit(&r, &oracle_chars(&b)) as f64 / r.len() as f64;
        prop_assert!((cer(&a, &b).unwrap() - want).abs() <= 1e-9);
    }

    #[test]
    fn metrics_ignore_outer_whitespace(a in SENTENCE, b in SENTENCE) {
        let padded = format!("  {a}\t\n");
        prop_assert_eq!(token_f1(&padded, &b, &en()), token_f1(&a, &b, &en()));
        prop_assert_eq!(covered_em(&padded, &[&b], &en()), covered_em(&a, &[&b], &en()));
    }
}

#[test]
fn character_cover_can_split_tokens() {
    // containment is on characters, so a cover inside a longer word scores no token overlap
    assert!(covered_em("xcat", &["cat"], &en()));
    assert_eq!(token_prf("xcat", "cat", &en()).recall, 0.0);
}

#[test]
fn wer_dp_oracle_on_spec_example() {
    let r = oracle_words("the cat sat");
    assert_eq!(oracle_edit(&r, &oracle_words("the cat")), 1);
    assert!((wer("the cat sat", "the cat").unwrap() - 1.0 / 3.0).abs() < 1e-9);
}

#[test]
fn f1_counting_oracle_on_spec_example() {
    let p = en().tokens("Greenwich Village New York");
    let g = en().tokens("Greenwich Village");
    assert!((oracle_f1(&p, &g) - 2.0 / 3.0).abs() < 1e-6);
    assert!((token_f1("Greenwich Village New York", "Greenwich Village", &en()) - 0.6667).abs() < 1e-4);
}

// ----------------------------------------------------------------- chunking

proptest! {
    #[test]
    fn sentence_chunks_cover_text(text in "[a-z]{1,6}([ ]{1,2}[a-z]{1,6}[.!?]?){0,30}", max in 4usize..40) {
        prop_assume!(!text.trim().is_empty());
        let chunks = chunk_document("d", &text, Lang::En, &ChunkingPolicy::sentence(max)).unwrap();
        let squash = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        let joined: String = chunks.iter().map(|c| squash(&c.text)).collect();
        prop_assert_eq!(joined, squash(&text));
        for c in &chunks {
            prop_assert!(c.text.chars().count() <= max);
        }
    }

    #[test]
    fn windows_respect_limit(text in "[a-z ]{1,200}", max in 2usize..50, overlap_frac in 0.0f64..0.9) {
        prop_assume!(!text.trim().is_empty());
        let overlap = ((max as f64) * overlap_frac) as usize;
        let chunks = chunk_document("d", &text, Lang::En, &ChunkingPolicy::fixed_window(max, overlap.min(max - 1))).unwrap();
        prop_assert!(!chunks.is_empty());
        for c in &chunks {
            prop_assert!(c.text.chars().count() <= max);
        }
    }
}

// ----------------------------------------------------------- serialization

fn lang() -> impl Strategy<Value = Lang> {
    prop_oneof![Just(Lang::En), Just(Lang::Zh)]
}

proptest! {
    #[test]
    fn core_types_roundtrip_through_json(
        id in any::<u64>(),
        text in "[a-z]{1,10}",
        l in lang(),
        values in prop::collection::vec(-10.0f32..10.0, 1..10),
        answers in prop::collection::vec("[a-z ]{1,8}", 1..3),
        score in -1.0f32..1.0,
    ) {
        let chunk = Chunk::new(id, "doc", text.clone(), l).unwrap();
        prop_assert_eq!(serde_json::from_str::<Chunk>(&serde_json::to_string(&chunk).unwrap()).unwrap(), chunk);

        let v = EmbeddingVector::new(values, false).unwrap();
        prop_assert_eq!(serde_json::from_str::<EmbeddingVector>(&serde_json::to_string(&v).unwrap()).unwrap(), v);

        let q = QueryRecord {
            id: text.clone(),
            audio: Some(format!("{text}.wav").into()),
            transcript_oracle: text,
            gold_answers: answers.clone(),
            gold_facts: answers,
            lang: l,
        };
        prop_assert_eq!(serde_json::from_str::<QueryRecord>(&serde_json::to_string(&q).unwrap()).unwrap(), q);

        let r = RetrievalResult {
            query_id: "q".into(),
            hits: vec![Hit { chunk_id: id, score }],
            timings: StageTimings { asr: Some(0.25), embed: 0.5, search: 0.125 },
            mode: RetrievalMode::Cascade,
            transcript: None,
        };
        prop_assert_eq!(serde_json::from_str::<RetrievalResult>(&serde_json::to_string(&r).unwrap()).unwrap(), r);
    }
}
