//! Flat exact-similarity vector index.
//!
//! Rows are stored L2-normalized, so cosine similarity reduces to a dot
//! product divided by the query norm. Search is a single pass over the
//! matrix with a bounded heap of size `k`; equal scores rank by ascending
//! chunk id.
//!
//! On-disk layout of `index.bin` (little-endian):
//!
//! ```text
//! magic "CMRI" | u32 version | u32 dim | u64 count | u8 normalized | 7 pad | count*dim f32
//! ```
//!
//! A sibling `index.meta.json` records the paired `chunks.jsonl`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderHandle;
use crate::error::{Error, Result};
use crate::types::{l2_norm, Chunk, EmbeddingVector, Hit, NORM_TOLERANCE};

pub const MAGIC: [u8; 4] = *b"CMRI";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;
pub const DEFAULT_K: usize = 4;
const ENCODE_BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    #[default]
    Cosine,
    Dot,
}

impl std::str::FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Similarity::Cosine),
            "dot" => Ok(Similarity::Dot),
            other => Err(Error::FatalConfig(format!("unknown similarity {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub k: usize,
    #[serde(default)]
    pub similarity: Similarity,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig { k: DEFAULT_K, similarity: Similarity::Cosine }
    }
}

/// Row-major `count x dim` f32 matrix plus the chunk file it is aligned with.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    normalized: bool,
    vectors: Vec<f32>,
    chunk_store: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub chunks: PathBuf,
    pub dim: usize,
    pub count: u64,
    pub normalized: bool,
}

impl VectorIndex {
    /// Wraps a raw matrix, checking shape, finiteness and (when flagged) row norms.
    pub fn from_rows(dim: usize, vectors: Vec<f32>, normalized: bool) -> Result<Self> {
        if dim == 0 || !vectors.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: vectors.len() });
        }
        if let Some(index) = vectors.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteComponent { index });
        }
        if normalized {
            for row in vectors.chunks_exact(dim) {
                let norm = l2_norm(row);
                if (norm - 1.0).abs() > NORM_TOLERANCE {
                    return Err(Error::NormViolation { norm });
                }
            }
        }
        Ok(VectorIndex { dim, normalized, vectors, chunk_store: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        (self.vectors.len() / self.dim) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.vectors.chunks_exact(self.dim)
    }

    pub fn chunk_store(&self) -> Option<&Path> {
        self.chunk_store.as_deref()
    }

    pub fn with_chunk_store(mut self, path: impl Into<PathBuf>) -> Self {
        self.chunk_store = Some(path.into());
        self
    }
}

/// Encodes every chunk with the text encoder and stores normalized rows.
pub fn build_index(chunks: &[Chunk], enc: &EncoderHandle) -> Result<VectorIndex> {
    if chunks.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if let Some((i, c)) = chunks.iter().enumerate().find(|(i, c)| c.id != *i as u64) {
        return Err(Error::MalformedRecord { record: i, reason: format!("chunk id {} at row {i}", c.id) });
    }
    let dim = enc.dim();
    let mut vectors = Vec::with_capacity(chunks.len() * dim);
    for batch in chunks.chunks(ENCODE_BATCH) {
        let items: Vec<(String, &str)> = batch.iter().map(|c| (c.id.to_string(), c.text.as_str())).collect();
        let embedded = enc.encode_keyed_batch(&items, batch[0].lang).map_err(|e| {
            // attribute the failure to the batch's first chunk unless the error names one
            let chunk_id = match &e {
                Error::FixtureMiss(key) => key.parse().unwrap_or(batch[0].id),
                _ => batch[0].id,
            };
            Error::EncoderFailure { chunk_id, source: Box::new(e) }
        })?;
        for (c, v) in batch.iter().zip(embedded) {
            if v.dim != dim {
                return Err(Error::EncoderFailure {
                    chunk_id: c.id,
                    source: Box::new(Error::DimensionMismatch { expected: dim, actual: v.dim }),
                });
            }
            let v = if v.normalized {
                v
            } else {
                EmbeddingVector::normalized_from(&v.values)
                    .map_err(|e| Error::EncoderFailure { chunk_id: c.id, source: Box::new(e) })?
            };
            vectors.extend_from_slice(&v.values);
        }
    }
    VectorIndex::from_rows(dim, vectors, true)
}

/// Cosine similarity with f64 accumulation.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim != b.dim || a.values.len() != b.values.len() {
        return Err(Error::DimensionMismatch { expected: a.dim, actual: b.dim });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let d = dot(&a.values, &b.values);
    Ok((d / (na * nb)).clamp(-1.0, 1.0))
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Heap entry ordered so that the *worst* retained hit sits on top.
#[derive(Debug, Clone, Copy)]
struct Ranked {
    score: f32,
    id: u64,
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        // lower score is worse; on equal scores the larger id is worse
        other.score.total_cmp(&self.score).then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

/// Exact top-k search. Returns `min(k, count)` hits, best first.
pub fn top_k(ix: &VectorIndex, q: &EmbeddingVector, cfg: &RetrievalConfig) -> Result<Vec<Hit>> {
    if ix.is_empty() {
        return Err(Error::EmptyIndex);
    }
    if q.dim != ix.dim || q.values.len() != ix.dim {
        return Err(Error::DimensionMismatch { expected: ix.dim, actual: q.values.len() });
    }
    if cfg.k == 0 {
        return Err(Error::FatalConfig("k must be at least 1".into()));
    }
    let q_norm = q.norm();
    if cfg.similarity == Similarity::Cosine && q_norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let k = cfg.k.min(ix.count() as usize);
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
    for (i, row) in ix.rows().enumerate() {
        let raw = dot(&q.values, row);
        let score = match cfg.similarity {
            Similarity::Dot => raw,
            Similarity::Cosine if ix.normalized => raw / q_norm,
            Similarity::Cosine => {
                let r = l2_norm(row);
                if r == 0.0 {
                    0.0
                } else {
                    raw / (q_norm * r)
                }
            }
        } as f32;
        let cand = Ranked { score, id: i as u64 };
        if heap.len() < k {
            heap.push(cand);
        } else if let Some(worst) = heap.peek() {
            if cand < *worst {
                heap.pop();
                heap.push(cand);
            }
        }
    }
    Ok(heap.into_sorted_vec().into_iter().map(|r| Hit { chunk_id: r.id, score: r.score }).collect())
}

fn encode_header(dim: usize, count: u64, normalized: bool) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(&MAGIC);
    h[4..8].copy_from_slice(&VERSION.to_le_bytes());
    h[8..12].copy_from_slice(&(dim as u32).to_le_bytes());
    h[12..20].copy_from_slice(&count.to_le_bytes());
    h[20] = u8::from(normalized);
    h
}

/// Serializes the matrix in the `index.bin` layout.
pub fn encode_vectors(ix: &VectorIndex) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + ix.vectors.len() * 4);
    out.extend_from_slice(&encode_header(ix.dim, ix.count(), ix.normalized));
    for x in &ix.vectors {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_vectors(bytes: &[u8]) -> Result<VectorIndex> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated(format!("{} header bytes", bytes.len())));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let normalized = bytes[20] != 0;
    let expected = (count as usize)
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Truncated("header size overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(Error::Truncated(format!("expected {expected} payload bytes, found {}", body.len())));
    }
    let vectors = body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    VectorIndex::from_rows(dim, vectors, normalized)
}

pub fn write_vector_file(path: &Path, ix: &VectorIndex) -> Result<()> {
    fs::write(path, encode_vectors(ix))?;
    Ok(())
}

pub fn read_vector_file(path: &Path) -> Result<VectorIndex> {
    decode_vectors(&fs::read(path)?)
}

pub fn meta_path(index_path: &Path) -> PathBuf {
    index_path.with_file_name("index.meta.json")
}

/// Writes `index.bin` and its sibling `index.meta.json`.
pub fn save_index(ix: &VectorIndex, path: &Path) -> Result<()> {
    write_vector_file(path, ix)?;
    let meta = IndexMeta {
        chunks: ix.chunk_store.clone().unwrap_or_else(|| PathBuf::from("chunks.jsonl")),
        dim: ix.dim,
        count: ix.count(),
        normalized: ix.normalized,
    };
    fs::write(meta_path(path), serde_json::to_vec_pretty(&meta)?)?;
    Ok(())
}

fn count_lines(path: &Path) -> Result<u64> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().filter(|l| !l.trim().is_empty()).count() as u64)
}

/// Loads an index and checks it against its chunk file.
pub fn load_index(path: &Path) -> Result<VectorIndex> {
    let ix = read_vector_file(path)?;
    let meta: IndexMeta = serde_json::from_slice(&fs::read(meta_path(path))?)?;
    if meta.dim != ix.dim || meta.count != ix.count() || meta.normalized != ix.normalized {
        return Err(Error::CountMismatch { index: ix.count(), chunks: meta.count });
    }
    let chunks = if meta.chunks.is_relative() {
        path.parent().unwrap_or(Path::new(".")).join(&meta.chunks)
    } else {
        meta.chunks.clone()
    };
    let lines = count_lines(&chunks)?;
    if lines != ix.count() {
        return Err(Error::CountMismatch { index: ix.count(), chunks: lines });
    }
    Ok(ix.with_chunk_store(chunks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::mock::{MockEncoder, SplitMix64};
    use crate::types::Lang;

    fn unit(values: &[f32]) -> EmbeddingVector {
        EmbeddingVector::normalized_from(values).unwrap()
    }

    fn random_index(n: usize, dim: usize, seed: u64) -> VectorIndex {
        let mut rng = SplitMix64::new(seed);
        let mut data = Vec::new();
        for _ in 0..n {
            let row: Vec<f32> = (0..dim).map(|_| rng.next_f64() as f32 - 0.5).collect();
            data.extend(unit(&row).values);
        }
        VectorIndex::from_rows(dim, data, true).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let a = EmbeddingVector::new(vec![0.6, 0.8], true).unwrap();
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let x = EmbeddingVector::new(vec![1.0, 0.0], false).unwrap();
        let y = EmbeddingVector::new(vec![0.0, 1.0], false).unwrap();
        assert_eq!(cosine_similarity(&x, &y).unwrap(), 0.0);
        let d = EmbeddingVector::new(vec![1.0, 1.0], false).unwrap();
        assert!((cosine_similarity(&d, &x).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-7);
    }

    #[test]
    fn cosine_errors() {
        let x = EmbeddingVector::new(vec![1.0, 0.0], false).unwrap();
        let z = EmbeddingVector::new(vec![0.0, 0.0], false).unwrap();
        let three = EmbeddingVector::new(vec![1.0, 0.0, 0.0], false).unwrap();
        assert!(matches!(cosine_similarity(&x, &z), Err(Error::ZeroNorm)));
        assert!(matches!(cosine_similarity(&x, &three), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn query_equal_to_row_ranks_first() {
        let ix = random_index(20, 16, 3);
        let q = EmbeddingVector::new(ix.row(5).to_vec(), true).unwrap();
        let hits = top_k(&ix, &q, &RetrievalConfig::default()).unwrap();
        assert_eq!(hits[0].chunk_id, 5);
        assert!((hits[0].score - 1.0).abs() < 1e-5);
    }

    #[test]
    fn k_is_clamped_to_count() {
        let ix = random_index(3, 8, 1);
        let q = EmbeddingVector::new(ix.row(0).to_vec(), true).unwrap();
        let hits = top_k(&ix, &q, &RetrievalConfig { k: 10, similarity: Similarity::Cosine }).unwrap();
        assert_eq!(hits.len(), 3);
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let row = unit(&[1.0, 0.0]).values;
        let data: Vec<f32> = std::iter::repeat_n(row.clone(), 5).flatten().collect();
        let ix = VectorIndex::from_rows(2, data, true).unwrap();
        let q = EmbeddingVector::new(row, true).unwrap();
        let hits = top_k(&ix, &q, &RetrievalConfig { k: 3, similarity: Similarity::Dot }).unwrap();
        assert_eq!(hits.iter().map(|h| h.chunk_id).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn top_k_errors() {
        let ix = random_index(3, 8, 1);
        let q = EmbeddingVector::new(vec![1.0; 4], false).unwrap();
        assert!(matches!(top_k(&ix, &q, &RetrievalConfig::default()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn build_matches_per_row_encoding() {
        let texts = [
            "The Laleli Mosque is an Ottoman imperial mosque.",
            "It is located in Laleli, Fatih, Istanbul.",
            "The Esma Sultan Mansion is a waterside mansion.",
            "It is located at Bosphorus in Ortakoy.",
            "Kiss and Tell is a 1945 American comedy film.",
            "Shirley Temple starred as Corliss Archer.",
            "Shirley Temple Black was an American diplomat.",
            "She served as Chief of Protocol of the United States.",
            "Big Stone Gap is a 2014 romantic comedy film.",
            "Adriana Trigiani is based in Greenwich Village.",
        ];
        let chunks: Vec<Chunk> =
            texts.iter().enumerate().map(|(i, t)| Chunk::new(i as u64, "d", *t, Lang::En).unwrap()).collect();
        let enc = MockEncoder::new(16, 7);
        let ix = build_index(&chunks, &EncoderHandle::Mock(enc.clone())).unwrap();
        assert_eq!((ix.count(), ix.dim()), (10, 16));
        for (i, t) in texts.iter().enumerate() {
            let v = crate::encoder::mock::mock_text_encode(t, Lang::En, 16, 7).unwrap();
            assert_eq!(ix.row(i), v.values.as_slice());
        }
    }

    #[test]
    fn build_rejects_empty_corpus() {
        let enc = EncoderHandle::Mock(MockEncoder::new(16, 7));
        assert!(matches!(build_index(&[], &enc), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let ix = random_index(10, 16, 9);
        let chunks: Vec<Chunk> = (0..10).map(|i| Chunk::new(i, "d", format!("c{i}"), Lang::En).unwrap()).collect();
        crate::ingest::write_chunks(&dir.path().join("chunks.jsonl"), &chunks).unwrap();
        let path = dir.path().join("index.bin");
        save_index(&ix, &path).unwrap();
        let back = load_index(&path).unwrap();
        assert_eq!(back.vectors.len(), ix.vectors.len());
        assert!(back.vectors.iter().zip(&ix.vectors).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!((back.dim(), back.count(), back.normalized()), (16, 10, true));
    }

    #[test]
    fn header_is_28_bytes() {
        let ix = random_index(2, 8, 1);
        let bytes = encode_vectors(&ix);
        assert_eq!(bytes.len(), 28 + 2 * 8 * 4);
        assert_eq!(&bytes[0..4], b"CMRI");
        assert!(bytes[21..28].iter().all(|&b| b == 0));
    }

    #[test]
    fn bad_magic_and_version() {
        let ix = random_index(2, 8, 1);
        let mut bytes = encode_vectors(&ix);
        bytes[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_vectors(&bytes), Err(Error::BadMagic(m)) if &m == b"XXXX"));
        let mut bytes = encode_vectors(&ix);
        bytes[4] = 2;
        assert!(matches!(decode_vectors(&bytes), Err(Error::VersionUnsupported(2))));
        let bytes = encode_vectors(&ix);
        assert!(matches!(decode_vectors(&bytes[..40]), Err(Error::Truncated(_))));
    }
}
