//! Retrieval quality as a function of speech/text alignment noise.

use serde::{Deserialize, Serialize};

use super::fact_recall;
use crate::encoder::MockEncoder;
use crate::error::{Error, Result};
use crate::index::{top_k, RetrievalConfig, VectorIndex};
use crate::ingest::Dataset;
use crate::metrics::{retrieval_f1, NormalizationRule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub recall_at_k: f64,
    pub retrieval_f1: f64,
    /// Fraction of queries whose top hit is a gold chunk.
    pub top1_accuracy: f64,
}

/// Runs end-to-end retrieval with mock speech encoders of increasing noise.
///
/// `base` supplies dim and seed; its own `eps` is ignored. The index must
/// have been built with a mock text encoder of the same dim and seed.
pub fn sweep_alignment(
    dataset: &Dataset,
    ix: &VectorIndex,
    base: &MockEncoder,
    eps_values: &[f64],
    cfg: &RetrievalConfig,
) -> Result<Vec<SweepRow>> {
    if ix.count() != dataset.chunks.len() as u64 {
        return Err(Error::CountMismatch { index: ix.count(), chunks: dataset.chunks.len() as u64 });
    }
    if base.dim != ix.dim() {
        return Err(Error::DimensionMismatch { expected: ix.dim(), actual: base.dim });
    }
    let queries: Vec<_> = dataset.queries.iter().filter(|q| !q.gold_facts.is_empty()).collect();
    if queries.is_empty() {
        return Err(Error::FatalConfig("sweep needs queries with gold facts".into()));
    }
    let mut rows = Vec::with_capacity(eps_values.len());
    for &eps in eps_values {
        let enc = MockEncoder::new(base.dim, base.seed).with_eps(eps);
        let (mut recall, mut f1, mut top1) = (0.0, 0.0, 0.0);
        for q in &queries {
            let v = enc.encode_speech_transcript(&q.transcript_oracle, q.lang)?;
            let hits = top_k(ix, &v, cfg)?;
            let texts: Vec<&str> = hits.iter().map(|h| dataset.chunks[h.chunk_id as usize].text.as_str()).collect();
            recall += fact_recall(&texts, &q.gold_facts).unwrap_or(0.0);
            f1 += retrieval_f1(&texts, &q.gold_facts, &NormalizationRule::for_lang(q.lang));
            if fact_recall(&texts[..1], &q.gold_facts).unwrap_or(0.0) > 0.0 {
                top1 += 1.0;
            }
        }
        let n = queries.len() as f64;
        rows.push(SweepRow { eps, recall_at_k: recall / n, retrieval_f1: f1 / n, top1_accuracy: top1 / n });
    }
    Ok(rows)
}
