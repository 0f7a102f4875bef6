//! Domain types shared by the ingest, encoder, index, pipeline and metrics
//! modules. Everything here is immutable once constructed.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the L2 norm of vectors flagged as normalized.
pub const NORM_TOLERANCE: f64 = 1e-5;

/// Benchmark language. Only English and Chinese are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", try_from = "String", into = "String")]
pub enum Lang {
    En,
    Zh,
}

impl Lang {
    pub fn as_str(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::Zh => "zh",
        }
    }
}

impl FromStr for Lang {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "en" => Ok(Lang::En),
            "zh" => Ok(Lang::Zh),
            other => Err(Error::UnsupportedLanguage(other.to_string())),
        }
    }
}

impl TryFrom<String> for Lang {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Lang> for String {
    fn from(l: Lang) -> String {
        l.as_str().to_string()
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One indexable text unit. `id` is the chunk's 0-based row in its corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: u64,
    pub doc_id: String,
    pub text: String,
    pub lang: Lang,
}

impl Chunk {
    pub fn new(id: u64, doc_id: impl Into<String>, text: impl Into<String>, lang: Lang) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        Ok(Chunk { id, doc_id: doc_id.into(), text, lang })
    }
}

/// Dense embedding produced by a text or speech encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub dim: usize,
    pub values: Vec<f32>,
    pub normalized: bool,
}

impl EmbeddingVector {
    /// Builds a vector and checks its invariants.
    pub fn new(values: Vec<f32>, normalized: bool) -> Result<Self> {
        validate_embedding(EmbeddingVector { dim: values.len(), values, normalized })
    }

    /// L2-normalizes `values` (computed in f64) and returns a flagged vector.
    pub fn normalized_from(values: &[f32]) -> Result<Self> {
        let norm = l2_norm(values);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let values = values.iter().map(|&x| (x as f64 / norm) as f32).collect();
        EmbeddingVector::new(values, true)
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }
}

pub(crate) fn l2_norm(values: &[f32]) -> f64 {
    values.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

/// Returns `v` unchanged when its dimension, finiteness and norm invariants hold.
pub fn validate_embedding(v: EmbeddingVector) -> Result<EmbeddingVector> {
    if v.dim == 0 || v.values.len() != v.dim {
        return Err(Error::DimensionMismatch { expected: v.dim, actual: v.values.len() });
    }
    if let Some(index) = v.values.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteComponent { index });
    }
    if v.normalized {
        let norm = v.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NormViolation { norm });
        }
    }
    Ok(v)
}

/// A spoken (or transcribed) benchmark question with its gold annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<PathBuf>,
    #[serde(default)]
    pub transcript_oracle: String,
    pub gold_answers: Vec<String>,
    #[serde(default)]
    pub gold_facts: Vec<String>,
    pub lang: Lang,
}

impl QueryRecord {
    pub fn validate(&self) -> Result<()> {
        if self.audio.is_none() && self.transcript_oracle.trim().is_empty() {
            return Err(Error::MissingAudio(self.id.clone()));
        }
        if self.gold_answers.is_empty() {
            return Err(Error::MalformedRecord {
                record: 0,
                reason: format!("query {:?} has no gold answers", self.id),
            });
        }
        Ok(())
    }
}

/// Which query representation drove the retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    /// Speech embedded directly into the text space.
    E2e,
    /// ASR transcript, then text retrieval.
    Cascade,
    /// Ground-truth transcript, then text retrieval.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub chunk_id: u64,
    pub score: f32,
}

/// Per-stage wall-clock durations in seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asr: Option<f64>,
    pub embed: f64,
    pub search: f64,
}

impl StageTimings {
    /// Retrieval time: the sum of all recorded stages.
    pub fn total(&self) -> f64 {
        self.asr.unwrap_or(0.0) + self.embed + self.search
    }

    pub fn as_map(&self) -> BTreeMap<&'static str, f64> {
        let mut m = BTreeMap::new();
        if let Some(asr) = self.asr {
            m.insert("asr", asr);
        }
        m.insert("embed", self.embed);
        m.insert("search", self.search);
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query_id: String,
    pub hits: Vec<Hit>,
    pub timings: StageTimings,
    pub mode: RetrievalMode,
    /// Transcript used for text retrieval (cascade and oracle modes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
}

impl RetrievalResult {
    pub fn retrieval_time(&self) -> f64 {
        self.timings.total()
    }
}

/// Outcome of one query in a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerQueryRecord {
    pub query_id: String,
    pub status: QueryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<RetrievalResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_at_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "error", rename_all = "snake_case")]
pub enum QueryStatus {
    Ok,
    Failed(String),
}

/// Metadata echoed into every report so runs stay comparable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<String>,
    #[serde(default)]
    pub normalization: String,
    #[serde(default)]
    pub retrieval_f1_rule: String,
    #[serde(default)]
    pub answer_metric: String,
    #[serde(default)]
    pub timing_boundary: String,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub parallel: bool,
    #[serde(default)]
    pub generation: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix_s: Option<u64>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
}

/// Aggregated benchmark metrics, one row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: String,
    pub dataset: String,
    #[serde(default)]
    pub embedding: String,
    pub n_queries: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_t_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_t_p50: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_t_p95: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_f1_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_at_k_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_acc: Option<f64>,
    #[serde(default)]
    pub n_failed: usize,
    #[serde(default)]
    pub per_query: Vec<PerQueryRecord>,
    #[serde(default)]
    pub meta: ReportMeta,
}

impl EvalReport {
    /// Checks rate ranges, non-negative times and the query count.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::MalformedResponse(format!("report {what} out of range")));
        for (name, rate) in [
            ("retrieval_f1_mean", self.retrieval_f1_mean),
            ("recall_at_k_mean", self.recall_at_k_mean),
            ("answer_acc", self.answer_acc),
        ] {
            if let Some(r) = rate {
                if !(0.0..=1.0).contains(&r) {
                    return bad(name);
                }
            }
        }
        for (name, t) in [
            ("retrieval_t_mean", self.retrieval_t_mean),
            ("retrieval_t_p50", self.retrieval_t_p50),
            ("retrieval_t_p95", self.retrieval_t_p95),
        ] {
            if let Some(t) = t {
                if t < 0.0 || !t.is_finite() {
                    return bad(name);
                }
            }
        }
        if !self.per_query.is_empty() && self.per_query.len() != self.n_queries {
            return bad("n_queries");
        }
        Ok(())
    }

    /// JSON value with every clock-derived field removed: the creation
    /// timestamp and all measured durations. Two runs with identical inputs
    /// and seeds produce identical values.
    pub fn deterministic_json(&self) -> serde_json::Value {
        let mut r = self.clone();
        r.retrieval_t_mean = None;
        r.retrieval_t_p50 = None;
        r.retrieval_t_p95 = None;
        r.meta.created_unix_s = None;
        for q in &mut r.per_query {
            q.retrieval_t = None;
            if let Some(ret) = &mut q.retrieval {
                ret.timings = StageTimings::default();
            }
        }
        serde_json::to_value(r).expect("report serializes")
    }
}
