//! The five system configurations and the benchmark loop.
//!
//! | mode         | query representation                 | context            |
//! |--------------|--------------------------------------|--------------------|
//! | `no_rag`     | speech (or transcript)               | none               |
//! | `facts`      | speech (or transcript)               | gold facts         |
//! | `asr_rag`    | ASR transcript -> text encoder       | top-k chunks       |
//! | `oracle_rag` | ground-truth transcript -> text enc. | top-k chunks       |
//! | `e2e_rag`    | speech encoder                       | top-k chunks       |
//!
//! Retrieval time runs from query submission (audio read included) until
//! the top-k ids return. Dataset IO, prompt assembly and generation are
//! outside the timed section.

pub mod generate;
pub mod prompt;
pub mod sweep;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::encoder::{AsrHandle, EncoderHandle};
use crate::error::{Error, Result};
use crate::index::{top_k, RetrievalConfig, VectorIndex};
use crate::ingest::Dataset;
use crate::metrics::{covered_em, latency_stats, retrieval_f1, NormalizationRule};
use crate::types::{
    Chunk, EmbeddingVector, EvalReport, PerQueryRecord, QueryRecord, QueryStatus, ReportMeta, RetrievalMode,
    RetrievalResult, StageTimings,
};

pub use generate::Generator;
pub use prompt::{assemble_prompt, PromptBundle, QuestionSlot};

pub const TIMING_BOUNDARY: &str =
    "query submission (audio read included) to top-k ids; excludes dataset IO, prompt assembly and generation";
pub const RETRIEVAL_F1_RULE: &str = "token F1 of the concatenated top-k chunk texts against the concatenated gold facts";
pub const ANSWER_METRIC: &str = "covered exact match: any normalized gold answer is a substring of the normalized prediction";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    NoRag,
    Facts,
    AsrRag,
    OracleRag,
    E2eRag,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::NoRag, Mode::Facts, Mode::AsrRag, Mode::OracleRag, Mode::E2eRag];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::NoRag => "no_rag",
            Mode::Facts => "facts",
            Mode::AsrRag => "asr_rag",
            Mode::OracleRag => "oracle_rag",
            Mode::E2eRag => "e2e_rag",
        }
    }

    pub fn uses_retrieval(self) -> bool {
        matches!(self, Mode::AsrRag | Mode::OracleRag | Mode::E2eRag)
    }

    pub fn retrieval_mode(self) -> Option<RetrievalMode> {
        match self {
            Mode::AsrRag => Some(RetrievalMode::Cascade),
            Mode::OracleRag => Some(RetrievalMode::Oracle),
            Mode::E2eRag => Some(RetrievalMode::E2e),
            Mode::NoRag | Mode::Facts => None,
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::FatalConfig(format!("unknown mode {s:?}")))
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub retrieval: RetrievalConfig,
    pub text_encoder: Option<EncoderHandle>,
    pub speech_encoder: Option<EncoderHandle>,
    pub asr: Option<AsrHandle>,
    pub generator: Option<Generator>,
    /// Worker threads for the benchmark loop. 1 keeps latency numbers clean.
    pub workers: usize,
}

impl PipelineConfig {
    pub fn new(mode: Mode) -> Self {
        PipelineConfig {
            mode,
            retrieval: RetrievalConfig::default(),
            text_encoder: None,
            speech_encoder: None,
            asr: None,
            generator: None,
            workers: 1,
        }
    }

    /// Rejects mode/backend combinations that cannot run.
    pub fn validate(&self) -> Result<()> {
        let missing = |what: &str| Err(Error::FatalConfig(format!("{} requires {what}", self.mode)));
        match self.mode {
            Mode::E2eRag if self.speech_encoder.is_none() => return missing("a speech encoder"),
            Mode::AsrRag if self.asr.is_none() => return missing("an ASR backend"),
            Mode::AsrRag | Mode::OracleRag if self.text_encoder.is_none() => return missing("a text encoder"),
            _ => {}
        }
        if self.retrieval.k == 0 {
            return Err(Error::FatalConfig("k must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::FatalConfig("workers must be at least 1".into()));
        }
        Ok(())
    }

    fn query_encoder(&self) -> Option<&EncoderHandle> {
        match self.mode {
            Mode::E2eRag => self.speech_encoder.as_ref(),
            Mode::AsrRag | Mode::OracleRag => self.text_encoder.as_ref(),
            Mode::NoRag | Mode::Facts => None,
        }
    }

    /// Embedding label shown in result tables.
    pub fn embedding_label(&self) -> String {
        self.query_encoder().map(EncoderHandle::label).unwrap_or_else(|| "-".into())
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

fn prepare_query(v: EmbeddingVector, ix: &VectorIndex) -> Result<EmbeddingVector> {
    if v.dim != ix.dim() {
        return Err(Error::DimensionMismatch { expected: ix.dim(), actual: v.dim });
    }
    if ix.normalized() && !v.normalized {
        EmbeddingVector::normalized_from(&v.values)
    } else {
        Ok(v)
    }
}

/// Retrieves the top-k chunks for one query, timing each stage.
pub fn run_retrieval(cfg: &PipelineConfig, ix: &VectorIndex, q: &QueryRecord) -> Result<RetrievalResult> {
    let mode = cfg
        .mode
        .retrieval_mode()
        .ok_or_else(|| Error::FatalConfig(format!("{} does not retrieve", cfg.mode)))?;
    if ix.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let no_input = q.audio.is_none() && q.transcript_oracle.trim().is_empty();
    let mut timings = StageTimings::default();
    let mut transcript = None;

    let query_vec = match mode {
        RetrievalMode::E2e => {
            if no_input {
                return Err(Error::MissingAudio(q.id.clone()));
            }
            let enc = cfg.speech_encoder.as_ref().ok_or_else(|| Error::FatalConfig("no speech encoder".into()))?;
            let (v, t) = timed(|| enc.encode_speech(q).and_then(|v| prepare_query(v, ix)))?;
            timings.embed = t;
            v
        }
        RetrievalMode::Cascade => {
            if no_input {
                return Err(Error::MissingAudio(q.id.clone()));
            }
            let asr = cfg.asr.as_ref().ok_or_else(|| Error::FatalConfig("no ASR backend".into()))?;
            let enc = cfg.text_encoder.as_ref().ok_or_else(|| Error::FatalConfig("no text encoder".into()))?;
            let ((text, _), t_asr) = timed(|| asr.transcribe(q))?;
            timings.asr = Some(t_asr);
            let (v, t) = timed(|| enc.encode_text_keyed(&q.id, &text, q.lang).and_then(|v| prepare_query(v, ix)))?;
            timings.embed = t;
            transcript = Some(text);
            v
        }
        RetrievalMode::Oracle => {
            let enc = cfg.text_encoder.as_ref().ok_or_else(|| Error::FatalConfig("no text encoder".into()))?;
            let text = q.transcript_oracle.trim();
            if text.is_empty() {
                return Err(Error::EmptyText);
            }
            let (v, t) = timed(|| enc.encode_text_keyed(&q.id, text, q.lang).and_then(|v| prepare_query(v, ix)))?;
            timings.embed = t;
            transcript = Some(text.to_string());
            v
        }
    };

    let (hits, t_search) = timed(|| top_k(ix, &query_vec, &cfg.retrieval))?;
    timings.search = t_search;
    Ok(RetrievalResult { query_id: q.id.clone(), hits, timings, mode, transcript })
}

/// Fraction of gold facts covered by some retrieved chunk (a chunk covers a
/// fact when the fact contains the chunk's text).
pub fn fact_recall<S: AsRef<str>>(hit_texts: &[S], gold_facts: &[String]) -> Option<f64> {
    if gold_facts.is_empty() {
        return None;
    }
    let found = gold_facts
        .iter()
        .filter(|g| {
            hit_texts.iter().any(|h| {
                let h = h.as_ref().trim();
                !h.is_empty() && g.contains(h)
            })
        })
        .count();
    Some(found as f64 / gold_facts.len() as f64)
}

fn question_slot(mode: Mode, q: &QueryRecord) -> QuestionSlot {
    match (mode, &q.audio) {
        (Mode::OracleRag, _) | (_, None) => QuestionSlot::Text(q.transcript_oracle.clone()),
        (_, Some(_)) => QuestionSlot::Speech,
    }
}

fn run_query(cfg: &PipelineConfig, chunks: &[Chunk], ix: Option<&VectorIndex>, q: &QueryRecord) -> Result<PerQueryRecord> {
    let rule = NormalizationRule::for_lang(q.lang);
    let mut rec = PerQueryRecord {
        query_id: q.id.clone(),
        status: QueryStatus::Ok,
        retrieval: None,
        retrieval_t: None,
        retrieval_f1: None,
        recall_at_k: None,
        answer: None,
        correct: None,
    };

    let context: Vec<String> = match cfg.mode {
        Mode::NoRag => Vec::new(),
        Mode::Facts => q.gold_facts.clone(),
        Mode::AsrRag | Mode::OracleRag | Mode::E2eRag => {
            let ix = ix.ok_or_else(|| Error::FatalConfig("retrieval mode without an index".into()))?;
            let result = run_retrieval(cfg, ix, q)?;
            let texts: Vec<String> = result
                .hits
                .iter()
                .map(|h| {
                    chunks
                        .get(h.chunk_id as usize)
                        .map(|c| c.text.clone())
                        .ok_or_else(|| Error::CountMismatch { index: ix.count(), chunks: chunks.len() as u64 })
                })
                .collect::<Result<_>>()?;
            if !q.gold_facts.is_empty() {
                rec.retrieval_f1 = Some(retrieval_f1(&texts, &q.gold_facts, &rule));
            }
            rec.recall_at_k = fact_recall(&texts, &q.gold_facts);
            rec.retrieval_t = Some(result.retrieval_time());
            rec.retrieval = Some(result);
            texts
        }
    };

    if let Some(generator) = &cfg.generator {
        let slot = question_slot(cfg.mode, q);
        let prompt = assemble_prompt(cfg.mode, &slot, &context)?;
        let audio = match slot {
            QuestionSlot::Speech => q.audio.as_deref(),
            QuestionSlot::Text(_) => None,
        };
        let (answer, _) = generator.generate(&prompt, audio)?;
        rec.correct = Some(covered_em(&answer, &q.gold_answers, &rule));
        rec.answer = Some(answer);
    }
    Ok(rec)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Runs every query of `dataset` through the configured pipeline.
///
/// Per-query failures are recorded in the report rather than aborting the
/// run; only contradictory configuration is fatal.
pub fn run_benchmark(cfg: &PipelineConfig, dataset: &Dataset, ix: Option<&VectorIndex>) -> Result<EvalReport> {
    cfg.validate()?;
    let ix = if cfg.mode.uses_retrieval() {
        let ix = ix.ok_or_else(|| Error::FatalConfig(format!("{} requires an index", cfg.mode)))?;
        if ix.count() != dataset.chunks.len() as u64 {
            return Err(Error::FatalConfig(format!(
                "index has {} rows but the corpus has {} chunks",
                ix.count(),
                dataset.chunks.len()
            )));
        }
        if let Some(enc) = cfg.query_encoder() {
            if enc.dim() != ix.dim() {
                return Err(Error::FatalConfig(format!("encoder dim {} != index dim {}", enc.dim(), ix.dim())));
            }
        }
        Some(ix)
    } else {
        if ix.is_some() {
            log::warn!("{} does not retrieve; index ignored", cfg.mode);
        }
        None
    };

    let n = dataset.queries.len();
    let run_one = |i: usize| -> PerQueryRecord {
        let q = &dataset.queries[i];
        run_query(cfg, &dataset.chunks, ix, q).unwrap_or_else(|e| {
            log::warn!("query {}: {e}", q.id);
            PerQueryRecord {
                query_id: q.id.clone(),
                status: QueryStatus::Failed(e.to_string()),
                retrieval: None,
                retrieval_t: None,
                retrieval_f1: None,
                recall_at_k: None,
                answer: None,
                correct: None,
            }
        })
    };

    let per_query: Vec<PerQueryRecord> = if cfg.workers <= 1 || n <= 1 {
        (0..n).map(run_one).collect()
    } else {
        let slots: Vec<Mutex<Option<PerQueryRecord>>> = (0..n).map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..cfg.workers.min(n) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    *slots[i].lock().unwrap() = Some(run_one(i));
                });
            }
        });
        slots.into_iter().map(|m| m.into_inner().unwrap().expect("every slot filled")).collect()
    };

    let times: Vec<f64> = per_query.iter().filter_map(|r| r.retrieval_t).collect();
    let f1s: Vec<f64> = per_query.iter().filter_map(|r| r.retrieval_f1).collect();
    let recalls: Vec<f64> = per_query.iter().filter_map(|r| r.recall_at_k).collect();
    let answered: Vec<f64> = per_query.iter().filter_map(|r| r.correct.map(|c| f64::from(u8::from(c)))).collect();
    let stats = if times.is_empty() { None } else { Some(latency_stats(&times)?) };

    let report = EvalReport {
        mode: cfg.mode.to_string(),
        dataset: dataset.name.clone(),
        embedding: cfg.embedding_label(),
        n_queries: n,
        retrieval_t_mean: stats.map(|s| s.mean),
        retrieval_t_p50: stats.map(|s| s.p50),
        retrieval_t_p95: stats.map(|s| s.p95),
        retrieval_f1_mean: mean(&f1s),
        recall_at_k_mean: mean(&recalls),
        answer_acc: mean(&answered),
        n_failed: per_query.iter().filter(|r| r.status != QueryStatus::Ok).count(),
        per_query,
        meta: ReportMeta {
            k: cfg.mode.uses_retrieval().then_some(cfg.retrieval.k),
            similarity: cfg
                .mode
                .uses_retrieval()
                .then(|| serde_json::to_value(cfg.retrieval.similarity).unwrap().as_str().unwrap().to_string()),
            normalization: NormalizationRule::for_lang(dataset.lang).describe(),
            retrieval_f1_rule: RETRIEVAL_F1_RULE.into(),
            answer_metric: ANSWER_METRIC.into(),
            timing_boundary: TIMING_BOUNDARY.into(),
            workers: cfg.workers,
            parallel: cfg.workers > 1,
            generation: cfg.generator.is_some(),
            created_unix_s: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs()),
            config: serde_json::Value::Null,
        },
    };
    report.validate()?;
    Ok(report)
}
