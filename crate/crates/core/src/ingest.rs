//! Dataset loading and chunking.
//!
//! Supported inputs are the HotpotQA distractor JSON, RGB JSONL, and the
//! project's own `chunks.jsonl` / `queries.jsonl` / `manifest.jsonl` files.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::types::{Chunk, Lang, QueryRecord};

pub const DEFAULT_MAX_CHARS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkStrategy {
    Sentence,
    FixedWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingPolicy {
    pub strategy: ChunkStrategy,
    pub max_chars: usize,
    #[serde(default)]
    pub window_overlap: usize,
}

impl ChunkingPolicy {
    pub fn sentence(max_chars: usize) -> Self {
        ChunkingPolicy { strategy: ChunkStrategy::Sentence, max_chars, window_overlap: 0 }
    }

    pub fn fixed_window(max_chars: usize, window_overlap: usize) -> Self {
        ChunkingPolicy { strategy: ChunkStrategy::FixedWindow, max_chars, window_overlap }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_chars == 0 {
            return Err(Error::InvalidPolicy("max_chars must be positive".into()));
        }
        if self.window_overlap >= self.max_chars {
            return Err(Error::InvalidPolicy("overlap must be smaller than max_chars".into()));
        }
        Ok(())
    }
}

impl Default for ChunkingPolicy {
    fn default() -> Self {
        ChunkingPolicy::sentence(DEFAULT_MAX_CHARS)
    }
}

/// A loaded benchmark: the retrieval corpus plus its questions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub lang: Lang,
    pub chunks: Vec<Chunk>,
    pub queries: Vec<QueryRecord>,
}

/// Accumulates chunks with sequential ids, skipping exact duplicates
/// (same document and text) that recur across benchmark records.
#[derive(Debug, Default)]
struct CorpusBuilder {
    chunks: Vec<Chunk>,
    seen: HashSet<(String, String)>,
}

impl CorpusBuilder {
    fn push(&mut self, doc_id: &str, text: &str, lang: Lang) {
        let text = text.trim();
        if text.is_empty() || !self.seen.insert((doc_id.to_string(), text.to_string())) {
            return;
        }
        let id = self.chunks.len() as u64;
        self.chunks.push(Chunk { id, doc_id: doc_id.to_string(), text: text.to_string(), lang });
    }

    fn push_all(&mut self, pieces: Vec<Chunk>) {
        for c in pieces {
            self.push(&c.doc_id, &c.text, c.lang);
        }
    }
}

const SENTENCE_END: [char; 6] = ['.', '!', '?', '。', '！', '？'];

fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if SENTENCE_END.contains(&c) {
            // keep runs like "?!" or "..." inside one sentence
            let mut end = i + c.len_utf8();
            while let Some(&(j, d)) = chars.peek() {
                if SENTENCE_END.contains(&d) {
                    end = j + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            let s = text[start..end].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = end;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// Fixed windows of at most `max_chars` characters, advancing by
/// `max_chars - overlap`.
fn fixed_windows(text: &str, max_chars: usize, overlap: usize) -> Vec<String> {
    let chars: Vec<char> = text.trim().chars().collect();
    let step = max_chars - overlap;
    let mut out = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let end = (start + max_chars).min(chars.len());
        let piece: String = chars[start..end].iter().collect();
        let piece = piece.trim();
        if !piece.is_empty() {
            out.push(piece.to_string());
        }
        if end == chars.len() {
            break;
        }
        start += step;
    }
    out
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Splits one document into chunks of at most `policy.max_chars` characters.
/// Chunk ids are local (0-based within the document).
pub fn chunk_document(doc_id: &str, text: &str, lang: Lang, policy: &ChunkingPolicy) -> Result<Vec<Chunk>> {
    policy.validate()?;
    if text.trim().is_empty() {
        return Err(Error::EmptyText);
    }
    let pieces = match policy.strategy {
        ChunkStrategy::FixedWindow => fixed_windows(text, policy.max_chars, policy.window_overlap),
        ChunkStrategy::Sentence => {
            let sep = if lang == Lang::Zh { "" } else { " " };
            let mut out: Vec<String> = Vec::new();
            let mut current = String::new();
            for sentence in split_sentences(text) {
                // over-long sentences fall back to hard windows
                let parts = if char_len(sentence) > policy.max_chars {
                    fixed_windows(sentence, policy.max_chars, 0)
                } else {
                    vec![sentence.to_string()]
                };
                for part in parts {
                    if current.is_empty() {
                        current = part;
                    } else if char_len(&current) + sep.len() + char_len(&part) <= policy.max_chars {
                        current.push_str(sep);
                        current.push_str(&part);
                    } else {
                        out.push(std::mem::replace(&mut current, part));
                    }
                }
            }
            if !current.is_empty() {
                out.push(current);
            }
            out
        }
    };
    Ok(pieces
        .into_iter()
        .enumerate()
        .map(|(i, text)| Chunk { id: i as u64, doc_id: doc_id.to_string(), text, lang })
        .collect())
}

fn read_json_value(path: &Path) -> Result<Value> {
    let reader = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(reader)?)
}

fn field<'a>(rec: &'a Value, name: &str, record: usize) -> Result<&'a Value> {
    rec.get(name)
        .filter(|v| !v.is_null())
        .ok_or_else(|| Error::MalformedRecord { record, reason: format!("missing `{name}`") })
}

fn as_str<'a>(v: &'a Value, what: &str, record: usize) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| Error::MalformedRecord { record, reason: format!("`{what}` is not a string") })
}

/// Flattens string or (nested) list-valued answers.
fn collect_answers(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::String(s) if !s.trim().is_empty() => out.push(s.trim().to_string()),
        Value::Array(items) => items.iter().for_each(|i| collect_answers(i, out)),
        Value::Number(n) => out.push(n.to_string()),
        _ => {}
    }
}

/// Loads a HotpotQA distractor-format JSON array.
pub fn load_hotpotqa(path: &Path, policy: &ChunkingPolicy) -> Result<Dataset> {
    let v = read_json_value(path)?;
    parse_hotpotqa(&v, policy)
}

pub fn parse_hotpotqa(v: &Value, policy: &ChunkingPolicy) -> Result<Dataset> {
    policy.validate()?;
    let records = v
        .as_array()
        .ok_or_else(|| Error::MalformedRecord { record: 0, reason: "top level is not an array".into() })?;
    let lang = Lang::En;
    let mut corpus = CorpusBuilder::default();
    let mut queries = Vec::with_capacity(records.len());

    for (record, rec) in records.iter().enumerate() {
        let question = as_str(field(rec, "question", record)?, "question", record)?;
        let mut gold_answers = Vec::new();
        collect_answers(field(rec, "answer", record)?, &mut gold_answers);
        if gold_answers.is_empty() {
            return Err(Error::MalformedRecord { record, reason: "empty `answer`".into() });
        }
        let context = field(rec, "context", record)?
            .as_array()
            .ok_or_else(|| Error::MalformedRecord { record, reason: "`context` is not an array".into() })?;

        let mut paragraphs: HashMap<String, Vec<String>> = HashMap::new();
        for para in context {
            let bad = || Error::MalformedRecord { record, reason: "context entry is not [title, [sentences]]".into() };
            let title = para.get(0).and_then(Value::as_str).ok_or_else(bad)?;
            let sentences: Vec<String> = para
                .get(1)
                .and_then(Value::as_array)
                .ok_or_else(bad)?
                .iter()
                .map(|s| s.as_str().map(str::to_string).ok_or_else(bad))
                .collect::<Result<_>>()?;
            match policy.strategy {
                ChunkStrategy::Sentence => {
                    for s in &sentences {
                        corpus.push(title, s, lang);
                    }
                }
                ChunkStrategy::FixedWindow => {
                    let joined = sentences.concat();
                    if !joined.trim().is_empty() {
                        corpus.push_all(chunk_document(title, &joined, lang, policy)?);
                    }
                }
            }
            paragraphs.insert(title.to_string(), sentences);
        }

        let mut gold_facts = Vec::new();
        if let Some(Value::Array(facts)) = rec.get("supporting_facts") {
            for fact in facts {
                let title = fact.get(0).and_then(Value::as_str);
                let idx = fact.get(1).and_then(Value::as_u64);
                let resolved = match (title, idx) {
                    (Some(t), Some(i)) => paragraphs.get(t).and_then(|s| s.get(i as usize)),
                    _ => None,
                };
                match resolved {
                    Some(s) if !s.trim().is_empty() => gold_facts.push(s.trim().to_string()),
                    _ => log::warn!("record {record}: unresolvable supporting fact {fact}"),
                }
            }
        }

        let id = rec
            .get("_id")
            .or_else(|| rec.get("id"))
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| record.to_string());
        queries.push(QueryRecord {
            id,
            audio: None,
            transcript_oracle: question.trim().to_string(),
            gold_answers,
            gold_facts,
            lang,
        });
    }

    Ok(Dataset { name: "hotpotqa".into(), lang, chunks: corpus.chunks, queries })
}

/// Loads an RGB JSONL file. Positive and negative passages are both indexed.
pub fn load_rgb(path: &Path, lang: &str, policy: &ChunkingPolicy) -> Result<Dataset> {
    let lang: Lang = lang.parse()?;
    let reader = BufReader::new(File::open(path)?);
    let mut lines = Vec::new();
    for line in reader.lines() {
        lines.push(line?);
    }
    parse_rgb(lines.iter().map(String::as_str), lang, policy)
}

pub fn parse_rgb<'a>(lines: impl Iterator<Item = &'a str>, lang: Lang, policy: &ChunkingPolicy) -> Result<Dataset> {
    policy.validate()?;
    let mut corpus = CorpusBuilder::default();
    let mut queries = Vec::new();
    for (record, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let rec: Value = serde_json::from_str(line)
            .map_err(|e| Error::MalformedRecord { record, reason: e.to_string() })?;
        let query = as_str(field(&rec, "query", record)?, "query", record)?;
        let mut gold_answers = Vec::new();
        collect_answers(field(&rec, "answer", record)?, &mut gold_answers);
        if gold_answers.is_empty() {
            return Err(Error::MalformedRecord { record, reason: "empty `answer`".into() });
        }
        let id = match rec.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => record.to_string(),
        };
        let docs = |name: &str| -> Vec<String> {
            match rec.get(name) {
                Some(Value::Array(items)) => items
                    .iter()
                    .filter_map(Value::as_str)
                    .filter(|s| !s.trim().is_empty())
                    .map(str::to_string)
                    .collect(),
                Some(Value::String(s)) if !s.trim().is_empty() => vec![s.clone()],
                _ => Vec::new(),
            }
        };
        let positive = docs("positive");
        let negative = docs("negative");
        if positive.is_empty() && negative.is_empty() {
            return Err(Error::EmptyDocumentSet { record });
        }
        for (kind, list) in [("pos", &positive), ("neg", &negative)] {
            for (i, doc) in list.iter().enumerate() {
                let doc_id = format!("{id}/{kind}{i}");
                corpus.push_all(chunk_document(&doc_id, doc, lang, policy)?);
            }
        }
        queries.push(QueryRecord {
            id,
            audio: None,
            transcript_oracle: query.trim().to_string(),
            gold_answers,
            gold_facts: positive.iter().map(|s| s.trim().to_string()).collect(),
            lang,
        });
    }
    Ok(Dataset { name: format!("rgb-{lang}"), lang, chunks: corpus.chunks, queries })
}

/// One row of `manifest.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub query_id: String,
    pub wav: String,
    pub sample_rate: u32,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeechEntry {
    pub wav_path: PathBuf,
    pub sample_rate: u32,
    pub duration: f64,
}

/// Query id → synthesized audio file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpeechManifest {
    pub entries: HashMap<String, SpeechEntry>,
}

impl SpeechManifest {
    /// Builds a manifest, resolving relative wav paths against `base`.
    pub fn from_rows(rows: Vec<ManifestRow>, base: Option<&Path>) -> Result<Self> {
        let mut entries = HashMap::with_capacity(rows.len());
        for row in rows {
            if row.sample_rate == 0 {
                return Err(Error::MalformedRecord {
                    record: entries.len(),
                    reason: format!("query {:?}: sample_rate must be positive", row.query_id),
                });
            }
            let mut wav_path = PathBuf::from(&row.wav);
            if let (Some(base), true) = (base, wav_path.is_relative()) {
                wav_path = base.join(wav_path);
            }
            let entry = SpeechEntry { wav_path, sample_rate: row.sample_rate, duration: row.duration_s };
            if entries.insert(row.query_id.clone(), entry).is_some() {
                return Err(Error::DuplicateBinding(row.query_id));
            }
        }
        Ok(SpeechManifest { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let rows = read_jsonl::<ManifestRow>(path)?;
        Self::from_rows(rows, path.parent())
    }
}

/// Attaches audio paths to queries that have a manifest entry.
pub fn bind_manifest(queries: Vec<QueryRecord>, manifest: &SpeechManifest) -> Vec<QueryRecord> {
    queries
        .into_iter()
        .map(|mut q| {
            if let Some(e) = manifest.entries.get(&q.id) {
                q.audio = Some(e.wav_path.clone());
            }
            q
        })
        .collect()
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (record, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord { record, reason: e.to_string() })?,
        );
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `chunks.jsonl`, requiring each chunk's id to equal its line number.
pub fn read_chunks(path: &Path) -> Result<Vec<Chunk>> {
    let chunks: Vec<Chunk> = read_jsonl(path)?;
    for (i, c) in chunks.iter().enumerate() {
        if c.id != i as u64 {
            return Err(Error::MalformedRecord { record: i, reason: format!("chunk id {} on line {i}", c.id) });
        }
        if c.text.trim().is_empty() {
            return Err(Error::MalformedRecord { record: i, reason: "empty chunk text".into() });
        }
    }
    Ok(chunks)
}

pub fn write_chunks(path: &Path, chunks: &[Chunk]) -> Result<()> {
    write_jsonl(path, chunks)
}
