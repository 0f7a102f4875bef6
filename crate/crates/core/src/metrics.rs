//! Scoring: token F1, retrieval F1, covered exact match, WER/CER and latency
//! statistics.
//!
//! F1 and EM use SQuAD-style normalization: lowercase, strip punctuation and
//! (English only) drop the articles `a`, `an`, `the`. Chinese text is scored
//! per character.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Lang;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenUnit {
    Word,
    Char,
}

/// Text normalization applied before F1 / EM. Fully determined by language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationRule {
    pub lang: Lang,
    pub lowercase: bool,
    pub strip_punct: bool,
    pub drop_articles: bool,
    pub token_unit: TokenUnit,
}

impl NormalizationRule {
    pub fn for_lang(lang: Lang) -> Self {
        match lang {
            Lang::En => NormalizationRule {
                lang,
                lowercase: true,
                strip_punct: true,
                drop_articles: true,
                token_unit: TokenUnit::Word,
            },
            Lang::Zh => NormalizationRule {
                lang,
                lowercase: false,
                strip_punct: true,
                drop_articles: false,
                token_unit: TokenUnit::Char,
            },
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "{}: lowercase={} strip_punct={} drop_articles={} unit={:?}",
            self.lang, self.lowercase, self.strip_punct, self.drop_articles, self.token_unit
        )
    }

    /// Normalized tokens of `text`.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        let mut cleaned = String::with_capacity(text.len());
        for c in text.chars() {
            if self.strip_punct && is_punct(c) {
                continue;
            }
            if self.lowercase {
                cleaned.extend(c.to_lowercase());
            } else {
                cleaned.push(c);
            }
        }
        match self.token_unit {
            TokenUnit::Word => cleaned
                .split_whitespace()
                .filter(|w| !(self.drop_articles && matches!(*w, "a" | "an" | "the")))
                .map(str::to_string)
                .collect(),
            TokenUnit::Char => cleaned
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| c.to_string())
                .collect(),
        }
    }

    /// Normalized string form used for substring containment.
    pub fn normalize(&self, text: &str) -> String {
        let toks = self.tokens(text);
        match self.token_unit {
            TokenUnit::Word => toks.join(" "),
            TokenUnit::Char => toks.concat(),
        }
    }
}

/// Anything that is neither alphanumeric nor whitespace. Covers ASCII and
/// CJK punctuation alike.
pub fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Precision / recall / F1 over token multisets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Parts {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn token_prf(pred: &str, gold: &str, rule: &NormalizationRule) -> F1Parts {
    let p = rule.tokens(pred);
    let g = rule.tokens(gold);
    match (p.is_empty(), g.is_empty()) {
        (true, true) => return F1Parts { precision: 1.0, recall: 1.0, f1: 1.0 },
        (true, false) | (false, true) => return F1Parts { precision: 0.0, recall: 0.0, f1: 0.0 },
        _ => {}
    }
    let mut gold_counts: HashMap<&str, usize> = HashMap::new();
    for t in &g {
        *gold_counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &p {
        if let Some(n) = gold_counts.get_mut(t.as_str()) {
            if *n > 0 {
                *n -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return F1Parts { precision: 0.0, recall: 0.0, f1: 0.0 };
    }
    let precision = common as f64 / p.len() as f64;
    let recall = common as f64 / g.len() as f64;
    F1Parts { precision, recall, f1: 2.0 * precision * recall / (precision + recall) }
}

pub fn token_f1(pred: &str, gold: &str, rule: &NormalizationRule) -> f64 {
    token_prf(pred, gold, rule).f1
}

/// Token F1 between the concatenated retrieved chunks and the concatenated
/// gold supporting facts.
pub fn retrieval_f1<S: AsRef<str>, G: AsRef<str>>(
    hits: &[S],
    gold_facts: &[G],
    rule: &NormalizationRule,
) -> f64 {
    let pred = join(hits);
    let gold = join(gold_facts);
    token_f1(&pred, &gold, rule)
}

fn join<S: AsRef<str>>(parts: &[S]) -> String {
    parts.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ")
}

/// True iff some normalized gold answer occurs contiguously inside the
/// normalized prediction.
pub fn covered_em<G: AsRef<str>>(pred: &str, golds: &[G], rule: &NormalizationRule) -> bool {
    let p = rule.normalize(pred);
    if p.is_empty() {
        return false;
    }
    golds.iter().any(|g| {
        let g = rule.normalize(g.as_ref());
        !g.is_empty() && p.contains(&g)
    })
}

/// Lowercased, punctuation-free words used for WER.
fn wer_units(s: &str) -> Vec<String> {
    let cleaned: String = s
        .chars()
        .filter(|&c| !is_punct(c))
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Lowercased characters with whitespace and punctuation removed, used for CER.
fn cer_units(s: &str) -> Vec<char> {
    s.chars()
        .filter(|&c| !c.is_whitespace() && !is_punct(c))
        .flat_map(char::to_lowercase)
        .collect()
}

/// Edit distance with unit insertion, deletion and substitution costs.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

pub fn wer(reference: &str, hypothesis: &str) -> Result<f64> {
    let r = wer_units(reference);
    if r.is_empty() {
        return Err(Error::EmptyReference);
    }
    let h = wer_units(hypothesis);
    Ok(levenshtein(&r, &h) as f64 / r.len() as f64)
}

pub fn cer(reference: &str, hypothesis: &str) -> Result<f64> {
    let r = cer_units(reference);
    if r.is_empty() {
        return Err(Error::EmptyReference);
    }
    let h = cer_units(hypothesis);
    Ok(levenshtein(&r, &h) as f64 / r.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
}

/// Mean and nearest-rank percentiles of latency samples (seconds).
pub fn latency_stats(samples: &[f64]) -> Result<LatencyStats> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(LatencyStats { mean, p50: nearest_rank(&sorted, 50.0), p95: nearest_rank(&sorted, 95.0) })
}

fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let n = sorted.len();
    let rank = ((pct / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}
