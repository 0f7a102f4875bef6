//! Brute-force reference implementations shared by the oracle and
//! acceptance tests.

use cmrag_core::index::VectorIndex;

pub fn brute_force(ix: &VectorIndex, q: &[f32], k: usize) -> Vec<(u64, f32)> {
    let qn = q.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
    let mut all: Vec<(u64, f32)> = (0..ix.count() as usize)
        .map(|i| {
            let dot: f64 = ix.row(i).iter().zip(q).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
            (i as u64, (dot / qn) as f32)
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// Multiset F1 by explicit counting over the union of distinct tokens.
pub fn oracle_f1(p: &[String], g: &[String]) -> f64 {
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    if p.is_empty() || g.is_empty() {
        return 0.0;
    }
    let mut distinct: Vec<&String> = p.iter().chain(g).collect();
    distinct.sort();
    distinct.dedup();
    let common: usize = distinct
        .iter()
        .map(|t| p.iter().filter(|x| x == t).count().min(g.iter().filter(|x| x == t).count()))
        .sum();
    if common == 0 {
        return 0.0;
    }
    let prec = common as f64 / p.len() as f64;
    let rec = common as f64 / g.len() as f64;
    2.0 * prec * rec / (prec + rec)
}

/// Full-matrix edit distance.
pub fn oracle_edit<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

pub fn oracle_words(s: &str) -> Vec<String> {
    s.to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .split_whitespace()
        .map(String::from)
        .collect()
}

pub fn oracle_chars(s: &str) -> Vec<char> {
    s.to_lowercase().chars().filter(|c| c.is_alphanumeric()).collect()
}
