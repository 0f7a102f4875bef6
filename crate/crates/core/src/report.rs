//! Results tables in the layout of the benchmark comparison: one row per
//! (method, embedding), three metric columns per dataset.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::types::EvalReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "md" | "markdown" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            other => Err(Error::FatalConfig(format!("unknown table format {other:?}"))),
        }
    }
}

/// Row order and display names of the system configurations.
const METHODS: [(&str, &str); 5] = [
    ("no_rag", "w/o RAG"),
    ("asr_rag", "ASR RAG"),
    ("e2e_rag", "E2E RAG"),
    ("oracle_rag", "Oracle RAG"),
    ("facts", "Facts"),
];

pub fn method_name(mode: &str) -> &str {
    METHODS.iter().find(|(m, _)| *m == mode).map(|(_, n)| *n).unwrap_or(mode)
}

fn method_rank(mode: &str) -> usize {
    METHODS.iter().position(|(m, _)| *m == mode).unwrap_or(METHODS.len())
}

fn fmt_time(t: Option<f64>) -> String {
    t.map(|t| format!("{t:.2} s")).unwrap_or_else(|| "-".into())
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map(|r| format!("{r:.2}")).unwrap_or_else(|| "-".into())
}

/// Header row and body rows, before formatting.
pub fn table_cells(reports: &[EvalReport]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut datasets: Vec<&str> = Vec::new();
    let mut rows: Vec<(&str, &str)> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), &EvalReport> = BTreeMap::new();
    for r in reports {
        let d = datasets.iter().position(|x| *x == r.dataset).unwrap_or_else(|| {
            datasets.push(&r.dataset);
            datasets.len() - 1
        });
        let key = (r.mode.as_str(), r.embedding.as_str());
        let row = rows.iter().position(|x| *x == key).unwrap_or_else(|| {
            rows.push(key);
            rows.len() - 1
        });
        cells.insert((row, d), r);
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| (method_rank(rows[i].0), i));

    let metric_names = ["retrieval.t", "retrieval.f1", "answer.acc"];
    let mut header = vec!["Method".to_string(), "Embedding".to_string()];
    for d in &datasets {
        for m in metric_names {
            header.push(if datasets.len() > 1 { format!("{d} {m}") } else { m.to_string() });
        }
    }

    let body = order
        .into_iter()
        .map(|i| {
            let (mode, emb) = rows[i];
            let mut row = vec![method_name(mode).to_string(), if emb.is_empty() { "-".into() } else { emb.to_string() }];
            for d in 0..datasets.len() {
                match cells.get(&(i, d)) {
                    Some(r) => {
                        row.push(fmt_time(r.retrieval_t_mean));
                        row.push(fmt_rate(r.retrieval_f1_mean));
                        row.push(fmt_rate(r.answer_acc));
                    }
                    None => row.extend(std::iter::repeat_n("-".to_string(), 3)),
                }
            }
            row
        })
        .collect();
    (header, body)
}

pub fn render_table(reports: &[EvalReport], format: TableFormat) -> Result<String> {
    let (header, body) = table_cells(reports);
    match format {
        TableFormat::Markdown => {
            let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
            let mut out = line(&header);
            out.push_str(&line(&vec!["---".to_string(); header.len()]));
            for row in &body {
                out.push_str(&line(row));
            }
            Ok(out)
        }
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header).map_err(|e| Error::Io(e.into()))?;
            for row in &body {
                w.write_record(row).map_err(|e| Error::Io(e.into()))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}
