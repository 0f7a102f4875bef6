use std::io::Write;
use std::path::{Path, PathBuf};

use cmrag_core::encoder::{AsrHandle, EncoderHandle};
use cmrag_core::index::{build_index, load_index, save_index, RetrievalConfig, Similarity, VectorIndex};
use cmrag_core::ingest::{
    bind_manifest, load_hotpotqa, load_rgb, read_chunks, read_jsonl, write_chunks, write_jsonl, ChunkingPolicy,
    Dataset, SpeechManifest,
};
use cmrag_core::pipeline::generate::Generator;
use cmrag_core::pipeline::sweep::{sweep_alignment, SweepRow};
use cmrag_core::pipeline::{run_benchmark, run_retrieval, Mode, PipelineConfig};
use cmrag_core::report::{render_table, TableFormat};
use cmrag_core::synth::synthetic_dataset;
use cmrag_core::types::{EvalReport, Lang, QueryRecord};
use cmrag_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{resolve_spec, Effective, FileConfig, Service};
use crate::{exit_code, BenchArgs, DataArgs, IndexArgs, ReportArgs, RetrieveArgs, SweepArgs, EXIT_IO};

pub struct Failure {
    pub error: Error,
    pub code: u8,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = exit_code(&error);
        Failure { error, code }
    }
}

type CmdResult = std::result::Result<(), Failure>;

const INDEX_FILE: &str = "index.bin";
const CHUNKS_FILE: &str = "chunks.jsonl";
const QUERIES_FILE: &str = "queries.jsonl";
const DATASET_FILE: &str = "dataset.json";
const DEFAULT_MAX_CHARS: usize = 512;
const DEFAULT_SWEEP_ENCODER: &str = "mock:dim=256,seed=7";

/// Name and language of the dataset an index directory was built from.
#[derive(Debug, Serialize, Deserialize)]
struct DatasetInfo {
    name: String,
    lang: Lang,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::FatalConfig(msg.into())
}

/// Accepts an index directory or the path of its `index.bin`.
fn index_paths(p: &Path) -> (PathBuf, PathBuf) {
    if p.extension().is_some_and(|e| e == "bin") {
        (p.parent().unwrap_or(Path::new(".")).to_path_buf(), p.to_path_buf())
    } else {
        (p.to_path_buf(), p.join(INDEX_FILE))
    }
}

fn dataset_kind(data: &DataArgs, file: &FileConfig) -> Option<String> {
    data.dataset.clone().or_else(|| file.data.dataset.clone())
}

fn load_dataset(data: &DataArgs, file: &FileConfig) -> Result<Dataset> {
    let kind = dataset_kind(data, file).ok_or_else(|| config_err("--dataset is required"))?;
    let max_chars = data.max_chars.or(file.data.max_chars).unwrap_or(DEFAULT_MAX_CHARS);
    let policy = ChunkingPolicy::sentence(max_chars);
    let input = || {
        data.input
            .clone()
            .or_else(|| file.data.input.clone())
            .ok_or_else(|| config_err(format!("--in is required for {kind}")))
    };
    match kind.as_str() {
        "hotpotqa" => load_hotpotqa(&input()?, &policy),
        "rgb" => {
            let lang = data.lang.clone().or_else(|| file.data.lang.clone()).unwrap_or_else(|| "zh".into());
            load_rgb(&input()?, &lang, &policy)
        }
        "synthetic" => {
            let seed = data.seed.or(file.seed).unwrap_or(1);
            synthetic_dataset(data.synthetic_chunks, data.synthetic_queries, seed)
        }
        other => Err(config_err(format!("unknown dataset {other:?} (expected hotpotqa, rgb or synthetic)"))),
    }
}

fn load_dataset_from_index(dir: &Path) -> Result<Dataset> {
    let info: DatasetInfo = serde_json::from_slice(&std::fs::read(dir.join(DATASET_FILE))?)?;
    Ok(Dataset {
        name: info.name,
        lang: info.lang,
        chunks: read_chunks(&dir.join(CHUNKS_FILE))?,
        queries: read_jsonl(&dir.join(QUERIES_FILE))?,
    })
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => stdout(text)?,
    }
    Ok(())
}

/// Writes to stdout; a reader that went away (`| head`) is not an error.
fn stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn index(a: &IndexArgs, file: &FileConfig) -> CmdResult {
    let spec = resolve_spec(
        a.encoder.as_deref(),
        file.backends.text_encoder.as_deref(),
        a.endpoints.encoder_url.as_deref(),
        Service::Encoder,
        file,
    )?
    .ok_or_else(|| config_err("--encoder is required"))?;
    let dataset = load_dataset(&a.data, file)?;
    let enc = EncoderHandle::parse(&spec)?;
    let ix = build_index(&dataset.chunks, &enc)?.with_chunk_store(CHUNKS_FILE);

    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    write_chunks(&a.out.join(CHUNKS_FILE), &dataset.chunks)?;
    write_jsonl(&a.out.join(QUERIES_FILE), &dataset.queries)?;
    let info = DatasetInfo { name: dataset.name.clone(), lang: dataset.lang };
    std::fs::write(a.out.join(DATASET_FILE), serde_json::to_vec_pretty(&info).map_err(Error::from)?)
        .map_err(Error::from)?;
    save_index(&ix, &a.out.join(INDEX_FILE))?;
    stdout(&format!(
        "indexed {} chunks (dim {}, {} queries) into {}\n",
        ix.count(),
        ix.dim(),
        dataset.queries.len(),
        a.out.display()
    ))?;
    Ok(())
}

fn encoder(spec: Option<String>) -> Result<Option<EncoderHandle>> {
    spec.as_deref().map(EncoderHandle::parse).transpose()
}

pub fn retrieve(a: &RetrieveArgs, file: &FileConfig) -> CmdResult {
    let mode = match a.mode.as_str() {
        "e2e" => Mode::E2eRag,
        "cascade" => Mode::AsrRag,
        "oracle" => Mode::OracleRag,
        other => return Err(config_err(format!("unknown retrieval mode {other:?} (e2e, cascade, oracle)")).into()),
    };
    let index_path =
        a.index.clone().or_else(|| file.data.index.clone()).ok_or_else(|| config_err("--index is required"))?;
    if a.query.is_none() && a.audio.is_none() {
        return Err(config_err("give --query, --audio or both").into());
    }
    let lang: Lang = a.lang.parse()?;
    let enc_url = a.endpoints.encoder_url.as_deref();
    let mut cfg = PipelineConfig::new(mode);
    cfg.retrieval.k = a.k.or(file.k).unwrap_or(cfg.retrieval.k);
    if mode == Mode::E2eRag {
        let spec = resolve_spec(
            a.speech_encoder.as_deref(),
            file.backends.speech_encoder.as_deref(),
            enc_url,
            Service::Encoder,
            file,
        )?;
        cfg.speech_encoder = encoder(spec)?;
    } else {
        let spec = resolve_spec(
            a.text_encoder.as_deref(),
            file.backends.text_encoder.as_deref(),
            enc_url,
            Service::Encoder,
            file,
        )?;
        cfg.text_encoder = encoder(spec)?;
    }
    if mode == Mode::AsrRag {
        let spec = resolve_spec(
            a.asr.as_deref(),
            file.backends.asr.as_deref(),
            a.endpoints.asr_url.as_deref(),
            Service::Asr,
            file,
        )?;
        cfg.asr = spec.as_deref().map(AsrHandle::parse).transpose()?;
    }
    cfg.validate()?;

    let (_, bin) = index_paths(&index_path);
    let ix = load_index(&bin)?;
    let chunks = read_chunks(ix.chunk_store().expect("loaded index records its chunk file"))?;
    let q = QueryRecord {
        id: a.id.clone(),
        audio: a.audio.clone(),
        transcript_oracle: a.query.clone().unwrap_or_default(),
        gold_answers: Vec::new(),
        gold_facts: Vec::new(),
        lang,
    };
    let r = run_retrieval(&cfg, &ix, &q)?;
    let hits: Vec<serde_json::Value> = r
        .hits
        .iter()
        .map(|h| {
            let c = &chunks[h.chunk_id as usize];
            serde_json::json!({"chunk_id": h.chunk_id, "score": h.score, "doc_id": c.doc_id, "text": c.text})
        })
        .collect();
    let out = serde_json::json!({
        "query_id": r.query_id,
        "mode": r.mode,
        "transcript": r.transcript,
        "hits": hits,
        "timings": r.timings.as_map(),
        "retrieval_t": r.timings.total(),
    });
    stdout(&(serde_json::to_string_pretty(&out).map_err(Error::from)? + "\n"))?;
    Ok(())
}

pub fn bench(a: &BenchArgs, file: &FileConfig) -> CmdResult {
    let mode: Mode = a.mode.parse()?;
    let enc_url = a.endpoints.encoder_url.as_deref();
    let text_spec =
        resolve_spec(a.text_encoder.as_deref(), file.backends.text_encoder.as_deref(), enc_url, Service::Encoder, file)?;
    let speech_spec = resolve_spec(
        a.speech_encoder.as_deref(),
        file.backends.speech_encoder.as_deref(),
        enc_url,
        Service::Encoder,
        file,
    )?;
    let asr_spec = resolve_spec(
        a.asr.as_deref(),
        file.backends.asr.as_deref(),
        a.endpoints.asr_url.as_deref(),
        Service::Asr,
        file,
    )?;
    let gen_spec = resolve_spec(
        a.generator.as_deref(),
        file.backends.generator.as_deref(),
        a.endpoints.gen_url.as_deref(),
        Service::Generator,
        file,
    )?
    .or_else(|| Some("mock".into()))
    .filter(|s| s != "none");

    let mut cfg = PipelineConfig::new(mode);
    cfg.retrieval = RetrievalConfig {
        k: a.k.or(file.k).unwrap_or(RetrievalConfig::default().k),
        similarity: a.similarity.as_deref().map(str::parse::<Similarity>).transpose()?.unwrap_or_default(),
    };
    cfg.workers = a.workers.or(file.workers).unwrap_or(1);
    // only the backends the mode uses are connected
    match mode {
        Mode::E2eRag => cfg.speech_encoder = encoder(speech_spec.clone())?,
        Mode::AsrRag => {
            cfg.text_encoder = encoder(text_spec.clone())?;
            cfg.asr = asr_spec.as_deref().map(AsrHandle::parse).transpose()?;
        }
        Mode::OracleRag => cfg.text_encoder = encoder(text_spec.clone())?,
        Mode::NoRag | Mode::Facts => {}
    }
    cfg.generator = gen_spec.as_deref().map(Generator::parse).transpose()?;
    cfg.validate()?;

    let index_arg = a.index.clone().or_else(|| file.data.index.clone());
    let has_data = dataset_kind(&a.data, file).is_some();
    let mut dataset = match (&index_arg, has_data) {
        (_, true) => load_dataset(&a.data, file)?,
        (Some(p), false) => load_dataset_from_index(&index_paths(p).0)?,
        (None, false) => return Err(config_err("give --dataset (with --in) or --index").into()),
    };
    if let Some(n) = a.limit {
        dataset.queries.truncate(n);
    }
    let manifest = a.manifest.clone().or_else(|| file.data.manifest.clone());
    if let Some(m) = &manifest {
        let m = SpeechManifest::load(m)?;
        dataset.queries = bind_manifest(std::mem::take(&mut dataset.queries), &m);
    }
    let ix: Option<VectorIndex> = match &index_arg {
        Some(p) if mode.uses_retrieval() => Some(load_index(&index_paths(p).1)?),
        Some(_) => {
            log::warn!("{mode} does not retrieve; --index only supplies the dataset");
            None
        }
        None if mode.uses_retrieval() => return Err(config_err(format!("{mode} requires --index")).into()),
        None => None,
    };

    let mut report = run_benchmark(&cfg, &dataset, ix.as_ref())?;
    let effective = Effective {
        command: "bench".into(),
        mode: Some(mode.to_string()),
        dataset: Some(dataset.name.clone()),
        input: a.data.input.clone().or_else(|| file.data.input.clone()),
        index: index_arg,
        manifest,
        text_encoder: matches!(mode, Mode::AsrRag | Mode::OracleRag).then_some(text_spec).flatten(),
        speech_encoder: (mode == Mode::E2eRag).then_some(speech_spec).flatten(),
        asr: (mode == Mode::AsrRag).then_some(asr_spec).flatten(),
        generator: gen_spec,
        k: cfg.retrieval.k,
        workers: cfg.workers,
        limit: a.limit,
    };
    report.meta.config = serde_json::to_value(&effective).map_err(Error::from)?;
    let mut json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    json.push('\n');
    write_output(a.out.as_deref(), &json)?;

    let fmt = |x: Option<f64>, unit: &str| x.map(|v| format!("{v:.3}{unit}")).unwrap_or_else(|| "-".into());
    eprintln!(
        "{} on {} ({} queries, {} failed): retrieval.t {} retrieval.f1 {} answer.acc {}",
        report.mode,
        report.dataset,
        report.n_queries,
        report.n_failed,
        fmt(report.retrieval_t_mean, " s"),
        fmt(report.retrieval_f1_mean, ""),
        fmt(report.answer_acc, ""),
    );
    Ok(())
}

fn parse_eps(list: &str) -> Result<Vec<f64>> {
    let eps: Vec<f64> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite() && *x >= 0.0))
        .collect::<Option<_>>()
        .ok_or_else(|| config_err(format!("--eps must list non-negative numbers, got {list:?}")))?;
    if eps.is_empty() {
        return Err(config_err("--eps is empty"));
    }
    Ok(eps)
}

fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn sweep_table(rows: &[SweepRow], k: usize) -> String {
    let mut out = format!("| eps | recall@{k} | retrieval.f1 | top1 |\n| --- | --- | --- | --- |\n");
    for r in rows {
        out.push_str(&format!(
            "| {} | {:.3} | {:.3} | {:.3} |\n",
            r.eps, r.recall_at_k, r.retrieval_f1, r.top1_accuracy
        ));
    }
    out
}

pub fn sweep(a: &SweepArgs, file: &FileConfig) -> CmdResult {
    let spec = a
        .encoder
        .clone()
        .or_else(|| file.backends.text_encoder.clone())
        .unwrap_or_else(|| DEFAULT_SWEEP_ENCODER.into());
    let speech = file.backends.speech_encoder.as_deref().unwrap_or("mock");
    for s in [spec.as_str(), speech] {
        if !s.starts_with("mock") {
            return Err(config_err(format!("sweep-alignment runs on mock encoders only, got {s:?}")).into());
        }
    }
    let eps = parse_eps(&a.eps)?;
    let enc = EncoderHandle::parse(&spec)?;
    let base = enc.as_mock().expect("mock spec").clone();
    let k = a.k.or(file.k).unwrap_or(RetrievalConfig::default().k);
    let dataset = synthetic_dataset(a.chunks, a.queries, a.seed)?;
    let ix = build_index(&dataset.chunks, &EncoderHandle::Mock(base.clone().with_eps(0.0).with_delay(0.0)))?;
    let rows = sweep_alignment(&dataset, &ix, &base, &eps, &RetrievalConfig { k, ..RetrievalConfig::default() })?;

    let csv = sweep_csv(&rows)?;
    let table = sweep_table(&rows, k);
    match &a.out {
        Some(p) => {
            write_output(Some(p), &csv)?;
            stdout(&table)?;
        }
        None => {
            stdout(&csv)?;
            eprint!("{table}");
        }
    }
    Ok(())
}

fn read_report(path: &Path) -> Result<EvalReport> {
    let r: EvalReport = serde_json::from_slice(&std::fs::read(path)?)
        .map_err(|e| Error::MalformedRecord { record: 0, reason: format!("{}: {e}", path.display()) })?;
    r.validate().map_err(|e| Error::MalformedRecord { record: 0, reason: format!("{}: {e}", path.display()) })?;
    Ok(r)
}

pub fn report(a: &ReportArgs) -> CmdResult {
    let format: TableFormat = a.format.parse()?;
    let reports = a
        .reports
        .iter()
        .map(|p| read_report(p))
        .collect::<Result<Vec<_>>>()
        .map_err(|error| Failure { error, code: EXIT_IO })?;
    let table = render_table(&reports, format)?;
    write_output(a.out.as_deref(), &table)?;
    Ok(())
}
