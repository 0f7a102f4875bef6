use std::path::PathBuf;

/// Errors raised anywhere in the retrieval / evaluation stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite component at position {index}")]
    NonFiniteComponent { index: usize },
    #[error("vector flagged as normalized has L2 norm {norm}")]
    NormViolation { norm: f64 },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("perturbation produced a zero-norm vector")]
    ZeroNormAfterPerturbation,

    #[error("unsupported language tag {0:?} (expected \"en\" or \"zh\")")]
    UnsupportedLanguage(String),
    #[error("empty text")]
    EmptyText,
    #[error("text contains no tokens")]
    AllTokensEmpty,
    #[error("malformed record {record}: {reason}")]
    MalformedRecord { record: usize, reason: String },
    #[error("record {record} has no documents")]
    EmptyDocumentSet { record: usize },
    #[error("query {0:?} bound twice in speech manifest")]
    DuplicateBinding(String),
    #[error("invalid chunking policy: {0}")]
    InvalidPolicy(String),

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("fixture has no entry for key {0:?}")]
    FixtureMiss(String),
    #[error("audio unreadable: {path}: {reason}")]
    AudioUnreadable { path: PathBuf, reason: String },
    #[error("mock speech encoder needs a transcript for query {0:?}")]
    MissingTranscriptForMock(String),
    #[error("query {0:?} has no audio")]
    MissingAudio(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("encoding chunk {chunk_id} failed: {source}")]
    EncoderFailure {
        chunk_id: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid backend spec {spec:?}: {reason}")]
    BadSpec { spec: String, reason: String },

    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty index")]
    EmptyIndex,
    #[error("empty context for a retrieval-augmented prompt")]
    EmptyContext,
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported index version {0}")]
    VersionUnsupported(u32),
    #[error("index holds {index} vectors but chunk file has {chunks} lines")]
    CountMismatch { index: u64, chunks: u64 },
    #[error("truncated index file: {0}")]
    Truncated(String),

    #[error("empty reference")]
    EmptyReference,
    #[error("no latency samples")]
    EmptySamples,

    #[error("configuration error: {0}")]
    FatalConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of an external service (encoder, ASR, generator).
    pub fn is_backend(&self) -> bool {
        match self {
            Error::BackendUnavailable(_) | Error::MalformedResponse(_) => true,
            Error::EncoderFailure { source, .. } => source.is_backend(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
