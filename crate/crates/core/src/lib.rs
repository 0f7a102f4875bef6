//! Cross-modal retrieval-augmented generation for spoken questions.
//!
//! Text chunks are embedded into a shared speech/text vector space and
//! retrieved either directly from the speech query (end-to-end) or from an
//! ASR transcript (cascade). The crate covers dataset ingestion, encoder
//! backends, a flat exact index, the benchmark pipeline and its metrics.

pub mod encoder;
pub mod error;
pub mod index;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod report;
#[cfg(feature = "remote")]
pub mod service;
pub mod synth;
pub mod types;
pub mod wire;

pub use error::{Error, Result};
pub use types::*;
