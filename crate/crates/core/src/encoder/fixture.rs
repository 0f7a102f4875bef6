//! Precomputed embeddings read from disk.
//!
//! A fixture is a vector file in the `index.bin` layout plus a JSONL id map
//! (`{"key":str,"row":u64}` per line) next to it, named `<stem>.ids.jsonl`.
//! Keys are chunk ids (decimal) or query ids.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{read_vector_file, VectorIndex};
use crate::ingest::read_jsonl;
use crate::types::EmbeddingVector;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMapRow {
    pub key: String,
    pub row: u64,
}

#[derive(Debug, Clone)]
pub struct FixtureEncoder {
    path: PathBuf,
    vectors: VectorIndex,
    rows: HashMap<String, usize>,
}

pub fn id_map_path(vectors: &Path) -> PathBuf {
    vectors.with_extension("ids.jsonl")
}

impl FixtureEncoder {
    pub fn load(path: &Path) -> Result<Self> {
        let vectors = read_vector_file(path)?;
        let map: Vec<IdMapRow> = read_jsonl(&id_map_path(path))?;
        let mut rows = HashMap::with_capacity(map.len());
        for (i, r) in map.into_iter().enumerate() {
            if r.row >= vectors.count() {
                return Err(Error::MalformedRecord {
                    record: i,
                    reason: format!("row {} beyond {} vectors", r.row, vectors.count()),
                });
            }
            if rows.insert(r.key.clone(), r.row as usize).is_some() {
                return Err(Error::MalformedRecord { record: i, reason: format!("duplicate key {:?}", r.key) });
            }
        }
        Ok(FixtureEncoder { path: path.to_path_buf(), vectors, rows })
    }

    /// Loads a fixture and checks it against an expected dimension.
    pub fn load_with_dim(path: &Path, dim: usize) -> Result<Self> {
        let f = Self::load(path)?;
        if f.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: f.dim() });
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn lookup(&self, key: &str) -> Result<EmbeddingVector> {
        let row = *self.rows.get(key).ok_or_else(|| Error::FixtureMiss(key.to_string()))?;
        let v = EmbeddingVector {
            dim: self.dim(),
            values: self.vectors.row(row).to_vec(),
            normalized: self.vectors.normalized(),
        };
        crate::types::validate_embedding(v)
    }
}

/// Writes a fixture: vectors in `path`, id map beside it.
pub fn write_fixture(path: &Path, keys: &[String], vectors: &VectorIndex) -> Result<()> {
    if keys.len() as u64 != vectors.count() {
        return Err(Error::CountMismatch { index: vectors.count(), chunks: keys.len() as u64 });
    }
    crate::index::write_vector_file(path, vectors)?;
    let rows: Vec<IdMapRow> =
        keys.iter().enumerate().map(|(i, k)| IdMapRow { key: k.clone(), row: i as u64 }).collect();
    crate::ingest::write_jsonl(&id_map_path(path), &rows)
}
