//! Readers and writers for every on-disk artifact.
//!
//! Binary formats are little-endian with a 4-byte magic and a `u32` version;
//! unknown versions are rejected. JSON formats are written pretty-printed
//! with a stable key order. See `docs/formats.md` for the byte layouts.

mod binary;
pub mod layout_json;
pub mod lfix;
pub mod manifest;
pub mod results;
pub mod vectors;

use std::path::Path;

use thiserror::Error;

use crate::index::IndexError;
use crate::layout::LayoutError;

pub use layout_json::{BlockRecord, BlocksPage, PageLayout};
pub use lfix::{read_index, read_index_bytes, write_index, write_index_bytes};
pub use manifest::{load_manifest, BenchmarkManifest, ManifestFile, ManifestStats, PageSource};
pub use results::{AnswerRecord, QueryRanking, RankLevel, RankingFile, ReportDocument};
pub use vectors::{read_vector_file, write_vector_file, VectorFile};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: &'static str, found: Vec<u8> },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated payload while reading {0}")]
    Truncated(&'static str),
    #[error("{0} trailing bytes after the last entry")]
    TrailingBytes(usize),
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("entry {id:?} has dimension {got}, expected {expected}")]
    MixedDimensions { id: String, expected: usize, got: usize },
    #[error("entry {0:?} has no vectors")]
    EmptyEntry(String),
    #[error("entry {0:?} contains a non-finite value")]
    NonFinite(String),
    #[error("string field is not valid UTF-8")]
    InvalidUtf8,
    #[error("id {0:?} is longer than 65535 bytes")]
    IdTooLong(String),
    #[error("too many entries for the format")]
    TooManyEntries,
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("page {page_id}: {source}")]
    Page { page_id: String, source: LayoutError },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("duplicate page {0:?}")]
    DuplicatePage(String),
    #[error("duplicate query {0:?}")]
    DuplicateQuery(String),
    #[error("query {0:?} has no gold blocks")]
    EmptyGold(String),
    #[error("query {query_id:?} references unknown page {page_id:?}")]
    DanglingPage { query_id: String, page_id: String },
    #[error("query {query_id:?} references block {block_id:?}, which is not a block of page {page_id:?}")]
    DanglingGoldBlock { query_id: String, block_id: String, page_id: String },
    #[error("token cost given for unknown page {0:?}")]
    DanglingCostPage(String),
    #[error("page size must be positive (page {0:?})")]
    BadPageSize(String),
}

impl FormatError {
    /// True for failures of the filesystem rather than of the content.
    pub fn is_io(&self) -> bool {
        matches!(self, FormatError::Io { .. })
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|source| FormatError::Io { path: path.display().to_string(), source })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path, bytes).map_err(|source| FormatError::Io { path: path.display().to_string(), source })
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, FormatError> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    Ok(serde_json::from_slice(&read_file(path)?)?)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    write_file(path, &to_json_bytes(value)?)
}
