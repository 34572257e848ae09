//! `LFIX` sealed index files.
//!
//! ```text
//! magic "LFIX" | version u32 | dim u32 | count u64
//! count × ( block_id str | page_id str | doc_id str | tag str
//!           | rows u32 | rows·dim f32 | token_cost u32 )
//! str = len u16 | utf-8 bytes
//! ```
//!
//! The auxiliary masked-page block is stored with tag `masked_page`.

use std::path::Path;

use super::binary::{put_f32s, put_string, Reader};
use super::{read_file, write_file, FormatError};
use crate::index::{BlockIndex, IndexBuilder, IndexEntry, MultiVector};
use crate::layout::LayoutTag;

pub const MAGIC: &str = "LFIX";
pub const VERSION: u32 = 1;
pub const MASK_TAG: &str = "masked_page";

pub fn write_index_bytes(index: &BlockIndex) -> Result<Vec<u8>, FormatError> {
    if index.dim() == 0 {
        return Err(FormatError::ZeroDimension);
    }
    let dim = u32::try_from(index.dim()).map_err(|_| FormatError::TooManyEntries)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC.as_bytes());
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(index.len() as u64).to_le_bytes());
    for e in index.entries() {
        put_string(&mut out, &e.block_id)?;
        put_string(&mut out, &e.page_id)?;
        put_string(&mut out, &e.doc_id)?;
        put_string(&mut out, if e.is_mask { MASK_TAG } else { e.tag.as_str() })?;
        let rows = u32::try_from(e.vectors.len()).map_err(|_| FormatError::TooManyEntries)?;
        out.extend_from_slice(&rows.to_le_bytes());
        put_f32s(&mut out, e.vectors.as_slice());
        out.extend_from_slice(&e.token_cost.to_le_bytes());
    }
    Ok(out)
}

pub fn read_index_bytes(bytes: &[u8]) -> Result<BlockIndex, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let dim = r.u32("dimension")? as usize;
    if dim == 0 {
        return Err(FormatError::ZeroDimension);
    }
    let count = r.u64("entry count")?;
    let mut builder = IndexBuilder::new(dim);
    for _ in 0..count {
        let block_id = r.string("block id")?;
        let page_id = r.string("page id")?;
        let doc_id = r.string("doc id")?;
        let tag_str = r.string("tag")?;
        let rows = r.u32("row count")? as usize;
        let data = r.f32s(rows, dim, "vectors")?;
        let token_cost = r.u32("token cost")?;
        let (tag, is_mask) = if tag_str == MASK_TAG { (LayoutTag::Abandon, true) } else { (tag_str.parse()?, false) };
        if rows == 0 {
            return Err(FormatError::EmptyEntry(block_id));
        }
        let vectors = MultiVector::new(dim, data).map_err(|_| FormatError::NonFinite(block_id.clone()))?;
        builder
            .add_block(IndexEntry { block_id, page_id, doc_id, tag, is_mask, vectors, token_cost })
            .map_err(|e| match e {
                crate::index::IndexError::DuplicateBlock(id) => FormatError::DuplicateId(id),
                other => FormatError::Index(other),
            })?;
    }
    r.finish()?;
    Ok(builder.seal())
}

pub fn read_index(path: &Path) -> Result<BlockIndex, FormatError> {
    read_index_bytes(&read_file(path)?)
}

pub fn write_index(index: &BlockIndex, path: &Path) -> Result<(), FormatError> {
    let bytes = write_index_bytes(index)?;
    write_file(path, &bytes)
}
