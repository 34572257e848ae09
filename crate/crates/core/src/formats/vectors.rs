//! `LFVE` embedding files.
//!
//! ```text
//! magic "LFVE" | version u32 | dim u32 | count u32
//! count × ( id_len u16 | id utf-8 | rows u32 | rows·dim f32 )
//! ```

use std::collections::{HashMap, HashSet};
use std::path::Path;

use super::binary::{put_f32s, put_string, Reader};
use super::{read_file, write_file, FormatError};
use crate::index::MultiVector;

pub const MAGIC: &str = "LFVE";
pub const VERSION: u32 = 1;

/// Entries keep file order.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFile {
    pub dim: usize,
    pub entries: Vec<(String, MultiVector)>,
}

impl VectorFile {
    pub fn new(dim: usize) -> Self {
        VectorFile { dim, entries: Vec::new() }
    }

    pub fn get(&self, id: &str) -> Option<&MultiVector> {
        self.entries.iter().find(|(k, _)| k == id).map(|(_, v)| v)
    }

    pub fn into_map(self) -> HashMap<String, MultiVector> {
        self.entries.into_iter().collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, FormatError> {
        if self.dim == 0 {
            return Err(FormatError::ZeroDimension);
        }
        let dim = u32::try_from(self.dim).map_err(|_| FormatError::TooManyEntries)?;
        let count = u32::try_from(self.entries.len()).map_err(|_| FormatError::TooManyEntries)?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC.as_bytes());
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&dim.to_le_bytes());
        out.extend_from_slice(&count.to_le_bytes());
        let mut seen = HashSet::with_capacity(self.entries.len());
        for (id, mv) in &self.entries {
            if !seen.insert(id.as_str()) {
                return Err(FormatError::DuplicateId(id.clone()));
            }
            if mv.dim() != self.dim {
                return Err(FormatError::MixedDimensions { id: id.clone(), expected: self.dim, got: mv.dim() });
            }
            put_string(&mut out, id)?;
            let rows = u32::try_from(mv.len()).map_err(|_| FormatError::TooManyEntries)?;
            out.extend_from_slice(&rows.to_le_bytes());
            put_f32s(&mut out, mv.as_slice());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
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
        let count = r.u32("entry count")? as usize;
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for _ in 0..count {
            let id = r.string("entry id")?;
            let rows = r.u32("row count")? as usize;
            let data = r.f32s(rows, dim, "vectors")?;
            if !seen.insert(id.clone()) {
                return Err(FormatError::DuplicateId(id));
            }
            if rows == 0 {
                return Err(FormatError::EmptyEntry(id));
            }
            let mv = MultiVector::new(dim, data).map_err(|_| FormatError::NonFinite(id.clone()))?;
            entries.push((id, mv));
        }
        r.finish()?;
        Ok(VectorFile { dim, entries })
    }
}

pub fn read_vector_file(path: &Path) -> Result<VectorFile, FormatError> {
    VectorFile::from_bytes(&read_file(path)?)
}

pub fn write_vector_file(file: &VectorFile, path: &Path) -> Result<(), FormatError> {
    let bytes = file.to_bytes()?;
    write_file(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VectorFile {
        VectorFile {
            dim: 2,
            entries: vec![
                ("a".into(), MultiVector::new(2, vec![1.0, -0.0, 3.5, f32::MIN_POSITIVE]).unwrap()),
                ("b".into(), MultiVector::new(2, vec![0.1, 0.2]).unwrap()),
            ],
        }
    }

    #[test]
    fn header_layout() {
        let bytes = VectorFile::new(3).to_bytes().unwrap();
        assert_eq!(bytes, [b'L', b'F', b'V', b'E', 1, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(VectorFile::from_bytes(&bytes).unwrap(), VectorFile::new(3));
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let f = sample();
        let bytes = f.to_bytes().unwrap();
        let back = VectorFile::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.get("a").unwrap().as_slice()[1].to_bits(), (-0.0f32).to_bits());
    }

    #[test]
    fn named_errors() {
        assert!(matches!(VectorFile::from_bytes(b""), Err(FormatError::BadMagic { .. })));
        assert!(matches!(VectorFile::from_bytes(b"LFIX\x01\0\0\0"), Err(FormatError::BadMagic { .. })));
        let mut bytes = sample().to_bytes().unwrap();
        bytes[4] = 2;
        assert!(matches!(VectorFile::from_bytes(&bytes), Err(FormatError::UnsupportedVersion(2))));

        // declare three entries, provide two
        let mut bytes = sample().to_bytes().unwrap();
        bytes[12] = 3;
        assert!(matches!(VectorFile::from_bytes(&bytes), Err(FormatError::Truncated(_))));

        let mut bytes = sample().to_bytes().unwrap();
        bytes.push(0);
        assert!(matches!(VectorFile::from_bytes(&bytes), Err(FormatError::TrailingBytes(1))));

        let mut dup = sample();
        dup.entries[1].0 = "a".into();
        assert!(matches!(dup.to_bytes(), Err(FormatError::DuplicateId(_))));
        let mut mixed = sample();
        mixed.entries[1].1 = MultiVector::new(3, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(mixed.to_bytes(), Err(FormatError::MixedDimensions { .. })));
    }

    #[test]
    fn duplicate_ids_in_file() {
        let mut f = sample();
        f.entries[1].0 = "c".into();
        let mut bytes = f.to_bytes().unwrap();
        // second id sits after header(16) + id(2+1) + rows(4) + 4 floats(16)
        let pos = 16 + 3 + 4 + 16 + 2;
        assert_eq!(bytes[pos], b'c');
        bytes[pos] = b'a';
        assert!(matches!(VectorFile::from_bytes(&bytes), Err(FormatError::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn huge_declared_rows_do_not_allocate() {
        let mut bytes = VectorFile::new(4).to_bytes().unwrap();
        bytes[12] = 1;
        bytes.extend_from_slice(&[1, 0, b'x']);
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(VectorFile::from_bytes(&bytes), Err(FormatError::Truncated(_))));
    }
}
