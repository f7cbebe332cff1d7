//! Persistent feature index.
//!
//! Little-endian layout:
//!
//! ```text
//! "DBCR" | u16 version (=1) | [u8; 32] fingerprint | u32 dim | u32 count
//! count × ( u32 id | u16 len + UTF-8 path | u16 len + UTF-8 label | dim × f32 )
//! ```

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{CompareError, IndexError};
use crate::pipeline::{FeatureVector, Fingerprint};

pub const MAGIC: [u8; 4] = *b"DBCR";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub id: u32,
    pub path: String,
    pub label: String,
    pub vector: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureIndex {
    fingerprint: Fingerprint,
    dim: usize,
    entries: Vec<IndexEntry>,
    ids: HashSet<u32>,
}

impl FeatureIndex {
    pub fn new(fingerprint: Fingerprint, dim: usize) -> Self {
        FeatureIndex {
            fingerprint,
            dim,
            entries: Vec::new(),
            ids: HashSet::new(),
        }
    }

    /// Appends an entry after checking its id and vector against the header.
    pub fn push(&mut self, entry: IndexEntry) -> Result<(), IndexError> {
        if entry.vector.fingerprint != self.fingerprint {
            return Err(CompareError::Fingerprint {
                expected: self.fingerprint,
                found: entry.vector.fingerprint,
            }
            .into());
        }
        if entry.vector.dim() != self.dim {
            return Err(CompareError::Dim(self.dim, entry.vector.dim()).into());
        }
        if u16::try_from(entry.path.len()).is_err() || u16::try_from(entry.label.len()).is_err() {
            return Err(IndexError::Entry {
                id: entry.id,
                reason: "path or label longer than 65535 bytes".into(),
            });
        }
        if !self.ids.insert(entry.id) {
            return Err(IndexError::DuplicateId(entry.id));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Entry count per label.
    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for e in &self.entries {
            *counts.entry(e.label.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(46 + self.entries.len() * (self.dim * 4 + 64));
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.fingerprint.0);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&e.id.to_le_bytes());
            for s in [&e.path, &e.label] {
                out.extend_from_slice(&(s.len() as u16).to_le_bytes());
                out.extend_from_slice(s.as_bytes());
            }
            for v in &e.vector.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<FeatureIndex, IndexError> {
        let mut rd = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = rd.array("magic")?;
        if magic != MAGIC {
            return Err(IndexError::Magic(magic));
        }
        let version = u16::from_le_bytes(rd.array("version")?);
        if version != FORMAT_VERSION {
            return Err(IndexError::Version(version));
        }
        let fingerprint = Fingerprint(rd.array("fingerprint")?);
        let dim = u32::from_le_bytes(rd.array("dim")?) as usize;
        let count = u32::from_le_bytes(rd.array("entry count")?) as usize;

        let mut entries = Vec::with_capacity(count.min(1 << 16));
        let mut ids = HashSet::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let id = u32::from_le_bytes(rd.array("entry id")?);
            if !ids.insert(id) {
                return Err(IndexError::DuplicateId(id));
            }
            let path = rd.string(id, "path")?;
            let label = rd.string(id, "label")?;
            let raw = rd.take(dim * 4, "vector")?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            entries.push(IndexEntry {
                id,
                path,
                label,
                vector: FeatureVector::new(values, fingerprint),
            });
        }
        if rd.pos != bytes.len() {
            return Err(IndexError::TrailingData(bytes.len() - rd.pos));
        }
        Ok(FeatureIndex {
            fingerprint,
            dim,
            entries,
            ids,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<FeatureIndex, IndexError> {
        FeatureIndex::from_bytes(&fs::read(path)?)
    }

    /// Loads and rejects an index built under a different configuration.
    pub fn load_expecting(
        path: impl AsRef<Path>,
        expected: Fingerprint,
    ) -> Result<FeatureIndex, IndexError> {
        let index = FeatureIndex::load(path)?;
        if index.fingerprint != expected {
            return Err(IndexError::Fingerprint {
                expected,
                found: index.fingerprint,
            });
        }
        Ok(index)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], IndexError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or(IndexError::Truncated {
                offset: self.pos,
                what,
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], IndexError> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }

    fn string(&mut self, id: u32, what: &'static str) -> Result<String, IndexError> {
        let len = u16::from_le_bytes(self.array(what)?) as usize;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| IndexError::Entry {
            id,
            reason: format!("{what} is not valid UTF-8"),
        })
    }
}
