//! Sentence embedding cache, in memory and on disk.
//!
//! File layout, little-endian:
//!
//! ```text
//! magic "STSEMBED" | version u32 | dims u32 | identity hash u64
//! then per record: key u64 | dims x f32
//! ```
//!
//! Records are written in key order so equal caches are equal files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use super::{EmbedError, EmbeddingBackend};
use crate::digest::hash64;

const MAGIC: &[u8; 8] = b"STSEMBED";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 8;

/// Many concurrent readers, one writer at a time.
#[derive(Debug)]
pub struct EmbeddingCache {
    identity_hash: u64,
    dims: usize,
    entries: RwLock<BTreeMap<u64, Vec<f32>>>,
}

impl EmbeddingCache {
    pub fn new(backend: &dyn EmbeddingBackend) -> Self {
        Self::for_identity(&backend.identity(), backend.dims())
    }

    pub fn for_identity(identity: &str, dims: usize) -> Self {
        Self { identity_hash: hash64(&[identity.as_bytes()]), dims, entries: RwLock::new(BTreeMap::new()) }
    }

    pub fn key(identity: &str, content_hash: &str, text: &str) -> u64 {
        hash64(&[identity.as_bytes(), content_hash.as_bytes(), text.as_bytes()])
    }

    /// File name used for this cache inside a cache directory.
    pub fn file_name(&self) -> String {
        format!("{:016x}.stscache", self.identity_hash)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: u64) -> Option<Vec<f32>> {
        self.entries.read().expect("cache lock poisoned").get(&key).cloned()
    }

    pub fn insert_many(&self, items: Vec<(u64, Vec<f32>)>) -> Result<(), EmbedError> {
        if let Some((_, v)) = items.iter().find(|(_, v)| v.len() != self.dims) {
            return Err(EmbedError::DimensionMismatch { expected: self.dims, found: v.len() });
        }
        let mut map = self.entries.write().expect("cache lock poisoned");
        map.extend(items);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let map = self.entries.read().expect("cache lock poisoned");
        let mut out = Vec::with_capacity(HEADER_LEN + map.len() * (8 + 4 * self.dims));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims as u32).to_le_bytes());
        out.extend_from_slice(&self.identity_hash.to_le_bytes());
        for (k, v) in map.iter() {
            out.extend_from_slice(&k.to_le_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    /// Merges records from `bytes`, which must carry this cache's identity and dims.
    pub fn extend_from_bytes(&self, bytes: &[u8], path: &Path) -> Result<usize, EmbedError> {
        let bad = |reason: String| EmbedError::Cache { path: path.to_path_buf(), reason };
        if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
            return Err(bad("not an embedding cache file".into()));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let dims = u32_at(12) as usize;
        let identity = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        if identity != self.identity_hash {
            return Err(bad(format!("model identity hash {identity:016x} does not match {:016x}", self.identity_hash)));
        }
        if dims != self.dims {
            return Err(bad(format!("file has {dims} dimensions, model has {}", self.dims)));
        }
        let record = 8 + 4 * dims;
        let body = &bytes[HEADER_LEN..];
        if body.len() % record != 0 {
            return Err(bad(format!("truncated record at byte {}", HEADER_LEN + body.len() / record * record)));
        }
        let items: Vec<(u64, Vec<f32>)> = body
            .chunks_exact(record)
            .map(|r| {
                let key = u64::from_le_bytes(r[..8].try_into().unwrap());
                let v = r[8..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
                (key, v)
            })
            .collect();
        let n = items.len();
        self.insert_many(items)?;
        Ok(n)
    }

    /// Loads the file if it exists. Returns the number of records read.
    pub fn load(&self, path: &Path) -> Result<usize, EmbedError> {
        match std::fs::read(path) {
            Ok(bytes) => self.extend_from_bytes(&bytes, path),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
            Err(source) => Err(EmbedError::Io { path: path.to_path_buf(), source }),
        }
    }

    /// Writes through a temporary file so readers never see a partial cache.
    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        let io = |p: &Path| {
            let p: PathBuf = p.to_path_buf();
            move |source| EmbedError::Io { path: p, source }
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io(dir))?;
        }
        let tmp = path.with_extension("tmp");
        let mut f = std::fs::File::create(&tmp).map_err(io(&tmp))?;
        f.write_all(&self.to_bytes()).map_err(io(&tmp))?;
        f.sync_all().map_err(io(&tmp))?;
        std::fs::rename(&tmp, path).map_err(io(path))
    }
}
