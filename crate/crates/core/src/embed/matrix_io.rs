//! Embedding matrices as run-directory artifacts.
//!
//! ```text
//! magic "STSMATRX" | version u32 | rows u32 | dims u32 | rows x dims f32
//! ```
//!
//! All integers and floats little-endian. Model and part ids live in a JSON
//! sidecar written by the pipeline.

use std::path::Path;

use super::{EmbedError, EmbeddingMatrix, EmbeddingVector, ModelSpec};

const MAGIC: &[u8; 8] = b"STSMATRX";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 4;

pub fn encode_matrix(m: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.len() * m.dims);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.len() as u32).to_le_bytes());
    out.extend_from_slice(&(m.dims as u32).to_le_bytes());
    for row in &m.rows {
        for v in row.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_matrix(bytes: &[u8], model: ModelSpec, source_part: &str, path: &Path) -> Result<EmbeddingMatrix, EmbedError> {
    let bad = |reason: String| EmbedError::Cache { path: path.to_path_buf(), reason };
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(bad("not an embedding matrix file".into()));
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    if u32_at(8) != VERSION as usize {
        return Err(bad(format!("unsupported version {}", u32_at(8))));
    }
    let (rows, dims) = (u32_at(12), u32_at(16));
    let body = &bytes[HEADER_LEN..];
    if body.len() != rows * dims * 4 {
        return Err(bad(format!("expected {} data bytes, found {}", rows * dims * 4, body.len())));
    }
    let floats: Vec<f32> = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let vectors = if dims == 0 {
        vec![EmbeddingVector::zeros(0); rows]
    } else {
        floats.chunks_exact(dims).map(|c| EmbeddingVector::new(c.to_vec())).collect()
    };
    EmbeddingMatrix::new(model, source_part, vectors)
}

pub fn write_matrix(path: &Path, m: &EmbeddingMatrix) -> Result<(), EmbedError> {
    std::fs::write(path, encode_matrix(m)).map_err(|source| EmbedError::Io { path: path.to_path_buf(), source })
}

pub fn read_matrix(path: &Path, model: ModelSpec, source_part: &str) -> Result<EmbeddingMatrix, EmbedError> {
    let bytes = std::fs::read(path).map_err(|source| EmbedError::Io { path: path.to_path_buf(), source })?;
    decode_matrix(&bytes, model, source_part, path)
}
