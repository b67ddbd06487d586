//! Binary checkpoint layout (all integers and floats little-endian):
//!
//! | offset | size | field                              |
//! |--------|------|------------------------------------|
//! | 0      | 4    | magic `KBCE`                       |
//! | 4      | 4    | format version (u32, currently 1)  |
//! | 8      | 1    | model kind: 0 TransE, 1 RESCAL     |
//! | 9      | 1    | TransE norm: 0 L1, 1 L2            |
//! | 10     | 6    | reserved, zero                     |
//! | 16     | 8    | entity count (u64)                 |
//! | 24     | 8    | relation count (u64)               |
//! | 32     | 8    | dimension d (u64)                  |
//! | 40     | ...  | entity matrix, `|E| * d` f64       |
//! | ...    | ...  | relation params, `|R| * d` (TransE) or `|R| * d * d` (RESCAL) f64 |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{EmbeddingStore, ModelKind, Norm};
use crate::kg::{EntityId, Interner};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"KBCE";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 40;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}: not a checkpoint (bad magic)")]
    BadMagic(String),
    #[error("{path}: unsupported checkpoint version {version}")]
    Version { path: String, version: u32 },
    #[error("{path}: corrupt header: {msg}")]
    Header { path: String, msg: String },
    #[error("{path}: expected {expected} bytes of parameters, found {found}")]
    Truncated {
        path: String,
        expected: usize,
        found: usize,
    },
}

pub fn write_checkpoint<F: Scalar>(
    path: impl AsRef<Path>,
    emb: &EmbeddingStore<F>,
) -> Result<(), CheckpointError> {
    let path = path.as_ref();
    let io = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(MAGIC);
    header[4..8].copy_from_slice(&VERSION.to_le_bytes());
    header[8] = match emb.kind() {
        ModelKind::TransE => 0,
        ModelKind::Rescal => 1,
    };
    header[9] = match emb.norm() {
        Norm::L1 => 0,
        Norm::L2 => 1,
    };
    header[16..24].copy_from_slice(&(emb.num_entities() as u64).to_le_bytes());
    header[24..32].copy_from_slice(&(emb.num_relations() as u64).to_le_bytes());
    header[32..40].copy_from_slice(&(emb.dim() as u64).to_le_bytes());
    w.write_all(&header).map_err(io)?;
    for x in emb.entity_matrix().iter().chain(emb.relation_params()) {
        w.write_all(&x.to_f64_lossy().to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_checkpoint<F: Scalar>(
    path: impl AsRef<Path>,
) -> Result<EmbeddingStore<F>, CheckpointError> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let io = |source| CheckpointError::Io {
        path: label.clone(),
        source,
    };
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(io)?)
        .read_to_end(&mut bytes)
        .map_err(io)?;
    if bytes.len() < HEADER_LEN || &bytes[0..4] != MAGIC {
        return Err(CheckpointError::BadMagic(label));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap()) as usize;
    let version = u32_at(4);
    if version != VERSION {
        return Err(CheckpointError::Version {
            path: label,
            version,
        });
    }
    let header_err = |msg: &str| CheckpointError::Header {
        path: label.clone(),
        msg: msg.to_owned(),
    };
    let kind = match bytes[8] {
        0 => ModelKind::TransE,
        1 => ModelKind::Rescal,
        _ => return Err(header_err("unknown model kind")),
    };
    let norm = match bytes[9] {
        0 => Norm::L1,
        1 => Norm::L2,
        _ => return Err(header_err("unknown norm")),
    };
    let (ne, nr, d) = (u64_at(16), u64_at(24), u64_at(32));
    if d == 0 {
        return Err(header_err("zero dimension"));
    }
    let rel_len = match kind {
        ModelKind::TransE => d,
        ModelKind::Rescal => d * d,
    };
    let n_ent = ne * d;
    let n_rel = nr * rel_len;
    let expected = (n_ent + n_rel) * 8;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(CheckpointError::Truncated {
            path: label,
            expected,
            found: body.len(),
        });
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| F::lit(f64::from_le_bytes(c.try_into().unwrap())));
    let entities: Vec<F> = values.by_ref().take(n_ent).collect();
    let relations: Vec<F> = values.collect();
    Ok(EmbeddingStore::from_parts(kind, norm, d, entities, relations))
}

/// Writes `name<TAB>v1 v2 ...` per entity, in id order.
pub fn write_text_export<F: Scalar, W: Write>(
    mut out: W,
    emb: &EmbeddingStore<F>,
    names: &Interner,
) -> std::io::Result<()> {
    for i in 0..emb.num_entities() {
        let name = names
            .name(i as u32)
            .map(str::to_owned)
            .unwrap_or_else(|| i.to_string());
        let row = emb.entity(EntityId(i as u32));
        let values: Vec<String> = row.iter().map(|x| format!("{}", x.to_f64_lossy())).collect();
        writeln!(out, "{name}\t{}", values.join(" "))?;
    }
    Ok(())
}
