//! Binary checkpoints: `[u64 header length][JSON header][u64 count][f64 values]`,
//! all integers and floats little-endian.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{Architecture, ModelParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub architecture: Architecture,
    pub seed: u64,
    pub round: u32,
    pub agent: usize,
}

pub fn write_checkpoint(w: &mut impl Write, header: &CheckpointHeader, params: &ModelParams) -> Result<()> {
    if header.architecture != *params.architecture() {
        return Err(Error::Checkpoint("header architecture differs from the parameters".into()));
    }
    let json = serde_json::to_vec(header)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for v in params.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<(CheckpointHeader, ModelParams)> {
    let header_len = read_u64(r)? as usize;
    if header_len > 1 << 20 {
        return Err(Error::Checkpoint(format!("implausible header length {header_len}")));
    }
    let mut json = vec![0u8; header_len];
    r.read_exact(&mut json).map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    let header: CheckpointHeader = serde_json::from_slice(&json)?;
    let count = read_u64(r)? as usize;
    let expected = header.architecture.param_count();
    if count != expected {
        return Err(Error::Checkpoint(format!("{count} values stored, architecture needs {expected}")));
    }
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes).map_err(|e| Error::Checkpoint(format!("truncated values: {e}")))?;
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let params = ModelParams::from_flat(header.architecture.clone(), values)?;
    Ok((header, params))
}

pub fn save(path: &Path, header: &CheckpointHeader, params: &ModelParams) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(&mut f, header, params)?;
    f.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(CheckpointHeader, ModelParams)> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_checkpoint(&mut f)
}
