//! Flat parameter checkpoints: 16-byte header (`MTRC`, u32 version, u64
//! length) followed by little-endian f64 values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MTRC";
const VERSION: u32 = 1;

pub fn write_params<W: Write>(mut w: W, params: &[f64]) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for p in params {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_params<R: Read>(mut r: R) -> Result<Vec<f64>> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| Error::Checkpoint("truncated header".into()))?;
    if &header[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let mut out = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)
            .map_err(|_| Error::Checkpoint("truncated body".into()))?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

pub fn save_params(path: &Path, params: &[f64]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_params(std::io::BufWriter::new(f), params)
}

pub fn load_params(path: &Path) -> Result<Vec<f64>> {
    read_params(std::io::BufReader::new(std::fs::File::open(path)?))
}
