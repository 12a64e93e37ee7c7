//! Token grid files: magic "OT2T", version, n, p, L, K_c as unsigned 32-bit
//! little-endian, then n*p*L unsigned 16-bit little-endian indices.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::quantize::TokenGrid;
use crate::PrqError;

pub const TOKEN_MAGIC: &[u8; 4] = b"OT2T";
pub const TOKEN_VERSION: u32 = 1;

pub fn write_tokens<W: Write>(w: &mut W, g: &TokenGrid) -> Result<(), PrqError> {
    w.write_all(TOKEN_MAGIC)?;
    for v in [TOKEN_VERSION, g.steps as u32, g.parts as u32, g.layers as u32, g.codebook_size as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for &i in &g.indices {
        w.write_all(&i.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tokens<R: Read>(r: &mut R) -> Result<TokenGrid, PrqError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != TOKEN_MAGIC {
        return Err(PrqError::BadFile(format!("bad token magic {magic:?}")));
    }
    let mut u32buf = [0u8; 4];
    let mut next = |r: &mut R| -> Result<u32, PrqError> {
        r.read_exact(&mut u32buf)?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let version = next(r)?;
    if version != TOKEN_VERSION {
        return Err(PrqError::BadFile(format!("unsupported token version {version}")));
    }
    let steps = next(r)? as usize;
    let parts = next(r)? as usize;
    let layers = next(r)? as usize;
    let k_c = next(r)? as usize;
    let count = steps
        .checked_mul(parts)
        .and_then(|v| v.checked_mul(layers))
        .ok_or_else(|| PrqError::BadFile("token grid dimensions overflow".into()))?;
    let mut buf = vec![0u8; count * 2];
    r.read_exact(&mut buf)?;
    let indices: Vec<u16> =
        buf.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
    TokenGrid::new(steps, parts, layers, k_c, indices)
}

pub fn save_tokens(path: &Path, g: &TokenGrid) -> Result<(), PrqError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tokens(&mut w, g)?;
    w.flush()?;
    Ok(())
}

pub fn load_tokens(path: &Path) -> Result<TokenGrid, PrqError> {
    read_tokens(&mut BufReader::new(File::open(path)?))
}
