//! Named-tensor checkpoint files.
//!
//! Layout (all integers little-endian):
//!   magic "OT2W" | version u32 | count u32 | entries...
//! Each entry:
//!   name_len u32 | name bytes (utf-8) | rank u32 | dims u32 x rank | f32 x numel
//!
//! Values are stored in f32; loading widens back to f64, so a save/load round
//! trip quantizes weights. Entries keep insertion order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::tensor::Tensor;
use crate::AdError;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"OT2W";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(
    w: &mut W,
    entries: &[(&str, &Tensor)],
) -> Result<(), AdError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, t) in entries {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.rank() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Vec<(String, Tensor)>, AdError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(AdError::BadFile(format!("bad checkpoint magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(AdError::BadFile(format!("unsupported checkpoint version {version}")));
    }
    let count = read_u32(r)? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| AdError::BadFile("checkpoint name is not utf-8".into()))?;
        let rank = read_u32(r)? as usize;
        if !(1..=4).contains(&rank) {
            return Err(AdError::BadFile(format!("checkpoint tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(r)? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut buf = vec![0u8; numel * 4];
        r.read_exact(&mut buf)?;
        let data: Vec<f64> = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        out.push((name, Tensor::new(&shape, data)?));
    }
    Ok(out)
}

pub fn save_checkpoint(path: &Path, entries: &[(&str, &Tensor)]) -> Result<(), AdError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, entries)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, Tensor)>, AdError> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, AdError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_names_shapes_and_f32_values() {
        let a = Tensor::new(&[2, 3], vec![1.5, -2.25, 0.0, 10.0, 1.0 / 3.0, -7.0]).unwrap();
        let b = Tensor::new(&[4], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.ot2w");
        save_checkpoint(&path, &[("enc.w", &a), ("enc.b", &b)]).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "enc.w");
        assert_eq!(loaded[0].1.shape(), &[2, 3]);
        for (got, want) in loaded[0].1.data().iter().zip(a.data()) {
            assert_eq!(*got, *want as f32 as f64);
        }
        assert_eq!(loaded[1].0, "enc.b");
    }

    #[test]
    fn rejects_wrong_magic() {
        let mut buf: &[u8] = b"XXXX\x01\x00\x00\x00\x00\x00\x00\x00";
        assert!(matches!(read_checkpoint(&mut buf), Err(AdError::BadFile(_))));
    }
}
