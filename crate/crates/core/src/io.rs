//! Motion binary file: magic "OT2M", version, fps, T, J, then T*D f32 LE
//! values row-major. D is derived from J as 9*(J-1)+8.

use crate::error::CoreError;
use crate::motion::MotionSequence;
use crate::skeleton::{FRAME_DIM, NUM_JOINTS};
use std::io::{Read, Write};
use std::path::Path;

pub const MOTION_MAGIC: &[u8; 4] = b"OT2M";
pub const MOTION_VERSION: u32 = 1;

pub fn write_motion<W: Write>(w: &mut W, m: &MotionSequence) -> Result<(), CoreError> {
    w.write_all(MOTION_MAGIC)?;
    w.write_all(&MOTION_VERSION.to_le_bytes())?;
    w.write_all(&(m.fps() as f32).to_le_bytes())?;
    w.write_all(&(m.num_frames() as u32).to_le_bytes())?;
    w.write_all(&(NUM_JOINTS as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(m.frames().len() * 4);
    for &v in m.frames() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_motion<R: Read>(r: &mut R) -> Result<MotionSequence, CoreError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MOTION_MAGIC {
        return Err(CoreError::BadFile(format!("bad magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != MOTION_VERSION {
        return Err(CoreError::BadFile(format!("unsupported version {version}")));
    }
    let mut fps_bytes = [0u8; 4];
    r.read_exact(&mut fps_bytes)?;
    let fps = f32::from_le_bytes(fps_bytes) as f64;
    let t = read_u32(r)? as usize;
    let j = read_u32(r)? as usize;
    if j != NUM_JOINTS {
        return Err(CoreError::BadFile(format!("expected J={NUM_JOINTS}, got {j}")));
    }
    let n = t
        .checked_mul(FRAME_DIM)
        .ok_or_else(|| CoreError::BadFile("size overflow".into()))?;
    let mut data = vec![0u8; n * 4];
    r.read_exact(&mut data)?;
    let frames = data
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    MotionSequence::new(frames, t, fps)
}

pub fn save_motion(path: &Path, m: &MotionSequence) -> Result<(), CoreError> {
    let mut f = std::fs::File::create(path)?;
    write_motion(&mut f, m)
}

pub fn load_motion(path: &Path) -> Result<MotionSequence, CoreError> {
    let mut f = std::fs::File::open(path)?;
    read_motion(&mut f)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CoreError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
