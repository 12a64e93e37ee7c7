//! Whole-body motion sequences and their five-part decomposed view.
//!
//! Frame layout (width 197): 21 joint blocks of 9 (6d rotation then 3d world
//! position), then 4 root channels (yaw, x, y, height), then 4 binary foot
//! contact channels. Part layout (width 71): the part's 7 joint blocks in
//! part-map order, then the root and contact channels copied verbatim.

use crate::error::CoreError;
use crate::rotation::sixd_to_matrix;
use crate::skeleton::{
    self, Skeleton, CONTACT_OFFSET, FRAME_DIM, NUM_PARTS, PART_DIM, PART_JOINTS, ROOT_OFFSET,
};

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    frames: Vec<f64>,
    num_frames: usize,
    fps: f64,
}

impl MotionSequence {
    pub fn new(frames: Vec<f64>, num_frames: usize, fps: f64) -> Result<MotionSequence, CoreError> {
        if num_frames == 0 {
            return Err(CoreError::InvalidMotion("T must be >= 1".into()));
        }
        if !(fps > 0.0) {
            return Err(CoreError::InvalidMotion(format!("fps must be > 0, got {fps}")));
        }
        if frames.len() != num_frames * FRAME_DIM {
            return Err(CoreError::ShapeMismatch {
                expected: format!("{num_frames}x{FRAME_DIM}"),
                got: format!("{} values", frames.len()),
            });
        }
        let m = MotionSequence { frames, num_frames, fps };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), CoreError> {
        if self.frames.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidMotion("non-finite entry".into()));
        }
        for t in 0..self.num_frames {
            let f = self.frame(t);
            for c in 0..4 {
                let v = f[CONTACT_OFFSET + c];
                if v != 0.0 && v != 1.0 {
                    return Err(CoreError::InvalidMotion(format!(
                        "frame {t} contact channel {c} = {v}, not binary"
                    )));
                }
            }
            for j in 1..skeleton::NUM_JOINTS {
                let o = Skeleton::block_offset(j);
                let block: [f64; 6] = f[o..o + 6].try_into().unwrap();
                sixd_to_matrix(&block).map_err(|e| {
                    CoreError::InvalidMotion(format!("frame {t} joint {j}: {e}"))
                })?;
            }
        }
        Ok(())
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn duration_secs(&self) -> f64 {
        self.num_frames as f64 / self.fps
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t * FRAME_DIM..(t + 1) * FRAME_DIM]
    }

    pub fn frames(&self) -> &[f64] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<f64> {
        self.frames
    }

    /// World position of any named joint; the pelvis reads the root channels.
    pub fn joint_position(&self, t: usize, joint: usize) -> [f64; 3] {
        let f = self.frame(t);
        if joint == skeleton::PELVIS {
            [
                f[ROOT_OFFSET + skeleton::ROOT_X],
                f[ROOT_OFFSET + skeleton::ROOT_Y],
                f[ROOT_OFFSET + skeleton::ROOT_Z],
            ]
        } else {
            let o = Skeleton::block_offset(joint) + 6;
            [f[o], f[o + 1], f[o + 2]]
        }
    }

    pub fn rotation_block(&self, t: usize, joint: usize) -> [f64; 6] {
        let o = Skeleton::block_offset(joint);
        self.frame(t)[o..o + 6].try_into().unwrap()
    }

    pub fn root_yaw(&self, t: usize) -> f64 {
        self.frame(t)[ROOT_OFFSET + skeleton::ROOT_YAW]
    }

    pub fn contacts(&self, t: usize) -> [f64; 4] {
        self.frame(t)[CONTACT_OFFSET..CONTACT_OFFSET + 4].try_into().unwrap()
    }

    /// A single valid frame: identity rotations, zero positions and contacts.
    pub fn rest_frame() -> Vec<f64> {
        let mut f = vec![0.0; FRAME_DIM];
        for j in 1..skeleton::NUM_JOINTS {
            let o = Skeleton::block_offset(j);
            f[o] = 1.0;
            f[o + 4] = 1.0;
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartSet {
    parts: Vec<f64>,
    num_frames: usize,
    fps: f64,
}

impl PartSet {
    pub fn new(parts: Vec<f64>, num_frames: usize, fps: f64) -> Result<PartSet, CoreError> {
        if parts.len() != num_frames * NUM_PARTS * PART_DIM {
            return Err(CoreError::ShapeMismatch {
                expected: format!("{num_frames}x{NUM_PARTS}x{PART_DIM}"),
                got: format!("{} values", parts.len()),
            });
        }
        Ok(PartSet { parts, num_frames, fps })
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn part_frame(&self, t: usize, part: usize) -> &[f64] {
        let o = (t * NUM_PARTS + part) * PART_DIM;
        &self.parts[o..o + PART_DIM]
    }

    pub fn data(&self) -> &[f64] {
        &self.parts
    }
}

/// Splits a motion into the T x 5 x 71 part view, replicating root and
/// contact channels into every part.
pub fn split_parts(m: &MotionSequence) -> PartSet {
    let sk = Skeleton::default();
    let t_len = m.num_frames();
    let mut parts = vec![0.0; t_len * NUM_PARTS * PART_DIM];
    for t in 0..t_len {
        let frame = m.frame(t);
        for (p, group) in sk.part_map.iter().enumerate() {
            let base = (t * NUM_PARTS + p) * PART_DIM;
            for (s, &joint) in group.iter().enumerate() {
                let src = Skeleton::block_offset(joint);
                parts[base + s * 9..base + (s + 1) * 9]
                    .copy_from_slice(&frame[src..src + 9]);
            }
            parts[base + PART_JOINTS * 9..base + PART_DIM]
                .copy_from_slice(&frame[ROOT_OFFSET..FRAME_DIM]);
        }
    }
    PartSet { parts, num_frames: t_len, fps: m.fps() }
}

/// Merges the part view back into a whole-body motion. Joints present in k
/// parts are the arithmetic mean of their k copies; root and contact
/// channels are averaged over all five copies.
pub fn merge_parts(ps: &PartSet) -> Result<MotionSequence, CoreError> {
    merge_parts_raw(ps.data(), ps.num_frames(), ps.fps()).and_then(|frames| {
        MotionSequence::new(frames, ps.num_frames(), ps.fps())
    })
}

/// Mean-merge on a raw T x 5 x 71 buffer, without motion validation. Used
/// both by [`merge_parts`] and by decoder outputs that are not yet valid
/// motions.
pub fn merge_parts_raw(parts: &[f64], num_frames: usize, _fps: f64) -> Result<Vec<f64>, CoreError> {
    if parts.len() != num_frames * NUM_PARTS * PART_DIM {
        return Err(CoreError::ShapeMismatch {
            expected: format!("{num_frames}x{NUM_PARTS}x{PART_DIM}"),
            got: format!("{} values", parts.len()),
        });
    }
    let sk = Skeleton::default();
    let mut frames = vec![0.0; num_frames * FRAME_DIM];
    let mut counts = vec![0.0; FRAME_DIM];
    // Accumulate one frame to learn per-channel multiplicities, then reuse.
    for (p, group) in sk.part_map.iter().enumerate() {
        let _ = p;
        for &joint in group {
            let dst = Skeleton::block_offset(joint);
            for k in 0..9 {
                counts[dst + k] += 1.0;
            }
        }
    }
    for c in counts.iter_mut().skip(ROOT_OFFSET) {
        *c = NUM_PARTS as f64;
    }
    for t in 0..num_frames {
        let out = &mut frames[t * FRAME_DIM..(t + 1) * FRAME_DIM];
        for (p, group) in sk.part_map.iter().enumerate() {
            let base = (t * NUM_PARTS + p) * PART_DIM;
            for (s, &joint) in group.iter().enumerate() {
                let dst = Skeleton::block_offset(joint);
                for k in 0..9 {
                    out[dst + k] += parts[base + s * 9 + k];
                }
            }
            for k in 0..8 {
                out[ROOT_OFFSET + k] += parts[base + PART_JOINTS * 9 + k];
            }
        }
        for (v, c) in out.iter_mut().zip(counts.iter()) {
            if *c > 0.0 {
                *v /= *c;
            }
        }
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton::{NUM_JOINTS, SPINE1};

    pub fn rest_frame() -> Vec<f64> {
        MotionSequence::rest_frame()
    }

    fn simple_motion(t_len: usize) -> MotionSequence {
        let mut frames = Vec::new();
        for t in 0..t_len {
            let mut f = rest_frame();
            for j in 1..NUM_JOINTS {
                let o = Skeleton::block_offset(j) + 6;
                f[o] = 0.1 * j as f64 + 0.01 * t as f64;
                f[o + 1] = -0.2 * j as f64;
                f[o + 2] = 0.5 + 0.03 * t as f64;
            }
            f[ROOT_OFFSET] = 0.1 * t as f64;
            f[ROOT_OFFSET + 1] = 0.05 * t as f64;
            f[ROOT_OFFSET + 3] = 0.9;
            f[CONTACT_OFFSET] = 1.0;
            frames.extend(f);
        }
        MotionSequence::new(frames, t_len, 20.0).unwrap()
    }

    #[test]
    fn split_shape() {
        let m = simple_motion(6);
        let ps = split_parts(&m);
        assert_eq!(ps.data().len(), 6 * 5 * 71);
    }

    #[test]
    fn split_replicates_shared_joints_byte_identical() {
        let mut m = simple_motion(3);
        // Sentinel 7s in the spine1 block of frame 1.
        let mut frames = m.frames().to_vec();
        let o = FRAME_DIM + Skeleton::block_offset(SPINE1);
        // Keep the 6d block valid: sentinel only in the position dims.
        for k in 6..9 {
            frames[o + k] = 7.0;
        }
        m = MotionSequence::new(frames, 3, 20.0).unwrap();
        let ps = split_parts(&m);
        for p in 0..NUM_PARTS {
            let pf = ps.part_frame(1, p);
            // spine1 is slot 0 in every group.
            assert_eq!(&pf[6..9], &[7.0, 7.0, 7.0]);
        }
    }

    #[test]
    fn merge_split_identity() {
        let m = simple_motion(9);
        let back = merge_parts(&split_parts(&m)).unwrap();
        let max = m
            .frames()
            .iter()
            .zip(back.frames())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max <= 1e-12, "max deviation {max}");
    }

    #[test]
    fn merge_averages_shared_copies() {
        // spine1 position dim set to 1.0 in one part, 0.0 in the others.
        let m = simple_motion(1);
        let ps = split_parts(&m);
        let mut data = ps.data().to_vec();
        for p in 0..NUM_PARTS {
            let base = p * PART_DIM;
            data[base + 6] = if p == 0 { 1.0 } else { 0.0 };
        }
        let merged = merge_parts_raw(&data, 1, 20.0).unwrap();
        let o = Skeleton::block_offset(SPINE1) + 6;
        assert!((merged[o] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn merge_rejects_bad_shape() {
        assert!(matches!(
            merge_parts_raw(&[0.0; 10], 1, 20.0),
            Err(CoreError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn motion_rejects_nonbinary_contacts() {
        let mut f = rest_frame();
        f[CONTACT_OFFSET] = 0.5;
        assert!(MotionSequence::new(f, 1, 20.0).is_err());
    }

    #[test]
    fn motion_rejects_nan() {
        let mut f = rest_frame();
        f[ROOT_OFFSET] = f64::NAN;
        assert!(MotionSequence::new(f, 1, 20.0).is_err());
    }
}
