//! Kinematic plausibility heuristics: foot sliding, jitter, and floor
//! penetration, with configurable pass thresholds. The floor is the plane
//! z = 0.

use crate::CurationError;
use motok_core::skeleton::{CONTACT_JOINTS, NUM_JOINTS};
use motok_core::MotionSequence;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PlausibilityThresholds {
    pub max_foot_slide: f64,
    pub max_jitter: f64,
    pub max_penetration: f64,
}

impl Default for PlausibilityThresholds {
    fn default() -> Self {
        PlausibilityThresholds { max_foot_slide: 0.01, max_jitter: 50.0, max_penetration: 0.03 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PlausibilityReport {
    pub foot_slide_score: f64,
    pub jitter_score: f64,
    pub penetration_score: f64,
    pub pass: bool,
}

/// Mean horizontal displacement (meters per contact frame) of the tracked
/// foot joints over frames whose contact channel is set. 0 when no frame is
/// in contact.
pub fn foot_slide_score(m: &MotionSequence) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for t in 1..m.num_frames() {
        let contacts = m.contacts(t);
        for (c, &joint) in CONTACT_JOINTS.iter().enumerate() {
            if contacts[c] == 1.0 {
                let prev = m.joint_position(t - 1, joint);
                let cur = m.joint_position(t, joint);
                let dx = cur[0] - prev[0];
                let dy = cur[1] - prev[1];
                total += (dx * dx + dy * dy).sqrt();
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Mean squared jerk, estimated by the third finite difference of joint
/// positions scaled by fps^3. Units (m/s^3)^2.
pub fn jitter_score(m: &MotionSequence) -> Result<f64, CurationError> {
    let t_len = m.num_frames();
    if t_len < 4 {
        return Err(CurationError::TooShort(t_len, 4));
    }
    let fps3 = m.fps().powi(3);
    let mut total = 0.0;
    let mut count = 0usize;
    for t in 0..t_len - 3 {
        for joint in 0..NUM_JOINTS {
            let p0 = m.joint_position(t, joint);
            let p1 = m.joint_position(t + 1, joint);
            let p2 = m.joint_position(t + 2, joint);
            let p3 = m.joint_position(t + 3, joint);
            let mut sq = 0.0;
            for k in 0..3 {
                let d3 = (p3[k] - 3.0 * p2[k] + 3.0 * p1[k] - p0[k]) * fps3;
                sq += d3 * d3;
            }
            total += sq;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// 95th percentile over frames of how far the lowest joint dips below the
/// floor, in meters.
pub fn penetration_score(m: &MotionSequence) -> f64 {
    let mut depths: Vec<f64> = (0..m.num_frames())
        .map(|t| {
            let min_z = (0..NUM_JOINTS)
                .map(|j| m.joint_position(t, j)[2])
                .fold(f64::INFINITY, f64::min);
            (-min_z).max(0.0)
        })
        .collect();
    depths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Nearest-rank 95th percentile.
    let idx = ((0.95 * depths.len() as f64).ceil() as usize).clamp(1, depths.len()) - 1;
    depths[idx]
}

pub fn score_motion(
    m: &MotionSequence,
    th: &PlausibilityThresholds,
) -> Result<PlausibilityReport, CurationError> {
    let foot_slide = foot_slide_score(m);
    let jitter = jitter_score(m)?;
    let penetration = penetration_score(m);
    Ok(PlausibilityReport {
        foot_slide_score: foot_slide,
        jitter_score: jitter,
        penetration_score: penetration,
        pass: foot_slide <= th.max_foot_slide
            && jitter <= th.max_jitter
            && penetration <= th.max_penetration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use motok_core::skeleton::{Skeleton, CONTACT_OFFSET, FRAME_DIM, ROOT_OFFSET};

    fn rest_frame() -> Vec<f64> {
        let mut f = vec![0.0; FRAME_DIM];
        for j in 1..NUM_JOINTS {
            let o = Skeleton::block_offset(j);
            f[o] = 1.0;
            f[o + 4] = 1.0;
        }
        f
    }

    fn build(frames: Vec<Vec<f64>>, fps: f64) -> MotionSequence {
        let n = frames.len();
        MotionSequence::new(frames.concat(), n, fps).unwrap()
    }

    #[test]
    fn static_pose_slides_zero() {
        let mut f = rest_frame();
        f[CONTACT_OFFSET] = 1.0;
        f[CONTACT_OFFSET + 1] = 1.0;
        let m = build(vec![f; 10], 20.0);
        assert_eq!(foot_slide_score(&m), 0.0);
    }

    #[test]
    fn translating_contact_foot_slides() {
        // Left ankle translating 0.02 m/frame while in contact.
        let mut frames = Vec::new();
        for t in 0..10 {
            let mut f = rest_frame();
            let o = Skeleton::block_offset(motok_core::skeleton::L_ANKLE) + 6;
            f[o] = 0.02 * t as f64;
            f[CONTACT_OFFSET] = 1.0;
            frames.push(f);
        }
        let m = build(frames, 20.0);
        assert!((foot_slide_score(&m) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn airborne_slides_zero() {
        let mut frames = Vec::new();
        for t in 0..10 {
            let mut f = rest_frame();
            let o = Skeleton::block_offset(motok_core::skeleton::L_ANKLE) + 6;
            f[o] = 0.5 * t as f64;
            frames.push(f);
        }
        let m = build(frames, 20.0);
        assert_eq!(foot_slide_score(&m), 0.0);
    }

    #[test]
    fn jitter_zero_for_constant_and_linear() {
        let m = build(vec![rest_frame(); 8], 20.0);
        assert_eq!(jitter_score(&m).unwrap(), 0.0);
        let mut frames = Vec::new();
        for t in 0..8 {
            let mut f = rest_frame();
            for j in 1..NUM_JOINTS {
                f[Skeleton::block_offset(j) + 6] = 0.3 * t as f64;
            }
            f[ROOT_OFFSET + 1] = 0.3 * t as f64;
            frames.push(f);
        }
        let m = build(frames, 20.0);
        assert!(jitter_score(&m).unwrap() < 1e-18);
    }

    #[test]
    fn jitter_matches_sinusoid_oracle() {
        // x(t) = sin(t / fps) on one joint; jerk is -cos(t / fps).
        let fps = 20.0;
        let t_len = 200;
        let mut frames = Vec::new();
        for t in 0..t_len {
            let mut f = rest_frame();
            f[Skeleton::block_offset(1) + 6] = (t as f64 / fps).sin();
            frames.push(f);
        }
        let m = build(frames, fps);
        let got = jitter_score(&m).unwrap();
        let mut oracle = 0.0;
        let mut count = 0usize;
        for t in 0..t_len - 3 {
            for joint in 0..NUM_JOINTS {
                let jerk = if joint == 1 { -((t as f64 + 1.5) / fps).cos() } else { 0.0 };
                oracle += jerk * jerk;
                count += 1;
            }
        }
        oracle /= count as f64;
        assert!(
            (got - oracle).abs() <= 0.05 * oracle,
            "got {got}, oracle {oracle}"
        );
    }

    #[test]
    fn jitter_too_short() {
        let m = build(vec![rest_frame(); 3], 20.0);
        assert!(matches!(jitter_score(&m), Err(CurationError::TooShort(3, 4))));
    }

    #[test]
    fn penetration_examples() {
        let m = build(vec![rest_frame(); 5], 20.0);
        assert_eq!(penetration_score(&m), 0.0);

        let mut frames = Vec::new();
        for _ in 0..5 {
            let mut f = rest_frame();
            for j in 1..NUM_JOINTS {
                f[Skeleton::block_offset(j) + 8] = -0.05;
            }
            f[ROOT_OFFSET + 3] = -0.05;
            frames.push(f);
        }
        let m = build(frames, 20.0);
        assert!((penetration_score(&m) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn penetration_percentile_oracle() {
        // Depths 0.01 .. 0.20 over 20 frames; nearest-rank 95th = 19th value.
        let mut frames = Vec::new();
        for t in 0..20 {
            let mut f = rest_frame();
            f[Skeleton::block_offset(1) + 8] = -0.01 * (t + 1) as f64;
            frames.push(f);
        }
        let m = build(frames, 20.0);
        let mut depths: Vec<f64> = (1..=20).map(|i| 0.01 * i as f64).collect();
        depths.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = ((0.95f64 * 20.0).ceil() as usize) - 1;
        assert!((penetration_score(&m) - depths[idx]).abs() < 1e-15);
    }
}
