//! Long-horizon motion concatenation: the second clip is yaw-aligned and
//! translated onto the first, then a fixed-length SLERP transition window is
//! inserted between them.

use crate::CurationError;
use motok_core::rotation::slerp_sixd;
use motok_core::skeleton::{
    Skeleton, CONTACT_OFFSET, FRAME_DIM, NUM_JOINTS, ROOT_OFFSET, ROOT_X, ROOT_Y, ROOT_YAW, ROOT_Z,
};
use motok_core::MotionSequence;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct TransitionConfig {
    pub window_frames: usize,
    pub align_height: bool,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig { window_frames: 8, align_height: false }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeamReport {
    /// Largest per-step joint rotation across the transition window, radians.
    pub max_step_angle: f64,
    /// The same quantity expressed as angular velocity, rad/s.
    pub max_angular_velocity: f64,
}

#[derive(Debug)]
pub struct ConcatResult {
    pub motion: MotionSequence,
    pub seam: SeamReport,
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(2.0 * std::f64::consts::PI);
    if a > std::f64::consts::PI {
        a -= 2.0 * std::f64::consts::PI;
    }
    a
}

/// Rotates a motion about the vertical axis (about the origin) and then
/// translates it. Root yaw, root position, world joint positions, and the
/// root velocity channels all transform; parent-relative joint rotations are
/// unaffected.
pub fn apply_yaw_translation(m: &MotionSequence, dyaw: f64, delta: [f64; 3]) -> MotionSequence {
    let (s, c) = dyaw.sin_cos();
    let rot_xy = |x: f64, y: f64| (c * x - s * y, s * x + c * y);
    let mut frames = m.frames().to_vec();
    for t in 0..m.num_frames() {
        let f = &mut frames[t * FRAME_DIM..(t + 1) * FRAME_DIM];
        for j in 1..NUM_JOINTS {
            let o = Skeleton::block_offset(j) + 6;
            let (x, y) = rot_xy(f[o], f[o + 1]);
            f[o] = x + delta[0];
            f[o + 1] = y + delta[1];
            f[o + 2] += delta[2];
        }
        f[ROOT_OFFSET + ROOT_YAW] = wrap_angle(f[ROOT_OFFSET + ROOT_YAW] + dyaw);
        let (x, y) = rot_xy(f[ROOT_OFFSET + ROOT_X], f[ROOT_OFFSET + ROOT_Y]);
        f[ROOT_OFFSET + ROOT_X] = x + delta[0];
        f[ROOT_OFFSET + ROOT_Y] = y + delta[1];
        f[ROOT_OFFSET + ROOT_Z] += delta[2];
    }
    MotionSequence::new(frames, m.num_frames(), m.fps()).expect("transform preserves validity")
}

/// Concatenates `b` onto `a` with a W-frame SLERP transition. The output is
/// `a`, then W interpolated frames, then the aligned `b`; total length
/// T_a + W + T_b.
pub fn concat_motions(
    a: &MotionSequence,
    b: &MotionSequence,
    cfg: &TransitionConfig,
) -> Result<ConcatResult, CurationError> {
    if (a.fps() - b.fps()).abs() > 1e-9 {
        return Err(CurationError::FpsMismatch(a.fps(), b.fps()));
    }
    let w = cfg.window_frames.max(1);
    let ta = a.num_frames();
    let tb = b.num_frames();

    let last = a.frame(ta - 1);
    let dyaw = wrap_angle(last[ROOT_OFFSET + ROOT_YAW] - b.frame(0)[ROOT_OFFSET + ROOT_YAW]);
    let rotated = apply_yaw_translation(b, dyaw, [0.0, 0.0, 0.0]);
    let first = rotated.frame(0);
    let delta = [
        last[ROOT_OFFSET + ROOT_X] - first[ROOT_OFFSET + ROOT_X],
        last[ROOT_OFFSET + ROOT_Y] - first[ROOT_OFFSET + ROOT_Y],
        if cfg.align_height {
            last[ROOT_OFFSET + ROOT_Z] - first[ROOT_OFFSET + ROOT_Z]
        } else {
            0.0
        },
    ];
    let aligned = apply_yaw_translation(&rotated, 0.0, delta);

    let mut frames = Vec::with_capacity((ta + w + tb) * FRAME_DIM);
    frames.extend_from_slice(a.frames());

    let end_a = a.frame(ta - 1);
    let start_b = aligned.frame(0);
    for i in 1..=w {
        let t = i as f64 / (w + 1) as f64;
        let mut f = vec![0.0; FRAME_DIM];
        for j in 1..NUM_JOINTS {
            let o = Skeleton::block_offset(j);
            let qa: [f64; 6] = end_a[o..o + 6].try_into().unwrap();
            let qb: [f64; 6] = start_b[o..o + 6].try_into().unwrap();
            f[o..o + 6].copy_from_slice(&slerp_sixd(&qa, &qb, t)?);
            for k in 6..9 {
                f[o + k] = end_a[o + k] + t * (start_b[o + k] - end_a[o + k]);
            }
        }
        let ya = end_a[ROOT_OFFSET + ROOT_YAW];
        let yb = start_b[ROOT_OFFSET + ROOT_YAW];
        f[ROOT_OFFSET + ROOT_YAW] = wrap_angle(ya + t * wrap_angle(yb - ya));
        for k in [ROOT_X, ROOT_Y, ROOT_Z] {
            f[ROOT_OFFSET + k] =
                end_a[ROOT_OFFSET + k] + t * (start_b[ROOT_OFFSET + k] - end_a[ROOT_OFFSET + k]);
        }
        let src = if t <= 0.5 { end_a } else { start_b };
        f[CONTACT_OFFSET..FRAME_DIM].copy_from_slice(&src[CONTACT_OFFSET..FRAME_DIM]);
        frames.extend(f);
    }

    frames.extend_from_slice(aligned.frames());
    let motion = MotionSequence::new(frames, ta + w + tb, a.fps())?;

    // Seam report: largest per-step joint rotation over the W+1 steps that
    // bridge a's last frame to b's first.
    let mut max_step = 0.0f64;
    for step in 0..=w {
        let ft0 = ta - 1 + step;
        for j in 1..NUM_JOINTS {
            let r0 = motion.rotation_block(ft0, j);
            let r1 = motion.rotation_block(ft0 + 1, j);
            let q0 = motok_core::UnitQuaternion::from_matrix(&motok_core::sixd_to_matrix(&r0)?)?;
            let q1 = motok_core::UnitQuaternion::from_matrix(&motok_core::sixd_to_matrix(&r1)?)?;
            max_step = max_step.max(q0.angle_to(&q1));
        }
    }
    let seam = SeamReport { max_step_angle: max_step, max_angular_velocity: max_step * a.fps() };
    Ok(ConcatResult { motion, seam })
}
