use motok_core::{skeleton::NUM_JOINTS, MotionSequence};

use crate::MetricsError;

/// Mean per-joint position error in millimeters: the Euclidean distance
/// between corresponding joints, averaged over all frames and joints.
pub fn mpjpe(a: &MotionSequence, b: &MotionSequence) -> Result<f64, MetricsError> {
    if a.num_frames() != b.num_frames() {
        return Err(MetricsError::ShapeMismatch(format!(
            "frame counts differ: {} vs {}",
            a.num_frames(),
            b.num_frames()
        )));
    }
    let mut total = 0.0;
    for t in 0..a.num_frames() {
        for j in 0..NUM_JOINTS {
            let pa = a.joint_position(t, j);
            let pb = b.joint_position(t, j);
            let d2 = (pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2);
            total += d2.sqrt();
        }
    }
    Ok(total / (a.num_frames() * NUM_JOINTS) as f64 * 1000.0)
}
