use motok_core::skeleton::{NUM_JOINTS, ROOT_OFFSET, ROOT_YAW};
use motok_core::MotionSequence;

/// Deterministic map from motions (and texts) to fixed-length feature
/// vectors. A stand-in for a learned evaluator: absolute metric values are
/// only comparable under the same extractor id.
pub trait FeatureExtractor {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn motion_features(&self, m: &MotionSequence) -> Vec<f64>;
    fn text_features(&self, text: &str) -> Vec<f64>;
}

/// Handcrafted kinematic features: per-joint mean and standard deviation of
/// positions and frame-to-frame velocities, plus root yaw/speed statistics.
/// Texts map into the same space through a hashed bag of words.
pub struct KinematicExtractor;

// 22 joints x 3 coords x (mean, std) for positions and again for velocities,
// plus 4 root statistics.
const DIM: usize = NUM_JOINTS * 3 * 2 * 2 + 4;

impl FeatureExtractor for KinematicExtractor {
    fn id(&self) -> &str {
        "kinematic-v1"
    }

    fn dim(&self) -> usize {
        DIM
    }

    fn motion_features(&self, m: &MotionSequence) -> Vec<f64> {
        let t_len = m.num_frames();
        let mut out = Vec::with_capacity(DIM);
        let mut speeds = Vec::with_capacity(t_len.saturating_sub(1));
        for j in 0..NUM_JOINTS {
            let pos: Vec<[f64; 3]> = (0..t_len).map(|t| m.joint_position(t, j)).collect();
            let vel: Vec<[f64; 3]> = pos
                .windows(2)
                .map(|w| {
                    let v = [
                        (w[1][0] - w[0][0]) * m.fps(),
                        (w[1][1] - w[0][1]) * m.fps(),
                        (w[1][2] - w[0][2]) * m.fps(),
                    ];
                    if j == 0 {
                        speeds.push((v[0] * v[0] + v[1] * v[1]).sqrt());
                    }
                    v
                })
                .collect();
            for c in 0..3 {
                let (mu, sd) = mean_std(pos.iter().map(|p| p[c]));
                out.push(mu);
                out.push(sd);
            }
            for c in 0..3 {
                let (mu, sd) = mean_std(vel.iter().map(|p| p[c]));
                out.push(mu);
                out.push(sd);
            }
        }
        let yaws = (0..t_len).map(|t| m.frame(t)[ROOT_OFFSET + ROOT_YAW]);
        let (yaw_mu, yaw_sd) = mean_std(yaws);
        let (speed_mu, speed_sd) = mean_std(speeds.iter().copied());
        out.extend([yaw_mu, yaw_sd, speed_mu, speed_sd]);
        debug_assert_eq!(out.len(), DIM);
        out
    }

    fn text_features(&self, text: &str) -> Vec<f64> {
        let mut out = vec![0.0; DIM];
        let mut count = 0usize;
        for word in text.split_whitespace() {
            let h = fnv1a(word.as_bytes());
            out[(h % DIM as u64) as usize] += 1.0;
            count += 1;
        }
        if count > 0 {
            for v in &mut out {
                *v /= count as f64;
            }
        }
        out
    }
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let mu = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / v.len() as f64;
    (mu, var.sqrt())
}

// FNV-1a: stable across builds, unlike the std hasher.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rest(t_len: usize) -> MotionSequence {
        let frame = MotionSequence::rest_frame();
        let mut frames = Vec::new();
        for _ in 0..t_len {
            frames.extend_from_slice(&frame);
        }
        MotionSequence::new(frames, t_len, 30.0).unwrap()
    }

    #[test]
    fn deterministic_fixed_length_output() {
        let ex = KinematicExtractor;
        let m = rest(6);
        let a = ex.motion_features(&m);
        let b = ex.motion_features(&m);
        assert_eq!(a.len(), ex.dim());
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn text_features_share_the_motion_dimension() {
        let ex = KinematicExtractor;
        let t = ex.text_features("a person waves both hands");
        assert_eq!(t.len(), ex.dim());
        assert_eq!(t, ex.text_features("a person waves both hands"));
        assert_ne!(t, ex.text_features("someone jumps backward"));
    }
}
