use motok_core::skeleton::{
    Skeleton, CONTACT_JOINTS, CONTACT_OFFSET, FRAME_DIM, NUM_JOINTS, ROOT_OFFSET, ROOT_X, ROOT_Y,
    ROOT_YAW, ROOT_Z,
};
use motok_core::MotionSequence;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::CliError;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub count: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    pub fps: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        // Defaults target the ~10 s average length of typical corpora.
        SynthConfig { count: 64, min_frames: 160, max_frames: 240, fps: 20.0 }
    }
}

const VERBS: [&str; 4] = ["sways", "stretches", "bends", "twists"];
const ADVERBS: [&str; 3] = ["slowly", "gently", "steadily"];
const ARMS: [&str; 3] = ["raising", "lowering", "circling"];

/// Resting joint heights, meters. Contact joints get their height from the
/// per-clip oscillation instead.
fn base_pose(joint: usize) -> [f64; 3] {
    use motok_core::skeleton::*;
    let (x, z) = match joint {
        PELVIS => (0.0, 0.90),
        L_HIP => (0.10, 0.88),
        R_HIP => (-0.10, 0.88),
        SPINE1 => (0.0, 1.05),
        L_KNEE => (0.10, 0.50),
        R_KNEE => (-0.10, 0.50),
        SPINE2 => (0.0, 1.20),
        L_ANKLE => (0.10, 0.10),
        R_ANKLE => (-0.10, 0.10),
        SPINE3 => (0.0, 1.35),
        L_FOOT => (0.15, 0.05),
        R_FOOT => (-0.15, 0.05),
        NECK => (0.0, 1.50),
        L_COLLAR => (0.08, 1.45),
        R_COLLAR => (-0.08, 1.45),
        HEAD => (0.0, 1.65),
        L_SHOULDER => (0.20, 1.42),
        R_SHOULDER => (-0.20, 1.42),
        L_ELBOW => (0.35, 1.15),
        R_ELBOW => (-0.35, 1.15),
        L_WRIST => (0.45, 0.95),
        R_WRIST => (-0.45, 0.95),
        _ => (0.0, 1.0),
    };
    [x, 0.0, z]
}

fn f32_round(v: f64) -> f64 {
    v as f32 as f64
}

/// Procedurally generated motions with template texts. Deterministic per
/// seed; every stored value is f32-representable so motion files round trip
/// exactly. Contact flags are set iff the (rounded) joint height is below
/// 0.05 m, and the oscillation amplitudes keep the plausibility scores under
/// their default thresholds.
pub fn gen_synthetic(
    cfg: &SynthConfig,
    seed: u64,
) -> Result<Vec<(String, MotionSequence)>, CliError> {
    if cfg.count == 0 || cfg.min_frames < 4 || cfg.max_frames < cfg.min_frames {
        return Err(CliError::BadArgument(format!(
            "need count >= 1 and 4 <= min_frames <= max_frames, got {cfg:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(cfg.count);
    for clip in 0..cfg.count {
        let t_len = rng.gen_range(cfg.min_frames..=cfg.max_frames);
        let freq = rng.gen_range(0.2..0.5); // Hz; slow enough to bound jerk.
        let omega = 2.0 * std::f64::consts::PI * freq;
        let amp = rng.gen_range(0.03..0.08);
        let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let pos_x = rng.gen_range(-1.0..1.0);
        let pos_y = rng.gen_range(-1.0..1.0);
        let verb = VERBS[rng.gen_range(0..VERBS.len())];
        let adverb = ADVERBS[rng.gen_range(0..ADVERBS.len())];
        let arms = ARMS[rng.gen_range(0..ARMS.len())];
        let text =
            format!("a person {verb} {adverb} in place while {arms} the arms, clip {clip}");

        let mut frames = Vec::with_capacity(t_len * FRAME_DIM);
        for t in 0..t_len {
            let time = t as f64 / cfg.fps;
            let mut f = vec![0.0; FRAME_DIM];
            for j in 1..NUM_JOINTS {
                let o = Skeleton::block_offset(j);
                // Small sinusoidal joint rotation about the vertical axis.
                let theta = 0.3 * (omega * time + j as f64).sin();
                let (s, c) = theta.sin_cos();
                for (k, v) in [c, s, 0.0, -s, c, 0.0].into_iter().enumerate() {
                    f[o + k] = f32_round(v);
                }
                let base = base_pose(j);
                let phase = j as f64 * 0.7;
                let (x, y, z) = if CONTACT_JOINTS.contains(&j) {
                    // Feet hold their horizontal position; only the height
                    // oscillates, dipping below the 0.05 m contact line.
                    let h = 0.02 + 0.05 * (1.0 + (omega * time + phase).sin());
                    (base[0] + pos_x, base[1] + pos_y, h)
                } else {
                    (
                        base[0] + pos_x + amp * (omega * time + phase).sin(),
                        base[1] + pos_y + amp * (omega * time + phase).cos(),
                        base[2] + 0.02 * (omega * time).sin(),
                    )
                };
                f[o + 6] = f32_round(x);
                f[o + 7] = f32_round(y);
                f[o + 8] = f32_round(z);
            }
            f[ROOT_OFFSET + ROOT_YAW] = f32_round(yaw);
            f[ROOT_OFFSET + ROOT_X] = f32_round(pos_x);
            f[ROOT_OFFSET + ROOT_Y] = f32_round(pos_y);
            f[ROOT_OFFSET + ROOT_Z] = f32_round(0.9 + 0.02 * (omega * time).sin());
            for (c, &joint) in CONTACT_JOINTS.iter().enumerate() {
                let z = f[Skeleton::block_offset(joint) + 8];
                f[CONTACT_OFFSET + c] = if z < 0.05 { 1.0 } else { 0.0 };
            }
            frames.extend(f);
        }
        let m = MotionSequence::new(frames, t_len, cfg.fps)?;
        out.push((text, m));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use motok_curation::plausibility::{score_motion, PlausibilityThresholds};

    #[test]
    fn identical_seeds_give_bitwise_identical_corpora() {
        let cfg = SynthConfig { count: 4, min_frames: 40, max_frames: 80, ..Default::default() };
        let a = gen_synthetic(&cfg, 9).unwrap();
        let b = gen_synthetic(&cfg, 9).unwrap();
        assert_eq!(a.len(), b.len());
        for ((ta, ma), (tb, mb)) in a.iter().zip(&b) {
            assert_eq!(ta, tb);
            assert_eq!(ma.frames(), mb.frames());
        }
        let c = gen_synthetic(&cfg, 10).unwrap();
        assert_ne!(a[0].1.frames(), c[0].1.frames());
    }

    #[test]
    fn contacts_match_foot_height() {
        let cfg = SynthConfig { count: 3, min_frames: 60, max_frames: 60, ..Default::default() };
        for (_, m) in gen_synthetic(&cfg, 4).unwrap() {
            for t in 0..m.num_frames() {
                let contacts = m.contacts(t);
                for (c, &joint) in CONTACT_JOINTS.iter().enumerate() {
                    let z = m.joint_position(t, joint)[2];
                    assert_eq!(contacts[c] == 1.0, z < 0.05, "t={t} joint={joint} z={z}");
                }
            }
        }
    }

    #[test]
    fn generated_motions_pass_plausibility() {
        let cfg = SynthConfig { count: 8, min_frames: 80, max_frames: 120, ..Default::default() };
        let th = PlausibilityThresholds::default();
        for (_, m) in gen_synthetic(&cfg, 11).unwrap() {
            let report = score_motion(&m, &th).unwrap();
            assert!(report.pass, "{report:?}");
        }
    }

    #[test]
    fn values_survive_motion_file_round_trip() {
        let cfg = SynthConfig { count: 2, min_frames: 40, max_frames: 50, ..Default::default() };
        for (_, m) in gen_synthetic(&cfg, 3).unwrap() {
            let mut buf = Vec::new();
            motok_core::io::write_motion(&mut buf, &m).unwrap();
            let back = motok_core::io::read_motion(&mut buf.as_slice()).unwrap();
            assert_eq!(back.frames(), m.frames());
        }
    }
}
