use motok_curation::{
    apply_yaw_translation, filter_track, foot_slide_score, jitter_score, penetration_score,
    FilterCriteria, KeypointFrame, KeypointTrack,
};
use motok_core::skeleton::{Skeleton, CONTACT_OFFSET, FRAME_DIM, NUM_JOINTS, ROOT_OFFSET};
use motok_core::MotionSequence;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn track(
    len: u64,
    source: u64,
    conf: f64,
    bbox_frac: f64,
) -> KeypointTrack {
    let side = (1920.0f64 * 1080.0 * bbox_frac).sqrt();
    KeypointTrack::new(
        (0..len)
            .map(|i| KeypointFrame {
                frame_idx: i,
                bbox: [0.0, 0.0, side, side],
                frame_size: [1920.0, 1080.0],
                keypoints: vec![[10.0, 10.0, conf]; 17],
                source_frames: Some(source),
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    // Relaxing any single threshold never flips accept -> reject.
    #[test]
    fn filter_is_monotone(
        len in 1u64..200,
        source in 1u64..250,
        conf in 0.0f64..1.0,
        bbox_frac in 0.001f64..0.5,
        which in 0usize..5,
    ) {
        let source = source.max(len);
        let t = track(len, source, conf, bbox_frac);
        let base = FilterCriteria::default();
        let mut relaxed = base.clone();
        match which {
            0 => relaxed.min_visible_keypoints = relaxed.min_visible_keypoints.saturating_sub(3),
            1 => relaxed.confidence_threshold *= 0.5,
            2 => relaxed.min_bbox_area_ratio *= 0.5,
            3 => relaxed.min_duration_frames /= 2,
            _ => relaxed.min_motion_coverage *= 0.5,
        }
        let before = filter_track(&t, &base);
        let after = filter_track(&t, &relaxed);
        prop_assert!(!(before.accept && !after.accept));
    }
}

fn random_motion(seed: u64, t_len: usize) -> MotionSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::new();
    for _ in 0..t_len {
        let mut f = vec![0.0; FRAME_DIM];
        for j in 1..NUM_JOINTS {
            let o = Skeleton::block_offset(j);
            f[o] = 1.0;
            f[o + 4] = 1.0;
            for k in 0..3 {
                f[o + 6 + k] = rng.gen_range(-1.0..1.0);
            }
        }
        for k in 0..4 {
            f[ROOT_OFFSET + k] = rng.gen_range(-1.0..1.0);
            f[CONTACT_OFFSET + k] = if rng.gen_bool(0.4) { 1.0 } else { 0.0 };
        }
        frames.extend(f);
    }
    MotionSequence::new(frames, t_len, 20.0).unwrap()
}

#[test]
fn plausibility_scores_invariant_under_yaw_and_translation() {
    for seed in 0..5u64 {
        let m = random_motion(seed, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let transformed = apply_yaw_translation(
            &m,
            rng.gen_range(-3.0..3.0),
            [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 0.0],
        );
        let rel = |a: f64, b: f64| (a - b).abs() / f64::max(1.0, a.abs());
        assert!(rel(foot_slide_score(&m), foot_slide_score(&transformed)) <= 1e-9);
        assert!(rel(jitter_score(&m).unwrap(), jitter_score(&transformed).unwrap()) <= 1e-9);
        assert!(rel(penetration_score(&m), penetration_score(&transformed)) <= 1e-9);
    }
}
