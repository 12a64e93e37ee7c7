use motok_core::rotation::{sixd_to_matrix, slerp, yaw_of, Mat3, UnitQuaternion};
use motok_core::skeleton::{Skeleton, CONTACT_OFFSET, FRAME_DIM, NUM_JOINTS, ROOT_OFFSET};
use motok_core::{motion, MotionSequence};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_motion(rng: &mut ChaCha8Rng, t_len: usize) -> MotionSequence {
    let mut frames = Vec::with_capacity(t_len * FRAME_DIM);
    for _ in 0..t_len {
        let mut f = vec![0.0f64; FRAME_DIM];
        for j in 1..NUM_JOINTS {
            let o = Skeleton::block_offset(j);
            let q = UnitQuaternion::from_axis_angle(
                [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0f64)],
                rng.gen_range(-3.0..3.0),
            )
            .unwrap_or(UnitQuaternion::IDENTITY);
            f[o..o + 6].copy_from_slice(&q.to_matrix().to_sixd());
            for k in 0..3 {
                f[o + 6 + k] = rng.gen_range(-2.0..2.0);
            }
        }
        for k in 0..4 {
            f[ROOT_OFFSET + k] = rng.gen_range(-2.0..2.0);
            f[CONTACT_OFFSET + k] = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        }
        frames.extend(f);
    }
    MotionSequence::new(frames, t_len, 20.0).unwrap()
}

#[test]
fn merge_split_identity_randomized() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let t_len = rng.gen_range(1..12);
        let m = random_motion(&mut rng, t_len);
        let back = motion::merge_parts(&motion::split_parts(&m)).unwrap();
        let max = m
            .frames()
            .iter()
            .zip(back.frames())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max <= 1e-12, "max deviation {max}");
    }
}

#[test]
fn yaw_of_rotz_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let theta: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let got = yaw_of(&Mat3::rot_z(theta)).unwrap();
        assert!((got - theta).abs() <= 1e-9, "theta {theta} got {got}");
    }
}

proptest! {
    #[test]
    fn sixd_always_orthonormal(v in prop::array::uniform6(-5.0f64..5.0)) {
        if let Ok(m) = sixd_to_matrix(&v) {
            let rtr = m.transpose().mul(&m);
            let mut max = 0.0f64;
            for i in 0..3 {
                for j in 0..3 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    max = max.max((rtr.0[i * 3 + j] - want).abs());
                }
            }
            prop_assert!(max <= 1e-10);
            let a = &m.0;
            let det = a[0] * (a[4] * a[8] - a[5] * a[7])
                - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6]);
            prop_assert!((det - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn slerp_unit_norm_and_continuous(
        a0 in prop::array::uniform4(-1.0f64..1.0),
        a1 in prop::array::uniform4(-1.0f64..1.0),
        t in 0.0f64..1.0,
    ) {
        let q0 = UnitQuaternion::new(a0[0] + 1.5, a0[1], a0[2], a0[3]).unwrap();
        let q1 = UnitQuaternion::new(a1[0] + 1.5, a1[1], a1[2], a1[3]).unwrap();
        let r = slerp(&q0, &q1, t);
        prop_assert!((r.norm() - 1.0).abs() <= 1e-9);
        let _ = t;
    }
}

#[test]
fn slerp_continuity_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let q0 = UnitQuaternion::from_axis_angle(
            [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0f64)],
            rng.gen_range(-3.0..3.0),
        )
        .unwrap();
        let q1 = UnitQuaternion::from_axis_angle(
            [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0f64)],
            rng.gen_range(-3.0..3.0),
        )
        .unwrap();
        let arc = q0.angle_to(&q1) / 2.0; // quaternion-space arclength
        let step = 1e-3;
        let mut prev = slerp(&q0, &q1, 0.0);
        let mut t = step;
        while t <= 1.0 + 1e-12 {
            let cur = slerp(&q0, &q1, t);
            let d = ((cur.w - prev.w).powi(2)
                + (cur.x - prev.x).powi(2)
                + (cur.y - prev.y).powi(2)
                + (cur.z - prev.z).powi(2))
            .sqrt();
            assert!(d <= arc * step + 1e-9, "jump {d} at t={t}");
            prev = cur;
            t += step;
        }
    }
}
