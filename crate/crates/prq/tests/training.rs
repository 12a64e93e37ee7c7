//! End-to-end tokenizer training on tiny synthetic motions.

use motok_core::skeleton::{CONTACT_OFFSET, FRAME_DIM, NUM_JOINTS, ROOT_OFFSET};
use motok_core::{MotionSequence, Skeleton};
use motok_prq::{reconstruct, TokenizerConfig, Trainer};

/// A valid motion with sinusoidal joint positions and identity rotations.
fn synthetic_motion(seed: u64, t_len: usize, fps: f64) -> MotionSequence {
    let mut frames = vec![0.0; t_len * FRAME_DIM];
    for t in 0..t_len {
        let f = &mut frames[t * FRAME_DIM..(t + 1) * FRAME_DIM];
        let phase = t as f64 / fps + seed as f64 * 0.7;
        for j in 1..NUM_JOINTS {
            let o = Skeleton::block_offset(j);
            f[o..o + 6].copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
            f[o + 6] = 0.2 * (phase + j as f64).sin();
            f[o + 7] = 0.2 * (phase * 1.3 + j as f64 * 0.5).cos();
            f[o + 8] = 0.8 + 0.1 * (phase + j as f64 * 0.2).sin();
        }
        f[ROOT_OFFSET] = 0.1 * phase.sin();
        f[ROOT_OFFSET + 1] = 0.05 * phase;
        f[ROOT_OFFSET + 2] = 0.02 * phase.cos();
        f[ROOT_OFFSET + 3] = 0.9;
        for c in 0..4 {
            f[CONTACT_OFFSET + c] = if (t / 8) % 2 == c % 2 { 1.0 } else { 0.0 };
        }
    }
    MotionSequence::new(frames, t_len, fps).unwrap()
}

fn tiny_cfg(layers: usize) -> TokenizerConfig {
    TokenizerConfig {
        layers,
        k_c: 32,
        d_z: 16,
        channels: 8,
        crop_frames: 32,
        lr: 1e-3,
        dead_code_window: 10,
        ..TokenizerConfig::default()
    }
}

#[test]
fn loss_decreases_and_terms_account_for_total() {
    let corpus: Vec<_> = (0..8).map(|i| synthetic_motion(i, 80, 20.0)).collect();
    let mut trainer = Trainer::new(tiny_cfg(2), 42).unwrap();
    let curve = trainer.train(&corpus, 60).unwrap();
    for b in &curve {
        let sum = b.recon_whole + b.recon_parts + b.commitment;
        assert!((b.total - sum).abs() <= 1e-9, "total {} vs parts {}", b.total, sum);
        assert!(b.total.is_finite());
    }
    let first = curve.first().unwrap().total;
    let last = curve.last().unwrap().total;
    assert!(last < first, "loss did not decrease: {first} -> {last}");
}

#[test]
fn beta_zero_is_rejected_but_terms_are_additive() {
    // beta must be positive per config contract.
    let mut cfg = tiny_cfg(1);
    cfg.beta = 0.0;
    assert!(Trainer::new(cfg, 1).is_err());
    // With tiny beta the commitment contribution is proportionally tiny.
    let mut cfg = tiny_cfg(1);
    cfg.beta = 1e-12;
    let corpus: Vec<_> = (0..2).map(|i| synthetic_motion(i, 40, 20.0)).collect();
    let mut trainer = Trainer::new(cfg, 7).unwrap();
    let b = trainer.train(&corpus, 1).unwrap()[0];
    assert!((b.total - (b.recon_whole + b.recon_parts)).abs() < 1e-9);
}

#[test]
fn training_is_deterministic() {
    let corpus: Vec<_> = (0..4).map(|i| synthetic_motion(i, 60, 20.0)).collect();
    let run = || {
        let mut trainer = Trainer::new(tiny_cfg(2), 99).unwrap();
        trainer
            .train(&corpus, 12)
            .unwrap()
            .iter()
            .map(|b| b.total)
            .collect::<Vec<_>>()
    };
    let a = run();
    let b = run();
    assert_eq!(a, b, "loss curves differ between identically seeded runs");
}

#[test]
fn reconstruct_preserves_shape_and_token_range() {
    let m = synthetic_motion(3, 70, 20.0);
    let cfg = tiny_cfg(3);
    let mut trainer = Trainer::new(cfg.clone(), 5).unwrap();
    let corpus = vec![synthetic_motion(0, 80, 20.0)];
    trainer.train(&corpus, 5).unwrap();
    let (recon, tokens) = reconstruct(&m, &trainer.params, &trainer.codebook, &cfg).unwrap();
    // 70 frames at alpha=4 pad up to 72.
    assert_eq!(recon.num_frames(), 72);
    assert_eq!(tokens.steps, 18);
    assert_eq!(tokens.layers, 3);
    assert!(tokens.indices.iter().all(|&i| (i as usize) < cfg.k_c));
}

#[test]
fn too_short_clip_is_rejected() {
    let m = synthetic_motion(0, 2, 20.0);
    let mut trainer = Trainer::new(tiny_cfg(1), 1).unwrap();
    assert!(matches!(
        trainer.train_step(&[&m]),
        Err(motok_prq::PrqError::TooShort { got: 2, need: 4 })
    ));
}
