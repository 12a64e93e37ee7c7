//! Inference path: encode, decode, and full-motion reconstruction.

use motok_autodiff::{Tape, Tensor};
use motok_core::rotation::sixd_to_matrix;
use motok_core::skeleton::{
    self, Skeleton, CONTACT_OFFSET, FRAME_DIM, NUM_PARTS, PART_DIM,
};
use motok_core::{merge_parts_raw, MotionSequence, PartSet};

use crate::codebook::Codebook;
use crate::model::{decoder_forward, encoder_forward, BoundParams, ModelParams};
use crate::quantize::{dequantize, rq_quantize, LatentGrid, TokenGrid};
use crate::train::TokenizerConfig;
use crate::PrqError;

/// Encodes a part set into the latent grid. Lengths not divisible by alpha
/// are padded by repeating the final frame, so n = ceil(T / alpha).
pub fn encode(
    ps: &PartSet,
    params: &ModelParams,
    cfg: &TokenizerConfig,
) -> Result<LatentGrid, PrqError> {
    let t_len = ps.num_frames();
    if t_len < cfg.alpha {
        return Err(PrqError::TooShort { got: t_len, need: cfg.alpha });
    }
    let padded = t_len.div_ceil(cfg.alpha) * cfg.alpha;
    let mut img = vec![0.0; PART_DIM * NUM_PARTS * padded];
    for t in 0..padded {
        let src_t = t.min(t_len - 1);
        for p in 0..NUM_PARTS {
            let src = ps.part_frame(src_t, p);
            for f in 0..PART_DIM {
                img[(f * NUM_PARTS + p) * padded + t] = src[f];
            }
        }
    }
    let mut tape = Tape::new();
    let bp = BoundParams::bind(&mut tape, params, false);
    let x = tape.input(Tensor::new(&[1, PART_DIM, NUM_PARTS, padded], img)?, false);
    let z = encoder_forward(&mut tape, &bp, cfg, x)?;
    let zv = tape.value(z);
    let n = padded / cfg.alpha;
    // Image layout (1, d_z, 5, n) -> grid layout [part][step][dim].
    let mut data = vec![0.0; NUM_PARTS * n * cfg.d_z];
    for p in 0..NUM_PARTS {
        for t in 0..n {
            for d in 0..cfg.d_z {
                data[(p * n + t) * cfg.d_z + d] = zv.data()[(d * NUM_PARTS + p) * n + t];
            }
        }
    }
    LatentGrid::new(NUM_PARTS, n, cfg.d_z, data)
}

/// Decodes a token grid back to part features of length n * alpha.
pub fn decode(
    tokens: &TokenGrid,
    cb: &Codebook,
    params: &ModelParams,
    cfg: &TokenizerConfig,
) -> Result<PartSet, PrqError> {
    let q = dequantize(tokens, cb)?;
    decode_latents(&q, params, cfg)
}

pub fn decode_latents(
    q: &LatentGrid,
    params: &ModelParams,
    cfg: &TokenizerConfig,
) -> Result<PartSet, PrqError> {
    decode_latents_fps(q, params, cfg, 20.0)
}

pub fn decode_latents_fps(
    q: &LatentGrid,
    params: &ModelParams,
    cfg: &TokenizerConfig,
    fps: f64,
) -> Result<PartSet, PrqError> {
    let n = q.steps;
    let mut img = vec![0.0; q.dim * NUM_PARTS * n];
    for p in 0..NUM_PARTS {
        for t in 0..n {
            let cell = q.cell(p, t);
            for d in 0..q.dim {
                img[(d * NUM_PARTS + p) * n + t] = cell[d];
            }
        }
    }
    let mut tape = Tape::new();
    let bp = BoundParams::bind(&mut tape, params, false);
    let x = tape.input(Tensor::new(&[1, q.dim, NUM_PARTS, n], img)?, false);
    let y = decoder_forward(&mut tape, &bp, cfg, x)?;
    let yv = tape.value(y);
    let t_out = n * cfg.alpha;
    let mut parts = vec![0.0; t_out * NUM_PARTS * PART_DIM];
    for t in 0..t_out {
        for p in 0..NUM_PARTS {
            for f in 0..PART_DIM {
                parts[(t * NUM_PARTS + p) * PART_DIM + f] =
                    yv.data()[(f * NUM_PARTS + p) * t_out + t];
            }
        }
    }
    Ok(PartSet::new(parts, t_out, fps)?)
}

/// Full pipeline: split -> encode -> quantize -> decode -> merge. The merged
/// frames are repaired into a valid motion: contacts are thresholded at 0.5
/// and degenerate rotation blocks replaced by the identity rotation.
pub fn reconstruct(
    m: &MotionSequence,
    params: &ModelParams,
    cb: &Codebook,
    cfg: &TokenizerConfig,
) -> Result<(MotionSequence, TokenGrid), PrqError> {
    let ps = motok_core::split_parts(m);
    let z = encode(&ps, params, cfg)?;
    let (tokens, q, _norms) = rq_quantize(&z, cb, cfg.layers)?;
    let decoded = decode_latents_fps(&q, params, cfg, m.fps())?;
    let mut frames = merge_parts_raw(decoded.data(), decoded.num_frames(), m.fps())?;
    sanitize_frames(&mut frames, decoded.num_frames());
    let motion = MotionSequence::new(frames, decoded.num_frames(), m.fps())?;
    Ok((motion, tokens))
}

/// Decodes a token grid straight to a repaired motion at the given fps.
pub fn decode_motion(
    tokens: &TokenGrid,
    cb: &Codebook,
    params: &ModelParams,
    cfg: &TokenizerConfig,
    fps: f64,
) -> Result<MotionSequence, PrqError> {
    let q = dequantize(tokens, cb)?;
    let decoded = decode_latents_fps(&q, params, cfg, fps)?;
    let mut frames = merge_parts_raw(decoded.data(), decoded.num_frames(), fps)?;
    sanitize_frames(&mut frames, decoded.num_frames());
    Ok(MotionSequence::new(frames, decoded.num_frames(), fps)?)
}

fn sanitize_frames(frames: &mut [f64], num_frames: usize) {
    const IDENTITY_6D: [f64; 6] = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    for t in 0..num_frames {
        let f = &mut frames[t * FRAME_DIM..(t + 1) * FRAME_DIM];
        for v in f.iter_mut() {
            if !v.is_finite() {
                *v = 0.0;
            }
        }
        for c in 0..4 {
            let v = &mut f[CONTACT_OFFSET + c];
            *v = if *v >= 0.5 { 1.0 } else { 0.0 };
        }
        for j in 1..skeleton::NUM_JOINTS {
            let o = Skeleton::block_offset(j);
            let block: [f64; 6] = f[o..o + 6].try_into().unwrap();
            if sixd_to_matrix(&block).is_err() {
                f[o..o + 6].copy_from_slice(&IDENTITY_6D);
            }
        }
    }
}
