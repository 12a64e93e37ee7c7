//! The tokenizer training loop: straight-through reconstruction with EMA
//! codebook updates.
//!
//! Per step the loss is
//!   L = |m - m_hat|_1 + sum_i |m_i - m_hat_i|_1 + beta * sum_k |r^k|_2^2
//! with the whole-body term computed through the mean-merge matrix, the part
//! term summed over the five parts, and the commitment term summed over
//! residual layers. Every norm is a mean over its elements so the three terms
//! share a scale regardless of batch shape.

use motok_autodiff::{Adam, AdamConfig, NodeId, Tape, Tensor};
use motok_core::skeleton::{FRAME_DIM, NUM_PARTS, PART_DIM};
use motok_core::{split_parts, MotionSequence};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codebook::Codebook;
use crate::model::{decoder_forward, encoder_forward, merge_matrix, BoundParams, ModelParams};
use crate::PrqError;

#[derive(Debug, Clone)]
pub struct TokenizerConfig {
    /// Temporal downsampling factor; one strided block per factor of two.
    pub alpha: usize,
    /// Residual quantization layers.
    pub layers: usize,
    /// Codebook size.
    pub k_c: usize,
    /// Latent dimension.
    pub d_z: usize,
    /// Commitment weight.
    pub beta: f64,
    /// Conv channel width.
    pub channels: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub crop_frames: usize,
    /// Steps a code may go unassigned before being re-seeded from the batch.
    pub dead_code_window: u64,
}

impl Default for TokenizerConfig {
    fn default() -> TokenizerConfig {
        TokenizerConfig {
            alpha: 4,
            layers: 4,
            k_c: 1024,
            d_z: 512,
            beta: 0.25,
            channels: 64,
            lr: 2e-4,
            batch_size: 2,
            crop_frames: 64,
            dead_code_window: 40,
        }
    }
}

impl TokenizerConfig {
    pub fn validate(&self) -> Result<(), PrqError> {
        if ![2, 4, 8].contains(&self.alpha) {
            return Err(PrqError::BadConfig(format!("alpha {} not in {{2,4,8}}", self.alpha)));
        }
        if self.layers == 0 || !(self.beta > 0.0) || self.k_c == 0 || self.d_z == 0 {
            return Err(PrqError::BadConfig("layers >= 1, beta > 0, k_c/d_z > 0".into()));
        }
        if self.crop_frames % self.alpha != 0 {
            return Err(PrqError::BadConfig(format!(
                "crop_frames {} not divisible by alpha {}",
                self.crop_frames, self.alpha
            )));
        }
        Ok(())
    }

    pub fn num_blocks(&self) -> usize {
        self.alpha.trailing_zeros() as usize
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LossBreakdown {
    pub total: f64,
    pub recon_whole: f64,
    pub recon_parts: f64,
    pub commitment: f64,
}

pub struct Trainer {
    pub cfg: TokenizerConfig,
    pub params: ModelParams,
    pub codebook: Codebook,
    adam: Adam,
    rng: ChaCha8Rng,
    step: u64,
    merge: Tensor,
    last_latents: Vec<f64>,
}

impl Trainer {
    pub fn new(cfg: TokenizerConfig, seed: u64) -> Result<Trainer, PrqError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ModelParams::init(&cfg, &mut rng);
        let codebook = Codebook::new_random(cfg.k_c, cfg.d_z, seed.wrapping_add(1));
        let adam = Adam::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
        Ok(Trainer {
            merge: merge_matrix(),
            cfg,
            params,
            codebook,
            adam,
            rng,
            step: 0,
            last_latents: Vec::new(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Runs `steps` steps, sampling `batch_size` clips per step.
    pub fn train(
        &mut self,
        corpus: &[MotionSequence],
        steps: usize,
    ) -> Result<Vec<LossBreakdown>, PrqError> {
        if corpus.is_empty() {
            return Err(PrqError::BadConfig("empty corpus".into()));
        }
        let mut curve = Vec::with_capacity(steps);
        for _ in 0..steps {
            let batch: Vec<&MotionSequence> = (0..self.cfg.batch_size)
                .map(|_| &corpus[self.rng.gen_range(0..corpus.len())])
                .collect();
            curve.push(self.train_step(&batch)?);
        }
        Ok(curve)
    }

    /// One optimization step on a batch; clips are randomly cropped to a
    /// common multiple-of-alpha length (at most `crop_frames`).
    pub fn train_step(&mut self, batch: &[&MotionSequence]) -> Result<LossBreakdown, PrqError> {
        if batch.is_empty() {
            return Err(PrqError::BadConfig("empty batch".into()));
        }
        let min_t = batch.iter().map(|m| m.num_frames()).min().unwrap();
        if min_t < self.cfg.alpha {
            return Err(PrqError::TooShort { got: min_t, need: self.cfg.alpha });
        }
        let crop = (min_t / self.cfg.alpha * self.cfg.alpha).min(self.cfg.crop_frames);
        let n_batch = batch.len();

        // Assemble the part image (N, 71, 5, crop) and whole-frame targets.
        let mut img = vec![0.0; n_batch * PART_DIM * NUM_PARTS * crop];
        let mut whole = vec![0.0; n_batch * crop * FRAME_DIM];
        for (bi, m) in batch.iter().enumerate() {
            let start = self.rng.gen_range(0..=m.num_frames() - crop);
            let ps = split_parts(m);
            for t in 0..crop {
                whole[(bi * crop + t) * FRAME_DIM..(bi * crop + t + 1) * FRAME_DIM]
                    .copy_from_slice(m.frame(start + t));
                for p in 0..NUM_PARTS {
                    let src = ps.part_frame(start + t, p);
                    for f in 0..PART_DIM {
                        img[((bi * PART_DIM + f) * NUM_PARTS + p) * crop + t] = src[f];
                    }
                }
            }
        }

        let mut tape = Tape::new();
        let bp = BoundParams::bind(&mut tape, &self.params, true);
        let x = tape.input(Tensor::new(&[n_batch, PART_DIM, NUM_PARTS, crop], img)?, false);
        let z = encoder_forward(&mut tape, &bp, &self.cfg, x)?;

        // Greedy residual quantization of the latent image (off-tape).
        let (cumsums, assignments) = self.quantize_image(tape.value(z))?;

        // Commitment: beta * sum_k mean |z - cumsum_k|^2; z - cumsum_k = r^k.
        let mut commit: Option<NodeId> = None;
        for cs in &cumsums {
            let target = tape.constant(Tensor::new(tape.value(z).shape(), cs.clone())?);
            let term = tape.mse_loss(z, target)?;
            commit = Some(match commit {
                Some(acc) => tape.add(acc, term)?,
                None => term,
            });
        }
        let commit = commit.expect("layers >= 1");
        let commit_scaled = tape.mul_scalar(commit, self.cfg.beta);

        let quantized = Tensor::new(tape.value(z).shape(), cumsums.last().unwrap().clone())?;
        let st = tape.straight_through(z, quantized)?;
        let y = decoder_forward(&mut tape, &bp, &self.cfg, st)?;

        // Part term: one mean-L1 per part, summed.
        let mut part_term: Option<NodeId> = None;
        for p in 0..NUM_PARTS {
            let yp = tape.slice(y, 2, p, 1)?;
            let xp = tape.slice(x, 2, p, 1)?;
            let lp = tape.l1_loss(yp, xp)?;
            part_term = Some(match part_term {
                Some(acc) => tape.add(acc, lp)?,
                None => lp,
            });
        }
        let part_term = part_term.unwrap();

        // Whole-body term: reorder to (N*T, 355), merge to 197, mean-L1.
        let perm = tape.permute(y, &[0, 3, 2, 1])?;
        let flat = tape.reshape(perm, &[n_batch * crop, NUM_PARTS * PART_DIM])?;
        let merge = tape.constant(self.merge.clone());
        let merged = tape.matmul(flat, merge)?;
        let target = tape.constant(Tensor::new(&[n_batch * crop, FRAME_DIM], whole)?);
        let whole_term = tape.l1_loss(merged, target)?;

        let recon = tape.add(whole_term, part_term)?;
        let total = tape.add(recon, commit_scaled)?;

        for (id, name) in [
            (whole_term, "whole-body reconstruction"),
            (part_term, "part reconstruction"),
            (commit_scaled, "commitment"),
        ] {
            if !tape.value(id).item().is_finite() {
                return Err(PrqError::NonFiniteLoss(name));
            }
        }

        let breakdown = LossBreakdown {
            total: tape.value(total).item(),
            recon_whole: tape.value(whole_term).item(),
            recon_parts: tape.value(part_term).item(),
            commitment: tape.value(commit_scaled).item(),
        };

        tape.backward(total)?;
        let grads: Vec<Tensor> = bp
            .nodes()
            .iter()
            .zip(self.params.entries())
            .map(|(&id, (_, t))| tape.grad(id).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
            .collect();
        let grad_refs: Vec<&Tensor> = grads.iter().collect();
        let mut param_refs: Vec<&mut Tensor> =
            self.params.entries_mut().iter_mut().map(|(_, t)| t).collect();
        self.adam.step(&mut param_refs, &grad_refs)?;

        // Codebook maintenance from this step's assignments and latents.
        self.last_latents.clear();
        for (_, r) in &assignments {
            if self.last_latents.len() < self.cfg.d_z * 256 {
                self.last_latents.extend_from_slice(r);
            }
        }
        let refs: Vec<(usize, &[f64])> =
            assignments.iter().map(|(i, r)| (*i, r.as_slice())).collect();
        self.step += 1;
        self.codebook.ema_update(&refs, self.step);
        self.reset_dead_codes();
        Ok(breakdown)
    }

    /// Re-seeds codes unassigned for `dead_code_window` steps from the most
    /// recent batch's latents; returns the number reset.
    pub fn reset_dead_codes(&mut self) -> usize {
        self.codebook.reset_dead_codes(
            self.cfg.dead_code_window,
            self.step,
            &self.last_latents,
            &mut self.rng,
        )
    }

    /// Greedy RQ over every (sample, part, time) cell of a latent image
    /// (N, d_z, 5, n). Returns per-layer cumulative code sums in image layout
    /// and the (code, residual-input) assignment list for EMA updates.
    fn quantize_image(
        &self,
        z: &Tensor,
    ) -> Result<(Vec<Vec<f64>>, Vec<(usize, Vec<f64>)>), PrqError> {
        if self.codebook.size() == 0 {
            return Err(PrqError::EmptyCodebook);
        }
        let s = z.shape();
        let (nb, d, p, n) = (s[0], s[1], s[2], s[3]);
        let data = z.data();
        let layers = self.cfg.layers;
        let mut cumsums = vec![vec![0.0; data.len()]; layers];
        let mut assignments = Vec::with_capacity(nb * p * n * layers);
        let mut cell = vec![0.0; d];
        for b in 0..nb {
            for pi in 0..p {
                for t in 0..n {
                    for j in 0..d {
                        cell[j] = data[((b * d + j) * p + pi) * n + t];
                    }
                    let mut acc = vec![0.0; d];
                    for layer in 0..layers {
                        let idx = self.codebook.nearest(&cell);
                        assignments.push((idx, cell.clone()));
                        let code = self.codebook.code(idx);
                        for j in 0..d {
                            cell[j] -= code[j];
                            acc[j] += code[j];
                        }
                        let cs = &mut cumsums[layer];
                        for j in 0..d {
                            cs[((b * d + j) * p + pi) * n + t] = acc[j];
                        }
                    }
                }
            }
        }
        Ok((cumsums, assignments))
    }
}
