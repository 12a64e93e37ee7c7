//! Shared codebook with EMA updates and dead-code tracking.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::PrqError;

pub const EMA_DECAY: f64 = 0.99;
pub const LAPLACE_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Codebook {
    size: usize,
    dim: usize,
    codes: Vec<f64>, // size x dim, row-major
    ema_count: Vec<f64>,
    ema_sum: Vec<f64>,
    last_used: Vec<u64>, // training step of the most recent assignment
}

impl Codebook {
    pub fn new_random(size: usize, dim: usize, seed: u64) -> Codebook {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let codes: Vec<f64> = (0..size * dim).map(|_| rng.gen_range(-0.1..0.1)).collect();
        Codebook {
            size,
            dim,
            ema_count: vec![1.0; size],
            ema_sum: codes.clone(),
            codes,
            last_used: vec![0; size],
        }
    }

    pub fn from_codes(codes: Vec<f64>, dim: usize) -> Result<Codebook, PrqError> {
        if codes.is_empty() || dim == 0 || codes.len() % dim != 0 {
            return Err(PrqError::EmptyCodebook);
        }
        let size = codes.len() / dim;
        Ok(Codebook {
            size,
            dim,
            ema_count: vec![1.0; size],
            ema_sum: codes.clone(),
            codes,
            last_used: vec![0; size],
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn code(&self, i: usize) -> &[f64] {
        &self.codes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn codes(&self) -> &[f64] {
        &self.codes
    }

    /// Exhaustive nearest code by squared L2 distance; ties go to the lowest
    /// index (strict `<` keeps the earliest minimum).
    pub fn nearest(&self, v: &[f64]) -> usize {
        debug_assert_eq!(v.len(), self.dim);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for i in 0..self.size {
            let row = self.code(i);
            // Four independent accumulators expose instruction-level
            // parallelism; this loop dominates tokenizer training time.
            let mut acc = [0.0f64; 4];
            let mut chunks_v = v.chunks_exact(4);
            let mut chunks_r = row.chunks_exact(4);
            for (cv, cr) in (&mut chunks_v).zip(&mut chunks_r) {
                for k in 0..4 {
                    let t = cv[k] - cr[k];
                    acc[k] += t * t;
                }
            }
            let mut d = (acc[0] + acc[1]) + (acc[2] + acc[3]);
            for (a, b) in chunks_v.remainder().iter().zip(chunks_r.remainder()) {
                let t = a - b;
                d += t * t;
            }
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// One EMA update from a batch of (code index, assigned vector) pairs.
    /// `step` stamps usage for dead-code detection.
    pub fn ema_update(&mut self, assignments: &[(usize, &[f64])], step: u64) {
        let mut count = vec![0.0; self.size];
        let mut sum = vec![0.0; self.size * self.dim];
        for &(idx, v) in assignments {
            count[idx] += 1.0;
            for (s, &x) in sum[idx * self.dim..(idx + 1) * self.dim].iter_mut().zip(v) {
                *s += x;
            }
            self.last_used[idx] = step;
        }
        for i in 0..self.size {
            self.ema_count[i] = EMA_DECAY * self.ema_count[i] + (1.0 - EMA_DECAY) * count[i];
        }
        for (e, s) in self.ema_sum.iter_mut().zip(&sum) {
            *e = EMA_DECAY * *e + (1.0 - EMA_DECAY) * s;
        }
        let total: f64 = self.ema_count.iter().sum();
        for i in 0..self.size {
            // Laplace smoothing keeps the divisor positive for unused codes.
            let n = (self.ema_count[i] + LAPLACE_EPS) / (total + self.size as f64 * LAPLACE_EPS)
                * total;
            for (c, s) in self.codes[i * self.dim..(i + 1) * self.dim]
                .iter_mut()
                .zip(&self.ema_sum[i * self.dim..(i + 1) * self.dim])
            {
                *c = s / n;
            }
        }
    }

    /// Reinitializes codes unused for `window` steps to vectors drawn from
    /// `pool` (rows of length dim, typically the last batch's latents).
    /// Returns how many codes were reset.
    pub fn reset_dead_codes(
        &mut self,
        window: u64,
        step: u64,
        pool: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let rows = pool.len() / self.dim;
        if rows == 0 {
            return 0;
        }
        let mut reset = 0;
        for i in 0..self.size {
            if step.saturating_sub(self.last_used[i]) < window {
                continue;
            }
            let r = rng.gen_range(0..rows);
            let src = &pool[r * self.dim..(r + 1) * self.dim];
            self.codes[i * self.dim..(i + 1) * self.dim].copy_from_slice(src);
            self.ema_sum[i * self.dim..(i + 1) * self.dim].copy_from_slice(src);
            self.ema_count[i] = 1.0;
            self.last_used[i] = step;
            reset += 1;
        }
        reset
    }

    pub fn is_finite(&self) -> bool {
        self.codes.iter().all(|v| v.is_finite())
    }
}
