//! Greedy residual quantization against a shared codebook.

use motok_core::skeleton::NUM_PARTS;

use crate::codebook::Codebook;
use crate::PrqError;

/// p x n x d_z latent tensor produced by the encoder (p = 5 parts,
/// n = downsampled time).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    pub parts: usize,
    pub steps: usize,
    pub dim: usize,
    pub data: Vec<f64>, // [part][step][dim]
}

impl LatentGrid {
    pub fn new(parts: usize, steps: usize, dim: usize, data: Vec<f64>) -> Result<LatentGrid, PrqError> {
        if parts != NUM_PARTS || steps == 0 || data.len() != parts * steps * dim {
            return Err(PrqError::BadConfig(format!(
                "latent grid {parts}x{steps}x{dim} vs {} values",
                data.len()
            )));
        }
        Ok(LatentGrid { parts, steps, dim, data })
    }

    pub fn cell(&self, part: usize, step: usize) -> &[f64] {
        let o = (part * self.steps + step) * self.dim;
        &self.data[o..o + self.dim]
    }
}

/// n x p x L grid of codebook indices; layer innermost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenGrid {
    pub steps: usize,
    pub parts: usize,
    pub layers: usize,
    pub codebook_size: usize,
    pub indices: Vec<u16>, // [step][part][layer]
}

impl TokenGrid {
    pub fn new(
        steps: usize,
        parts: usize,
        layers: usize,
        codebook_size: usize,
        indices: Vec<u16>,
    ) -> Result<TokenGrid, PrqError> {
        if indices.len() != steps * parts * layers {
            return Err(PrqError::BadFile(format!(
                "token grid {steps}x{parts}x{layers} vs {} indices",
                indices.len()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i as usize >= codebook_size) {
            return Err(PrqError::IndexOutOfRange { index: bad as usize, size: codebook_size });
        }
        Ok(TokenGrid { steps, parts, layers, codebook_size, indices })
    }

    pub fn token(&self, step: usize, part: usize, layer: usize) -> u16 {
        self.indices[(step * self.parts + part) * self.layers + layer]
    }
}

/// Greedy per-layer nearest-code subtraction. Returns the token grid, the
/// sum-of-codes approximation of `z`, and the mean residual L2 norm after
/// each layer.
pub fn rq_quantize(
    z: &LatentGrid,
    cb: &Codebook,
    layers: usize,
) -> Result<(TokenGrid, LatentGrid, Vec<f64>), PrqError> {
    if cb.size() == 0 {
        return Err(PrqError::EmptyCodebook);
    }
    if cb.dim() != z.dim || layers == 0 {
        return Err(PrqError::BadConfig(format!(
            "codebook dim {} vs latent dim {}, layers {layers}",
            cb.dim(),
            z.dim
        )));
    }
    let cells = z.parts * z.steps;
    let mut indices = vec![0u16; z.steps * z.parts * layers];
    let mut quantized = vec![0.0; z.data.len()];
    let mut norm_acc = vec![0.0; layers];
    let mut residual = vec![0.0; z.dim];
    for part in 0..z.parts {
        for step in 0..z.steps {
            residual.copy_from_slice(z.cell(part, step));
            for layer in 0..layers {
                let idx = cb.nearest(&residual);
                indices[(step * z.parts + part) * layers + layer] = idx as u16;
                let code = cb.code(idx);
                let base = (part * z.steps + step) * z.dim;
                let mut norm2 = 0.0;
                for j in 0..z.dim {
                    residual[j] -= code[j];
                    quantized[base + j] += code[j];
                    norm2 += residual[j] * residual[j];
                }
                norm_acc[layer] += norm2.sqrt();
            }
        }
    }
    let tokens = TokenGrid::new(z.steps, z.parts, layers, cb.size(), indices)?;
    let q = LatentGrid::new(z.parts, z.steps, z.dim, quantized)?;
    let norms: Vec<f64> = norm_acc.iter().map(|s| s / cells as f64).collect();
    Ok((tokens, q, norms))
}

/// Sum of the codes a token grid selects, as a latent grid.
pub fn dequantize(tokens: &TokenGrid, cb: &Codebook) -> Result<LatentGrid, PrqError> {
    let mut data = vec![0.0; tokens.parts * tokens.steps * cb.dim()];
    for step in 0..tokens.steps {
        for part in 0..tokens.parts {
            let base = (part * tokens.steps + step) * cb.dim();
            for layer in 0..tokens.layers {
                let idx = tokens.token(step, part, layer) as usize;
                if idx >= cb.size() {
                    return Err(PrqError::IndexOutOfRange { index: idx, size: cb.size() });
                }
                for (d, c) in data[base..base + cb.dim()].iter_mut().zip(cb.code(idx)) {
                    *d += c;
                }
            }
        }
    }
    LatentGrid::new(tokens.parts, tokens.steps, cb.dim(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid_from_cell(cell: &[f64]) -> LatentGrid {
        let mut data = Vec::new();
        for _ in 0..NUM_PARTS {
            data.extend_from_slice(cell);
        }
        LatentGrid::new(NUM_PARTS, 1, cell.len(), data).unwrap()
    }

    #[test]
    fn exact_code_match_gives_zero_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dim = 8;
        let codes: Vec<f64> = (0..32 * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cb = Codebook::from_codes(codes, dim).unwrap();
        let z = grid_from_cell(cb.code(17));
        let (tokens, q, norms) = rq_quantize(&z, &cb, 1).unwrap();
        assert!(tokens.indices.iter().all(|&i| i == 17));
        assert_eq!(q.data, z.data);
        assert!(norms[0] < 1e-12);
    }

    #[test]
    fn two_layer_sum_recovered_when_greedy_holds() {
        // Codebook: c_a = (10, 0), c_b = (0, 1), plus a decoy far away.
        // z = c_a + c_b; c_a is nearest to z, and c_b nearest to z - c_a.
        let cb = Codebook::from_codes(vec![10.0, 0.0, 0.0, 1.0, -50.0, -50.0], 2).unwrap();
        let z = grid_from_cell(&[10.0, 1.0]);
        let (tokens, q, norms) = rq_quantize(&z, &cb, 2).unwrap();
        assert_eq!(tokens.token(0, 0, 0), 0);
        assert_eq!(tokens.token(0, 0, 1), 1);
        assert_eq!(q.data, z.data);
        assert!(norms[1] < 1e-12);
    }

    #[test]
    fn greedy_selection_matches_brute_force_per_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dim = 6;
        let k = 48;
        let codes: Vec<f64> = (0..k * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cb = Codebook::from_codes(codes, dim).unwrap();
        for _ in 0..50 {
            let cell: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let z = grid_from_cell(&cell);
            let layers = 3;
            let (tokens, _, norms) = rq_quantize(&z, &cb, layers).unwrap();
            // Independent replay: brute-force argmin at every layer.
            let mut r = cell.clone();
            for layer in 0..layers {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for i in 0..k {
                    let d: f64 =
                        r.iter().zip(cb.code(i)).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                assert_eq!(tokens.token(0, 0, layer) as usize, best);
                for (x, c) in r.iter_mut().zip(cb.code(best)) {
                    *x -= c;
                }
            }
            // The final residual norm matches the minimum found greedily.
            let norm: f64 = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norms[layers - 1] - norm).abs() < 1e-12);
        }
    }

    #[test]
    fn more_layers_never_increase_approximation_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dim = 5;
        let mut codes: Vec<f64> = (0..40 * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // A zero code guarantees each layer can at worst leave the residual
        // unchanged, making the error monotone in the number of layers.
        codes[..dim].fill(0.0);
        let cb = Codebook::from_codes(codes, dim).unwrap();
        let cell: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let z = grid_from_cell(&cell);
        let mut prev = f64::INFINITY;
        for layers in 1..=6 {
            let (_, q, _) = rq_quantize(&z, &cb, layers).unwrap();
            let err: f64 = z
                .data
                .iter()
                .zip(&q.data)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(err <= prev + 1e-12, "error grew at L={layers}: {err} > {prev}");
            prev = err;
        }
    }

    #[test]
    fn dequantize_matches_quantized_latents() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dim = 7;
        let codes: Vec<f64> = (0..16 * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cb = Codebook::from_codes(codes, dim).unwrap();
        let data: Vec<f64> =
            (0..NUM_PARTS * 3 * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z = LatentGrid::new(NUM_PARTS, 3, dim, data).unwrap();
        let (tokens, q, _) = rq_quantize(&z, &cb, 4).unwrap();
        let dq = dequantize(&tokens, &cb).unwrap();
        for (a, b) in q.data.iter().zip(&dq.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range_token() {
        assert!(matches!(
            TokenGrid::new(1, 1, 1, 4, vec![4]),
            Err(PrqError::IndexOutOfRange { index: 4, size: 4 })
        ));
    }
}
