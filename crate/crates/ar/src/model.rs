//! Decoder-only transformer over the template token stream.

use motok_autodiff::checkpoint::{load_checkpoint, save_checkpoint};
use motok_autodiff::{NodeId, Tape, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use crate::ArError;

pub const LN_EPS: f64 = 1e-5;
const NEG_INF: f64 = -1e30;

#[derive(Debug, Clone)]
pub struct ArConfig {
    pub layers: usize,
    pub width: usize,
    pub heads: usize,
    pub context: usize,
    pub lr: f64,
    pub steps: usize,
}

impl Default for ArConfig {
    fn default() -> ArConfig {
        ArConfig { layers: 4, width: 256, heads: 4, context: 512, lr: 3e-4, steps: 500 }
    }
}

impl ArConfig {
    pub fn validate(&self) -> Result<(), ArError> {
        if self.width % self.heads != 0 {
            return Err(ArError::BadConfig(format!(
                "width {} not divisible by heads {}",
                self.width, self.heads
            )));
        }
        if self.layers == 0 || self.context == 0 {
            return Err(ArError::BadConfig("layers and context must be >= 1".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.width / self.heads
    }
}

#[derive(Debug, Clone)]
pub struct ArParams {
    entries: Vec<(String, Tensor)>,
}

impl ArParams {
    pub fn init(cfg: &ArConfig, vocab_size: usize, rng: &mut ChaCha8Rng) -> ArParams {
        let w = cfg.width;
        let mut entries = Vec::new();
        let randn = |shape: &[usize], std: f64, rng: &mut ChaCha8Rng| {
            let n: usize = shape.iter().product();
            Tensor::new(&shape.to_vec(), (0..n).map(|_| gauss(rng) * std).collect()).unwrap()
        };
        entries.push(("tok_emb".into(), randn(&[vocab_size, w], 0.02, rng)));
        entries.push(("pos_emb".into(), randn(&[cfg.context, w], 0.02, rng)));
        for i in 0..cfg.layers {
            for name in ["wq", "wk", "wv", "wo"] {
                entries.push((format!("l{i}.{name}"), randn(&[w, w], 0.02, rng)));
                entries.push((format!("l{i}.{name}.b"), Tensor::zeros(&[w])));
            }
            entries.push((format!("l{i}.ln1.g"), ones(&[w])));
            entries.push((format!("l{i}.ln1.b"), Tensor::zeros(&[w])));
            entries.push((format!("l{i}.ln2.g"), ones(&[w])));
            entries.push((format!("l{i}.ln2.b"), Tensor::zeros(&[w])));
            entries.push((format!("l{i}.ff1"), randn(&[w, 4 * w], 0.02, rng)));
            entries.push((format!("l{i}.ff1.b"), Tensor::zeros(&[4 * w])));
            entries.push((format!("l{i}.ff2"), randn(&[4 * w, w], 0.02, rng)));
            entries.push((format!("l{i}.ff2.b"), Tensor::zeros(&[w])));
        }
        entries.push(("ln_f.g".into(), ones(&[w])));
        entries.push(("ln_f.b".into(), Tensor::zeros(&[w])));
        entries.push(("out.w".into(), randn(&[w, vocab_size], 0.02, rng)));
        entries.push(("out.b".into(), Tensor::zeros(&[vocab_size])));
        ArParams { entries }
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [(String, Tensor)] {
        &mut self.entries
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self
            .entries
            .iter()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
            .1
    }

    pub fn vocab_size(&self) -> usize {
        self.get("tok_emb").shape()[0]
    }

    pub fn save(&self, path: &Path) -> Result<(), ArError> {
        let refs: Vec<(&str, &Tensor)> =
            self.entries.iter().map(|(n, t)| (n.as_str(), t)).collect();
        save_checkpoint(path, &refs)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ArParams, ArError> {
        Ok(ArParams { entries: load_checkpoint(path)? })
    }
}

fn ones(shape: &[usize]) -> Tensor {
    Tensor::new(shape, vec![1.0; shape.iter().product()]).unwrap()
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub struct BoundAr {
    names: Vec<String>,
    nodes: Vec<NodeId>,
}

impl BoundAr {
    pub fn bind(tape: &mut Tape, params: &ArParams, requires_grad: bool) -> BoundAr {
        let mut names = Vec::new();
        let mut nodes = Vec::new();
        for (n, t) in params.entries() {
            names.push(n.clone());
            nodes.push(tape.input(t.clone(), requires_grad));
        }
        BoundAr { names, nodes }
    }

    pub fn node(&self, name: &str) -> NodeId {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"));
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }
}

/// Full-sequence forward pass: token ids -> logits (T, V).
pub fn forward_logits(
    tape: &mut Tape,
    bp: &BoundAr,
    cfg: &ArConfig,
    ids: &[usize],
) -> Result<NodeId, ArError> {
    let t_len = ids.len();
    if t_len == 0 || t_len > cfg.context {
        return Err(ArError::BadConfig(format!(
            "sequence length {t_len} outside 1..={}",
            cfg.context
        )));
    }
    let (w, h, dh) = (cfg.width, cfg.heads, cfg.head_dim());
    let emb = tape.embedding(bp.node("tok_emb"), ids)?;
    let pos = tape.slice(bp.node("pos_emb"), 0, 0, t_len)?;
    let mut x = tape.add(emb, pos)?;

    // Causal mask shared by every layer.
    let mut mask = vec![0.0; h * t_len * t_len];
    for head in 0..h {
        for i in 0..t_len {
            for j in i + 1..t_len {
                mask[(head * t_len + i) * t_len + j] = NEG_INF;
            }
        }
    }
    let mask = tape.constant(Tensor::new(&[h, t_len, t_len], mask)?);

    for i in 0..cfg.layers {
        let ln1 = tape.layer_norm(
            x,
            bp.node(&format!("l{i}.ln1.g")),
            bp.node(&format!("l{i}.ln1.b")),
            LN_EPS,
        )?;
        let mut heads_in = Vec::new();
        for name in ["wq", "wk", "wv"] {
            let p = tape.matmul(ln1, bp.node(&format!("l{i}.{name}")))?;
            let p = tape.bias(p, bp.node(&format!("l{i}.{name}.b")), 1)?;
            let p = tape.reshape(p, &[t_len, h, dh])?;
            heads_in.push(tape.permute(p, &[1, 0, 2])?);
        }
        let (q, k, v) = (heads_in[0], heads_in[1], heads_in[2]);
        let kt = tape.transpose(k)?;
        let att = tape.matmul(q, kt)?;
        let att = tape.mul_scalar(att, 1.0 / (dh as f64).sqrt());
        let att = tape.add(att, mask)?;
        let att = tape.softmax(att);
        let o = tape.matmul(att, v)?;
        let o = tape.permute(o, &[1, 0, 2])?;
        let o = tape.reshape(o, &[t_len, w])?;
        let o = tape.matmul(o, bp.node(&format!("l{i}.wo")))?;
        let o = tape.bias(o, bp.node(&format!("l{i}.wo.b")), 1)?;
        x = tape.add(x, o)?;

        let ln2 = tape.layer_norm(
            x,
            bp.node(&format!("l{i}.ln2.g")),
            bp.node(&format!("l{i}.ln2.b")),
            LN_EPS,
        )?;
        let f = tape.matmul(ln2, bp.node(&format!("l{i}.ff1")))?;
        let f = tape.bias(f, bp.node(&format!("l{i}.ff1.b")), 1)?;
        let f = tape.relu(f);
        let f = tape.matmul(f, bp.node(&format!("l{i}.ff2")))?;
        let f = tape.bias(f, bp.node(&format!("l{i}.ff2.b")), 1)?;
        x = tape.add(x, f)?;
    }
    let xf = tape.layer_norm(x, bp.node("ln_f.g"), bp.node("ln_f.b"), LN_EPS)?;
    let logits = tape.matmul(xf, bp.node("out.w"))?;
    Ok(tape.bias(logits, bp.node("out.b"), 1)?)
}

/// Mean token-level negative log-likelihood over unmasked (>= 0) targets.
pub fn nll_loss(tape: &mut Tape, logits: NodeId, targets: &[i64]) -> Result<NodeId, ArError> {
    Ok(tape.softmax_cross_entropy(logits, targets)?)
}

/// Next-token targets for a full sequence: position t predicts ids[t+1], but
/// only positions whose predicted token lies at or after `answer_start` carry
/// loss; everything earlier (the description prefix) is masked with -1.
pub fn next_token_targets(ids: &[usize], answer_start: usize) -> Vec<i64> {
    let mut targets = vec![-1i64; ids.len()];
    for t in 0..ids.len().saturating_sub(1) {
        if t + 1 >= answer_start {
            targets[t] = ids[t + 1] as i64;
        }
    }
    targets
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tiny() -> ArConfig {
        ArConfig { layers: 1, width: 16, heads: 2, context: 32, ..ArConfig::default() }
    }

    #[test]
    fn logits_shape_and_finiteness() {
        let cfg = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = ArParams::init(&cfg, 20, &mut rng);
        let mut tape = Tape::new();
        let bp = BoundAr::bind(&mut tape, &params, false);
        let logits = forward_logits(&mut tape, &bp, &cfg, &[0, 5, 7, 1]).unwrap();
        assert_eq!(tape.value(logits).shape(), &[4, 20]);
        assert!(tape.value(logits).is_finite());
    }

    #[test]
    fn causal_mask_blocks_future_influence() {
        let cfg = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = ArParams::init(&cfg, 20, &mut rng);
        let run = |ids: &[usize]| {
            let mut tape = Tape::new();
            let bp = BoundAr::bind(&mut tape, &params, false);
            let l = forward_logits(&mut tape, &bp, &cfg, ids).unwrap();
            tape.value(l).data().to_vec()
        };
        let a = run(&[3, 4, 5, 6]);
        let b = run(&[3, 4, 5, 19]);
        // Rows 0..3 predict from prefixes that are identical in both inputs.
        assert_eq!(&a[..3 * 20], &b[..3 * 20]);
        assert_ne!(&a[3 * 20..], &b[3 * 20..]);
    }

    #[test]
    fn nll_matches_per_position_log_softmax_oracle() {
        let cfg = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = ArParams::init(&cfg, 12, &mut rng);
        let ids = [0usize, 4, 7, 9, 1];
        let targets = next_token_targets(&ids, 2);
        let mut tape = Tape::new();
        let bp = BoundAr::bind(&mut tape, &params, false);
        let logits = forward_logits(&mut tape, &bp, &cfg, &ids).unwrap();
        let loss = nll_loss(&mut tape, logits, &targets).unwrap();
        // Oracle: mean of -log softmax at the target coordinates.
        let lv = tape.value(logits).data();
        let mut total = 0.0;
        let mut count = 0;
        for (t, &tgt) in targets.iter().enumerate() {
            if tgt < 0 {
                continue;
            }
            let row = &lv[t * 12..(t + 1) * 12];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|x| (x - m).exp()).sum::<f64>().ln() + m;
            total += lse - row[tgt as usize];
            count += 1;
        }
        assert!((tape.value(loss).item() - total / count as f64).abs() <= 1e-9);
    }

    #[test]
    fn desc_permutation_keeps_target_accounting() {
        // Swapping two description tokens changes conditioning only; the set
        // of positions carrying loss is unchanged.
        let ids_a = [0usize, 5, 6, 3, 8, 4, 1];
        let ids_b = [0usize, 6, 5, 3, 8, 4, 1];
        let ta = next_token_targets(&ids_a, 3);
        let tb = next_token_targets(&ids_b, 3);
        assert_eq!(ta, tb);
        assert_eq!(ta.iter().filter(|&&t| t >= 0).count(), 4);
    }
}
