//! Encoder/decoder parameters and tape-graph builders.
//!
//! The motion is treated as an image: features (71) are channels, parts (5)
//! the height, time the width. Downsampling blocks stride only the time axis,
//! so the part axis survives into the latent grid; the decoder mirrors each
//! strided block with nearest-neighbor x2 time upsampling.

use motok_autodiff::checkpoint::{load_checkpoint, save_checkpoint};
use motok_autodiff::{NodeId, Tape, Tensor};
use motok_core::skeleton::{FRAME_DIM, NUM_PARTS, PART_DIM};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use crate::train::TokenizerConfig;
use crate::PrqError;

#[derive(Debug, Clone)]
pub struct ModelParams {
    entries: Vec<(String, Tensor)>,
}

impl ModelParams {
    pub fn get(&self, name: &str) -> &Tensor {
        &self
            .entries
            .iter()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
            .1
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [(String, Tensor)] {
        &mut self.entries
    }

    pub fn set(&mut self, name: &str, t: Tensor) {
        let slot = self
            .entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"));
        assert_eq!(slot.1.shape(), t.shape(), "shape change for {name}");
        slot.1 = t;
    }

    pub fn save(&self, path: &Path) -> Result<(), PrqError> {
        let refs: Vec<(&str, &Tensor)> =
            self.entries.iter().map(|(n, t)| (n.as_str(), t)).collect();
        save_checkpoint(path, &refs)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelParams, PrqError> {
        Ok(ModelParams { entries: load_checkpoint(path)? })
    }

    /// He-initialized parameters for the given config.
    pub fn init(cfg: &TokenizerConfig, rng: &mut ChaCha8Rng) -> ModelParams {
        let c = cfg.channels;
        let mut entries = Vec::new();
        let conv = |name: String, cout: usize, cin: usize, kh: usize, kw: usize,
                        rng: &mut ChaCha8Rng| {
            let fan_in = (cin * kh * kw) as f64;
            let std = (2.0 / fan_in).sqrt();
            let data: Vec<f64> =
                (0..cout * cin * kh * kw).map(|_| gauss(rng) * std).collect();
            (name.clone(), Tensor::new(&[cout, cin, kh, kw], data).unwrap(), Tensor::zeros(&[cout]))
        };
        let push_conv = |entries: &mut Vec<(String, Tensor)>,
                             name: &str,
                             cout: usize,
                             cin: usize,
                             kh: usize,
                             kw: usize,
                             rng: &mut ChaCha8Rng| {
            let (n, w, b) = conv(name.to_string(), cout, cin, kh, kw, rng);
            entries.push((format!("{n}.w"), w));
            entries.push((format!("{n}.b"), b));
        };
        push_conv(&mut entries, "enc.in", c, PART_DIM, 3, 3, rng);
        for i in 0..cfg.num_blocks() {
            push_conv(&mut entries, &format!("enc.blk{i}.c1"), c, c, 3, 3, rng);
            push_conv(&mut entries, &format!("enc.blk{i}.c2"), c, c, 3, 3, rng);
            push_conv(&mut entries, &format!("enc.blk{i}.skip"), c, c, 1, 1, rng);
        }
        push_conv(&mut entries, "enc.out", cfg.d_z, c, 1, 1, rng);
        push_conv(&mut entries, "dec.in", c, cfg.d_z, 1, 1, rng);
        for i in 0..cfg.num_blocks() {
            push_conv(&mut entries, &format!("dec.blk{i}.c1"), c, c, 3, 3, rng);
            push_conv(&mut entries, &format!("dec.blk{i}.c2"), c, c, 3, 3, rng);
            push_conv(&mut entries, &format!("dec.blk{i}.skip"), c, c, 1, 1, rng);
        }
        push_conv(&mut entries, "dec.out", PART_DIM, c, 3, 3, rng);
        ModelParams { entries }
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller from two uniforms.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Parameters bound to tape nodes for one forward/backward pass.
pub struct BoundParams {
    names: Vec<String>,
    nodes: Vec<NodeId>,
}

impl BoundParams {
    pub fn bind(tape: &mut Tape, params: &ModelParams, requires_grad: bool) -> BoundParams {
        let mut names = Vec::new();
        let mut nodes = Vec::new();
        for (n, t) in params.entries() {
            names.push(n.clone());
            nodes.push(tape.input(t.clone(), requires_grad));
        }
        BoundParams { names, nodes }
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

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

fn conv_block(
    tape: &mut Tape,
    bp: &BoundParams,
    prefix: &str,
    x: NodeId,
    stride: (usize, usize),
) -> Result<NodeId, PrqError> {
    let c1 = tape.conv2d(x, bp.node(&format!("{prefix}.c1.w")), stride, (1, 1))?;
    let c1 = tape.bias(c1, bp.node(&format!("{prefix}.c1.b")), 1)?;
    let a = tape.relu(c1);
    let c2 = tape.conv2d(a, bp.node(&format!("{prefix}.c2.w")), (1, 1), (1, 1))?;
    let c2 = tape.bias(c2, bp.node(&format!("{prefix}.c2.b")), 1)?;
    let s = tape.conv2d(x, bp.node(&format!("{prefix}.skip.w")), stride, (0, 0))?;
    let s = tape.bias(s, bp.node(&format!("{prefix}.skip.b")), 1)?;
    let sum = tape.add(c2, s)?;
    Ok(tape.relu(sum))
}

/// x: (N, 71, 5, T) -> latents (N, d_z, 5, T / alpha).
pub fn encoder_forward(
    tape: &mut Tape,
    bp: &BoundParams,
    cfg: &TokenizerConfig,
    x: NodeId,
) -> Result<NodeId, PrqError> {
    let h = tape.conv2d(x, bp.node("enc.in.w"), (1, 1), (1, 1))?;
    let h = tape.bias(h, bp.node("enc.in.b"), 1)?;
    let mut h = tape.relu(h);
    for i in 0..cfg.num_blocks() {
        h = conv_block(tape, bp, &format!("enc.blk{i}"), h, (1, 2))?;
    }
    let z = tape.conv2d(h, bp.node("enc.out.w"), (1, 1), (0, 0))?;
    Ok(tape.bias(z, bp.node("enc.out.b"), 1)?)
}

/// q: (N, d_z, 5, n) -> part features (N, 71, 5, n * alpha).
pub fn decoder_forward(
    tape: &mut Tape,
    bp: &BoundParams,
    cfg: &TokenizerConfig,
    q: NodeId,
) -> Result<NodeId, PrqError> {
    let h = tape.conv2d(q, bp.node("dec.in.w"), (1, 1), (0, 0))?;
    let h = tape.bias(h, bp.node("dec.in.b"), 1)?;
    let mut h = tape.relu(h);
    for i in 0..cfg.num_blocks() {
        let u = tape.upsample2x_w(h)?;
        h = conv_block_no_stride(tape, bp, &format!("dec.blk{i}"), u)?;
    }
    let y = tape.conv2d(h, bp.node("dec.out.w"), (1, 1), (1, 1))?;
    Ok(tape.bias(y, bp.node("dec.out.b"), 1)?)
}

fn conv_block_no_stride(
    tape: &mut Tape,
    bp: &BoundParams,
    prefix: &str,
    x: NodeId,
) -> Result<NodeId, PrqError> {
    conv_block(tape, bp, prefix, x, (1, 1))
}

/// The linear map taking a concatenated 5x71 part frame to a merged 197-dim
/// whole frame, probed column-by-column from the mean-merge in motok-core.
pub fn merge_matrix() -> Tensor {
    let cols = NUM_PARTS * PART_DIM;
    let mut data = vec![0.0; cols * FRAME_DIM];
    let mut basis = vec![0.0; cols];
    for j in 0..cols {
        basis[j] = 1.0;
        let merged = motok_core::merge_parts_raw(&basis, 1, 1.0).expect("basis frame");
        for (k, &v) in merged.iter().enumerate() {
            data[j * FRAME_DIM + k] = v;
        }
        basis[j] = 0.0;
    }
    Tensor::new(&[cols, FRAME_DIM], data).unwrap()
}
