//! Grammar-constrained decoding with a per-layer KV cache.

use motok_prq::TokenGrid;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{ArConfig, ArParams, LN_EPS};
use crate::template::deserialize_tokens;
use crate::vocab::{self, Vocab};
use crate::ArError;

#[derive(Debug, Clone, Copy)]
pub enum Sampling {
    Greedy,
    TopK { k: usize, seed: u64 },
}

/// Template automaton. Part 1 fixes the step count n; parts 2..5 must match
/// it exactly, so any accepted stream deserializes.
enum GState {
    ExpectMot,
    ExpectPartOpen(usize),
    InPart { part: usize, count: usize },
    ExpectMotClose,
    Done,
}

struct Grammar {
    layers: usize,
    /// Codes per part once part 1 closes.
    quota: Option<usize>,
    /// Upper bound on codes per part so the template fits the context.
    max_quota: usize,
    state: GState,
}

impl Grammar {
    fn new(layers: usize, prompt_len: usize, context: usize) -> Result<Grammar, ArError> {
        // Total emission is 2 + 5*(2 + n*layers) tokens after the prompt.
        let budget = context.saturating_sub(prompt_len + 12);
        let max_n = budget / (5 * layers);
        if max_n == 0 {
            return Err(ArError::MaxLengthExceeded);
        }
        Ok(Grammar {
            layers,
            quota: None,
            max_quota: max_n * layers,
            state: GState::ExpectMot,
        })
    }

    /// Token ids the grammar currently admits.
    fn allowed(&self, v: &Vocab) -> Vec<usize> {
        match &self.state {
            GState::ExpectMot => vec![vocab::MOT_OPEN],
            GState::ExpectPartOpen(p) => vec![vocab::PART_OPEN[*p]],
            GState::InPart { part, count } => {
                let mut ids = Vec::new();
                match self.quota {
                    // Part 1 sets the step count: any positive multiple of
                    // `layers` codes, capped so the remaining parts still fit.
                    None => {
                        if *count < self.max_quota {
                            ids.extend((0..v.k_c()).map(|c| v.motion_id(c)));
                        }
                        if *count > 0 && count % self.layers == 0 {
                            ids.push(vocab::PART_CLOSE[*part]);
                        }
                    }
                    // Later parts must emit exactly the same number of codes.
                    Some(quota) => {
                        if *count < quota {
                            ids.extend((0..v.k_c()).map(|c| v.motion_id(c)));
                        } else {
                            ids.push(vocab::PART_CLOSE[*part]);
                        }
                    }
                }
                ids
            }
            GState::ExpectMotClose => vec![vocab::MOT_CLOSE],
            GState::Done => vec![],
        }
    }

    fn advance(&mut self, id: usize, v: &Vocab) {
        self.state = match std::mem::replace(&mut self.state, GState::Done) {
            GState::ExpectMot => GState::ExpectPartOpen(0),
            GState::ExpectPartOpen(p) => GState::InPart { part: p, count: 0 },
            GState::InPart { part, count } => {
                if id == vocab::PART_CLOSE[part] {
                    if part == 0 {
                        self.quota = Some(count);
                    }
                    if part == 4 {
                        GState::ExpectMotClose
                    } else {
                        GState::ExpectPartOpen(part + 1)
                    }
                } else {
                    debug_assert!(v.motion_code(id).is_some());
                    GState::InPart { part, count: count + 1 }
                }
            }
            GState::ExpectMotClose => GState::Done,
            GState::Done => GState::Done,
        };
    }

    fn done(&self) -> bool {
        matches!(self.state, GState::Done)
    }
}

/// Autoregressive transformer state for incremental decoding. The math
/// mirrors the tape forward pass one position at a time.
struct Decoder<'a> {
    params: &'a ArParams,
    cfg: &'a ArConfig,
    /// Per layer, cached keys and values, each a flat (t, width) buffer.
    keys: Vec<Vec<f64>>,
    vals: Vec<Vec<f64>>,
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(params: &'a ArParams, cfg: &'a ArConfig) -> Decoder<'a> {
        Decoder {
            params,
            cfg,
            keys: vec![Vec::new(); cfg.layers],
            vals: vec![Vec::new(); cfg.layers],
            pos: 0,
        }
    }

    /// Feeds one token and returns next-token logits.
    fn step(&mut self, id: usize) -> Result<Vec<f64>, ArError> {
        let (w, h, dh) = (self.cfg.width, self.cfg.heads, self.cfg.head_dim());
        if self.pos >= self.cfg.context {
            return Err(ArError::MaxLengthExceeded);
        }
        let tok = self.params.get("tok_emb");
        let pos_emb = self.params.get("pos_emb");
        let mut x: Vec<f64> = (0..w)
            .map(|j| tok.data()[id * w + j] + pos_emb.data()[self.pos * w + j])
            .collect();
        for i in 0..self.cfg.layers {
            let ln1 = layer_norm(
                &x,
                self.params.get(&format!("l{i}.ln1.g")).data(),
                self.params.get(&format!("l{i}.ln1.b")).data(),
            );
            let q = affine(&ln1, self.params.get(&format!("l{i}.wq")).data(),
                self.params.get(&format!("l{i}.wq.b")).data(), w, w);
            let k = affine(&ln1, self.params.get(&format!("l{i}.wk")).data(),
                self.params.get(&format!("l{i}.wk.b")).data(), w, w);
            let v = affine(&ln1, self.params.get(&format!("l{i}.wv")).data(),
                self.params.get(&format!("l{i}.wv.b")).data(), w, w);
            self.keys[i].extend_from_slice(&k);
            self.vals[i].extend_from_slice(&v);
            let t_now = self.pos + 1;
            let mut attended = vec![0.0; w];
            for head in 0..h {
                let qh = &q[head * dh..(head + 1) * dh];
                let mut scores: Vec<f64> = (0..t_now)
                    .map(|t| {
                        let kh = &self.keys[i][t * w + head * dh..t * w + (head + 1) * dh];
                        qh.iter().zip(kh).map(|(a, b)| a * b).sum::<f64>() / (dh as f64).sqrt()
                    })
                    .collect();
                softmax_inplace(&mut scores);
                for (t, &p) in scores.iter().enumerate() {
                    let vh = &self.vals[i][t * w + head * dh..t * w + (head + 1) * dh];
                    for (a, &b) in attended[head * dh..(head + 1) * dh].iter_mut().zip(vh) {
                        *a += p * b;
                    }
                }
            }
            let o = affine(&attended, self.params.get(&format!("l{i}.wo")).data(),
                self.params.get(&format!("l{i}.wo.b")).data(), w, w);
            for (a, b) in x.iter_mut().zip(&o) {
                *a += b;
            }
            let ln2 = layer_norm(
                &x,
                self.params.get(&format!("l{i}.ln2.g")).data(),
                self.params.get(&format!("l{i}.ln2.b")).data(),
            );
            let mut f = affine(&ln2, self.params.get(&format!("l{i}.ff1")).data(),
                self.params.get(&format!("l{i}.ff1.b")).data(), w, 4 * w);
            for e in &mut f {
                if *e < 0.0 {
                    *e = 0.0;
                }
            }
            let f2 = affine(&f, self.params.get(&format!("l{i}.ff2")).data(),
                self.params.get(&format!("l{i}.ff2.b")).data(), 4 * w, w);
            for (a, b) in x.iter_mut().zip(&f2) {
                *a += b;
            }
        }
        let xf = layer_norm(&x, self.params.get("ln_f.g").data(), self.params.get("ln_f.b").data());
        let vs = self.params.vocab_size();
        let logits = affine(&xf, self.params.get("out.w").data(),
            self.params.get("out.b").data(), w, vs);
        self.pos += 1;
        Ok(logits)
    }
}

fn layer_norm(x: &[f64], g: &[f64], b: &[f64]) -> Vec<f64> {
    let d = x.len() as f64;
    let mean = x.iter().sum::<f64>() / d;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    x.iter().zip(g.iter().zip(b)).map(|(v, (g, b))| (v - mean) * inv * g + b).collect()
}

fn affine(x: &[f64], w: &[f64], b: &[f64], n_in: usize, n_out: usize) -> Vec<f64> {
    let mut out = b.to_vec();
    for (i, &xi) in x.iter().enumerate().take(n_in) {
        if xi == 0.0 {
            continue;
        }
        for (o, &wij) in out.iter_mut().zip(&w[i * n_out..(i + 1) * n_out]) {
            *o += xi * wij;
        }
    }
    out
}

fn softmax_inplace(v: &mut [f64]) {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for e in v.iter_mut() {
        *e = (*e - m).exp();
        sum += *e;
    }
    for e in v.iter_mut() {
        *e /= sum;
    }
}

fn pick(logits: &[f64], allowed: &[usize], sampling: Sampling, rng: &mut ChaCha8Rng) -> usize {
    match sampling {
        Sampling::Greedy => {
            let mut best = allowed[0];
            let mut best_v = f64::NEG_INFINITY;
            for &id in allowed {
                if logits[id] > best_v {
                    best_v = logits[id];
                    best = id;
                }
            }
            best
        }
        Sampling::TopK { k, .. } => {
            let k = k.max(1).min(allowed.len());
            let mut ranked: Vec<usize> = allowed.to_vec();
            ranked.sort_by(|&a, &b| logits[b].partial_cmp(&logits[a]).unwrap().then(a.cmp(&b)));
            ranked.truncate(k);
            let mut probs: Vec<f64> = ranked.iter().map(|&id| logits[id]).collect();
            softmax_inplace(&mut probs);
            let u: f64 = rng.gen_range(0.0..1.0);
            let mut acc = 0.0;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return ranked[i];
                }
            }
            *ranked.last().unwrap()
        }
    }
}

/// Generates a token grid for `text` under the template grammar. `layers`
/// must match the tokenizer the model was trained against.
pub fn generate(
    text: &str,
    params: &ArParams,
    vocab: &Vocab,
    cfg: &ArConfig,
    layers: usize,
    sampling: Sampling,
) -> Result<TokenGrid, ArError> {
    cfg.validate()?;
    let mut prompt = vec![vocab::BOS];
    prompt.extend(vocab.encode_text(text)?);
    let mut grammar = Grammar::new(layers, prompt.len(), cfg.context)?;
    let mut rng = ChaCha8Rng::seed_from_u64(match sampling {
        Sampling::TopK { seed, .. } => seed,
        Sampling::Greedy => 0,
    });
    let mut dec = Decoder::new(params, cfg);
    let mut logits = Vec::new();
    for &id in &prompt {
        logits = dec.step(id)?;
    }
    let mut emitted = Vec::new();
    while !grammar.done() {
        let allowed = grammar.allowed(vocab);
        debug_assert!(!allowed.is_empty());
        let id = pick(&logits, &allowed, sampling, &mut rng);
        grammar.advance(id, vocab);
        emitted.push(id);
        if grammar.done() {
            break;
        }
        logits = dec.step(id)?;
    }
    deserialize_tokens(&emitted, vocab, layers)
}
