//! Training loop over (text, token grid) pairs.

use motok_autodiff::{Adam, AdamConfig, Tape, Tensor};
use motok_prq::TokenGrid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{forward_logits, next_token_targets, nll_loss, ArConfig, ArParams, BoundAr};
use crate::template::serialize_tokens;
use crate::vocab::{Vocab, BOS, EOS};
use crate::ArError;

pub struct TrainedAr {
    pub params: ArParams,
    pub vocab: Vocab,
    pub cfg: ArConfig,
    pub loss_curve: Vec<f64>,
}

/// Full training sequence for one pair: <bos> desc <mot> ... </mot> <eos>,
/// plus the index where the answer (everything from <mot>) begins.
pub fn build_sequence(
    text: &str,
    grid: &TokenGrid,
    vocab: &Vocab,
) -> Result<(Vec<usize>, usize), ArError> {
    let mut ids = vec![BOS];
    ids.extend(vocab.encode_text(text)?);
    let answer_start = ids.len();
    ids.extend(serialize_tokens(grid, vocab));
    ids.push(EOS);
    Ok((ids, answer_start))
}

/// Trains for `cfg.steps` steps, cycling the corpus in order. The vocabulary
/// is built from the corpus texts and the tokenizer code space.
pub fn train_ar(
    corpus: &[(String, TokenGrid)],
    cfg: &ArConfig,
    seed: u64,
) -> Result<TrainedAr, ArError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(ArError::BadConfig("empty corpus".into()));
    }
    let k_c = corpus[0].1.codebook_size;
    let texts: Vec<&str> = corpus.iter().map(|(t, _)| t.as_str()).collect();
    let vocab = Vocab::build(k_c, &texts);
    let sequences: Vec<(Vec<usize>, usize)> = corpus
        .iter()
        .map(|(text, grid)| {
            let (ids, start) = build_sequence(text, grid, &vocab)?;
            if ids.len() > cfg.context {
                return Err(ArError::ContextOverflow(text.clone()));
            }
            Ok((ids, start))
        })
        .collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ArParams::init(cfg, vocab.size(), &mut rng);
    let mut adam = Adam::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
    let mut curve = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let (ids, start) = &sequences[step % sequences.len()];
        let targets = next_token_targets(ids, *start);
        let mut tape = Tape::new();
        let bp = BoundAr::bind(&mut tape, &params, true);
        let logits = forward_logits(&mut tape, &bp, cfg, ids)?;
        let loss = nll_loss(&mut tape, logits, &targets)?;
        curve.push(tape.value(loss).item());
        tape.backward(loss)?;
        let grads: Vec<Tensor> = bp
            .nodes()
            .iter()
            .zip(params.entries())
            .map(|(&id, (_, t))| tape.grad(id).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
            .collect();
        let grad_refs: Vec<&Tensor> = grads.iter().collect();
        let mut param_refs: Vec<&mut Tensor> =
            params.entries_mut().iter_mut().map(|(_, t)| t).collect();
        adam.step(&mut param_refs, &grad_refs)?;
    }
    Ok(TrainedAr { params, vocab, cfg: cfg.clone(), loss_curve: curve })
}

/// Mean NLL of one pair under the current parameters (no update).
pub fn eval_pair(
    trained: &TrainedAr,
    text: &str,
    grid: &TokenGrid,
) -> Result<f64, ArError> {
    let (ids, start) = build_sequence(text, grid, &trained.vocab)?;
    let targets = next_token_targets(&ids, start);
    let mut tape = Tape::new();
    let bp = BoundAr::bind(&mut tape, &trained.params, false);
    let logits = forward_logits(&mut tape, &bp, &trained.cfg, &ids)?;
    let loss = nll_loss(&mut tape, logits, &targets)?;
    Ok(tape.value(loss).item())
}
