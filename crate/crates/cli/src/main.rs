use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use motok_ar::{generate as ar_generate, train_ar, ArConfig, ArParams, Sampling, Vocab};
use motok_autodiff::checkpoint::{load_checkpoint, save_checkpoint};
use motok_autodiff::Tensor;
use motok_cli::index::assign_split;
use motok_cli::{
    corpus_stats, cross_split_duplicates, gen_synthetic, render_svg, CliError, DatasetIndex,
    IndexRecord, SplitRatios, SynthConfig,
};
use motok_core::io::{load_motion, save_motion};
use motok_core::MotionSequence;
use motok_curation::{concat_motions, filter_track, FilterCriteria, KeypointTrack, TransitionConfig};
use motok_metrics::{
    diversity, frechet_distance, gaussian_fit, mm_dist, mpjpe, r_precision, EvalReport,
    FeatureExtractor, KinematicExtractor,
};
use motok_prq::{
    load_tokens, reconstruct, save_tokens, Codebook, Trainer, TokenizerConfig,
};

#[derive(Parser)]
#[command(name = "motok", about = "Motion tokenization and generation toolkit")]
struct Cli {
    /// Seed for anything stochastic (splits, training, sampling).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker thread budget (reserved; all current paths are single-threaded).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Apply keypoint-quality filters to a track (JSONL of per-frame records).
    Filter {
        track: PathBuf,
        #[arg(long, default_value_t = 8)]
        min_visible: usize,
        #[arg(long, default_value_t = 0.3)]
        confidence: f64,
    },
    /// Concatenate two motions with a SLERP transition window.
    Concat {
        a: PathBuf,
        b: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        window: usize,
    },
    /// Train the 2D-PRQ tokenizer on the train split of an index.
    TrainTokenizer {
        index: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 1024)]
        codebook_size: usize,
        #[arg(long, default_value_t = 512)]
        latent_dim: usize,
        #[arg(long, default_value_t = 4)]
        layers: usize,
        #[arg(long, default_value_t = 64)]
        channels: usize,
    },
    /// Encode each motion in an index to a token file next to it.
    Tokenize { index: PathBuf, model: PathBuf },
    /// Decode a token file back to a motion file.
    Detokenize {
        tokens: PathBuf,
        model: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        fps: f64,
    },
    /// Reconstruction MPJPE of a tokenizer over an index split.
    EvalRecon { index: PathBuf, model: PathBuf },
    /// Train the autoregressive text-to-token model.
    TrainAr {
        index: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 4)]
        layers: usize,
    },
    /// Generate a token grid from text with the trained model.
    Generate {
        model: PathBuf,
        text: String,
        out: PathBuf,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long, default_value_t = 4)]
        quant_layers: usize,
    },
    /// Text-to-motion evaluation report over an index's test split.
    EvalT2m {
        index: PathBuf,
        #[arg(long, default_value_t = 32)]
        pool: usize,
    },
    /// Corpus statistics and a cross-split duplicate-text report.
    Stats {
        index: PathBuf,
        #[arg(long)]
        lenient: bool,
    },
    /// Render a motion as an SVG strip of stick figures.
    Render {
        motion: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        stride: usize,
    },
    /// Numerically spot-check the autodiff primitives.
    Gradcheck,
    /// Generate a synthetic corpus with an index.
    GenSynth {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 64)]
        count: usize,
        #[arg(long, default_value_t = 160)]
        min_frames: usize,
        #[arg(long, default_value_t = 240)]
        max_frames: usize,
        #[arg(long, default_value_t = 20.0)]
        fps: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let io_failure = matches!(
                &e,
                MainError::Cli(CliError::Io(_) | CliError::MissingFiles(_))
            ) || e.is_io();
            ExitCode::from(if io_failure { 2 } else { 1 })
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum MainError {
    #[error(transparent)]
    Cli(#[from] CliError),
    #[error(transparent)]
    Core(#[from] motok_core::CoreError),
    #[error(transparent)]
    Curation(#[from] motok_curation::CurationError),
    #[error(transparent)]
    Prq(#[from] motok_prq::PrqError),
    #[error(transparent)]
    Ar(#[from] motok_ar::ArError),
    #[error(transparent)]
    Metrics(#[from] motok_metrics::MetricsError),
    #[error(transparent)]
    Ad(#[from] motok_autodiff::AdError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MainError {
    fn is_io(&self) -> bool {
        matches!(self, MainError::Io(_))
    }
}

fn load_index(path: &Path, lenient: bool) -> Result<DatasetIndex, MainError> {
    let (idx, missing) = DatasetIndex::load(path, lenient)?;
    if lenient && !missing.is_empty() {
        eprintln!("warning: {} missing files", missing.len());
        for m in &missing {
            eprintln!("  {m}");
        }
    }
    Ok(idx)
}

fn resolve(index_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        index_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

struct TokenizerBundle {
    cfg: TokenizerConfig,
    trainer: Trainer,
}

fn save_tokenizer(out: &Path, trainer: &Trainer) -> Result<(), MainError> {
    std::fs::create_dir_all(out)?;
    trainer.params.save(&out.join("tokenizer.ot2w"))?;
    let cb = &trainer.codebook;
    let codes = Tensor::new(&[cb.size(), cb.dim()], cb.codes().to_vec())?;
    save_checkpoint(&out.join("codebook.ot2w"), &[("codebook.codes", &codes)])?;
    let cfg_json = serde_json::to_string_pretty(&TokJson::from(&trainer.cfg))?;
    std::fs::write(out.join("config.json"), cfg_json)?;
    Ok(())
}

fn load_tokenizer(dir: &Path) -> Result<TokenizerBundle, MainError> {
    let cfg_json: TokJson =
        serde_json::from_str(&std::fs::read_to_string(dir.join("config.json"))?)?;
    let cfg = cfg_json.into_config();
    let mut trainer = Trainer::new(cfg.clone(), 0)?;
    trainer.params = motok_prq::model::ModelParams::load(&dir.join("tokenizer.ot2w"))?;
    let entries = load_checkpoint(&dir.join("codebook.ot2w"))?;
    let codes = &entries
        .iter()
        .find(|(n, _)| n == "codebook.codes")
        .ok_or_else(|| CliError::BadIndex("codebook entry missing".into()))?
        .1;
    trainer.codebook = Codebook::from_codes(codes.data().to_vec(), codes.shape()[1])?;
    Ok(TokenizerBundle { cfg, trainer })
}

fn run(cli: &Cli) -> Result<(), MainError> {
    match &cli.cmd {
        Cmd::Filter { track, min_visible, confidence } => {
            let f = std::fs::File::open(track)?;
            let t = KeypointTrack::from_jsonl(std::io::BufReader::new(f))?;
            let criteria = FilterCriteria {
                min_visible_keypoints: *min_visible,
                confidence_threshold: *confidence,
                ..FilterCriteria::default()
            };
            let d = filter_track(&t, &criteria);
            println!("accept: {}", d.accept);
            for r in &d.reasons {
                println!("reason: {r:?}");
            }
        }
        Cmd::Concat { a, b, out, window } => {
            let (ma, mb) = (load_motion(a)?, load_motion(b)?);
            let cfg = TransitionConfig { window_frames: *window, ..Default::default() };
            let r = concat_motions(&ma, &mb, &cfg)?;
            save_motion(out, &r.motion)?;
            println!(
                "frames: {} (seam max step {:.6} rad, {:.4} rad/s)",
                r.motion.num_frames(),
                r.seam.max_step_angle,
                r.seam.max_angular_velocity
            );
        }
        Cmd::TrainTokenizer { index, out, steps, codebook_size, latent_dim, layers, channels } => {
            let idx = load_index(index, false)?;
            let motions: Vec<MotionSequence> = idx
                .records
                .iter()
                .filter(|r| r.split == motok_cli::Split::Train)
                .map(|r| load_motion(&resolve(index, &r.motion_path)))
                .collect::<Result<_, _>>()?;
            if motions.is_empty() {
                return Err(CliError::BadIndex("no train-split motions".into()).into());
            }
            let cfg = TokenizerConfig {
                k_c: *codebook_size,
                d_z: *latent_dim,
                layers: *layers,
                channels: *channels,
                ..TokenizerConfig::default()
            };
            let mut trainer = Trainer::new(cfg, cli.seed)?;
            let curve = trainer.train(&motions, *steps)?;
            if cli.verbose {
                for (i, l) in curve.iter().enumerate() {
                    println!("step {i}: total {:.6}", l.total);
                }
            } else if let Some(last) = curve.last() {
                println!("final loss: {:.6}", last.total);
            }
            save_tokenizer(out, &trainer)?;
        }
        Cmd::Tokenize { index, model } => {
            let mut idx = load_index(index, false)?;
            let bundle = load_tokenizer(model)?;
            for rec in &mut idx.records {
                let m = load_motion(&resolve(index, &rec.motion_path))?;
                let (_, tokens) =
                    reconstruct(&m, &bundle.trainer.params, &bundle.trainer.codebook, &bundle.cfg)?;
                let token_rel = rec.motion_path.with_extension("ot2t");
                save_tokens(&resolve(index, &token_rel), &tokens)?;
                rec.token_path = Some(token_rel);
                if cli.verbose {
                    println!("{}: {} steps x {} layers", rec.id, tokens.steps, tokens.layers);
                }
            }
            idx.save(index)?;
        }
        Cmd::Detokenize { tokens, model, out, fps } => {
            let bundle = load_tokenizer(model)?;
            let grid = load_tokens(tokens)?;
            let m = motok_prq::decode_motion(
                &grid,
                &bundle.trainer.codebook,
                &bundle.trainer.params,
                &bundle.cfg,
                *fps,
            )?;
            save_motion(out, &m)?;
            println!("decoded {} frames", m.num_frames());
        }
        Cmd::EvalRecon { index, model } => {
            let idx = load_index(index, false)?;
            let bundle = load_tokenizer(model)?;
            let mut total = 0.0;
            let mut n = 0usize;
            for rec in &idx.records {
                let m = load_motion(&resolve(index, &rec.motion_path))?;
                let (recon, _) =
                    reconstruct(&m, &bundle.trainer.params, &bundle.trainer.codebook, &bundle.cfg)?;
                let err = mpjpe_padded(&m, &recon)?;
                total += err;
                n += 1;
                if cli.verbose {
                    println!("{}: {err:.3} mm", rec.id);
                }
            }
            println!("mean mpjpe over {n} clips: {:.3} mm", total / n.max(1) as f64);
        }
        Cmd::TrainAr { index, out, steps, width, layers } => {
            let idx = load_index(index, false)?;
            let mut corpus = Vec::new();
            for rec in &idx.records {
                if rec.split != motok_cli::Split::Train {
                    continue;
                }
                let tp = rec.token_path.as_ref().ok_or_else(|| {
                    CliError::BadIndex(format!("record {} has no token_path", rec.id))
                })?;
                corpus.push((rec.text.clone(), load_tokens(&resolve(index, tp))?));
            }
            let cfg = ArConfig { steps: *steps, width: *width, layers: *layers, ..Default::default() };
            let trained = train_ar(&corpus, &cfg, cli.seed)?;
            std::fs::create_dir_all(out)?;
            trained.params.save(&out.join("ar.ot2w"))?;
            trained.vocab.save(&out.join("vocab.txt"))?;
            std::fs::write(out.join("config.json"), serde_json::to_string_pretty(&ArJson::from(&cfg))?)?;
            println!("final nll: {:.6}", trained.loss_curve.last().copied().unwrap_or(f64::NAN));
        }
        Cmd::Generate { model, text, out, top_k, quant_layers } => {
            let params = ArParams::load(&model.join("ar.ot2w"))?;
            let vocab = Vocab::load(&model.join("vocab.txt"))?;
            let cfg_json: ArJson =
                serde_json::from_str(&std::fs::read_to_string(model.join("config.json"))?)?;
            let cfg = cfg_json.into_config();
            let sampling = match top_k {
                Some(k) => Sampling::TopK { k: *k, seed: cli.seed },
                None => Sampling::Greedy,
            };
            let grid = ar_generate(text, &params, &vocab, &cfg, *quant_layers, sampling)?;
            save_tokens(out, &grid)?;
            println!("generated {} steps x {} layers", grid.steps, grid.layers);
        }
        Cmd::EvalT2m { index, pool } => {
            let idx = load_index(index, false)?;
            let ex = KinematicExtractor;
            let mut motion_feats = Vec::new();
            let mut text_feats = Vec::new();
            for rec in &idx.records {
                if rec.split != motok_cli::Split::Test {
                    continue;
                }
                let m = load_motion(&resolve(index, &rec.motion_path))?;
                motion_feats.push(ex.motion_features(&m));
                text_feats.push(ex.text_features(&rec.text));
            }
            let (mu1, s1) = gaussian_fit(&motion_feats);
            let fid = frechet_distance(&mu1, &s1, &mu1, &s1)?;
            let [r1, r2, r3] = r_precision(&motion_feats, &text_feats, *pool, cli.seed)?;
            let md = mm_dist(&motion_feats, &text_feats)?;
            let div = diversity(&motion_feats, (motion_feats.len() / 2).min(300), cli.seed)?;
            let report = EvalReport {
                mpjpe_mm: None,
                fid,
                r_at_1: r1,
                r_at_2: r2,
                r_at_3: r3,
                mm_dist: md,
                diversity: div,
                num_samples: motion_feats.len(),
                pool: *pool,
                seed: cli.seed,
                extractor: ex.id().to_string(),
            };
            report.validate()?;
            println!("{report}");
        }
        Cmd::Stats { index, lenient } => {
            let idx = load_index(index, *lenient)?;
            println!("{}", corpus_stats(&idx));
            let dupes = cross_split_duplicates(&idx);
            if dupes.groups.is_empty() {
                println!("no cross-split duplicate texts");
            } else {
                println!("cross-split duplicate texts:");
                for (text, ids) in &dupes.groups {
                    println!("  {text:?}: {ids:?}");
                }
            }
        }
        Cmd::Render { motion, out, stride } => {
            let m = load_motion(motion)?;
            std::fs::write(out, render_svg(&m, *stride)?)?;
        }
        Cmd::Gradcheck => {
            let err = spot_check_gradients(cli.seed)?;
            println!("max relative gradient error: {err:.3e}");
            if err > 1e-3 {
                return Err(CliError::BadArgument(format!("gradient check failed: {err}")).into());
            }
        }
        Cmd::GenSynth { out_dir, count, min_frames, max_frames, fps } => {
            let cfg = SynthConfig {
                count: *count,
                min_frames: *min_frames,
                max_frames: *max_frames,
                fps: *fps,
            };
            let corpus = gen_synthetic(&cfg, cli.seed)?;
            std::fs::create_dir_all(out_dir)?;
            let ratios = SplitRatios::default();
            let mut records = Vec::new();
            for (i, (text, m)) in corpus.iter().enumerate() {
                let id = format!("synth-{i:05}");
                let file = format!("{id}.ot2m");
                save_motion(&out_dir.join(&file), m)?;
                records.push(IndexRecord {
                    id: id.clone(),
                    motion_path: file.into(),
                    token_path: None,
                    text: text.clone(),
                    num_frames: m.num_frames(),
                    fps: m.fps(),
                    split: assign_split(&id, cli.seed, &ratios),
                    source: "synth".into(),
                });
            }
            let idx = DatasetIndex { records };
            idx.save(&out_dir.join("index.jsonl"))?;
            println!("wrote {} clips to {}", corpus.len(), out_dir.display());
        }
    }
    Ok(())
}

/// MPJPE after trimming the longer motion to the shorter's frame count
/// (reconstruction pads to a multiple of the temporal stride).
fn mpjpe_padded(a: &MotionSequence, b: &MotionSequence) -> Result<f64, MainError> {
    let t = a.num_frames().min(b.num_frames());
    let trim = |m: &MotionSequence| {
        MotionSequence::new(m.frames()[..t * motok_core::skeleton::FRAME_DIM].to_vec(), t, m.fps())
    };
    Ok(mpjpe(&trim(a)?, &trim(b)?)?)
}

/// Serializable mirror of TokenizerConfig for the model directory.
#[derive(serde::Serialize, serde::Deserialize)]
struct TokJson {
    alpha: usize,
    layers: usize,
    k_c: usize,
    d_z: usize,
    beta: f64,
    channels: usize,
    lr: f64,
    batch_size: usize,
    crop_frames: usize,
    dead_code_window: u64,
}

impl TokJson {
    fn from(cfg: &TokenizerConfig) -> TokJson {
        TokJson {
            alpha: cfg.alpha,
            layers: cfg.layers,
            k_c: cfg.k_c,
            d_z: cfg.d_z,
            beta: cfg.beta,
            channels: cfg.channels,
            lr: cfg.lr,
            batch_size: cfg.batch_size,
            crop_frames: cfg.crop_frames,
            dead_code_window: cfg.dead_code_window,
        }
    }

    fn into_config(self) -> TokenizerConfig {
        TokenizerConfig {
            alpha: self.alpha,
            layers: self.layers,
            k_c: self.k_c,
            d_z: self.d_z,
            beta: self.beta,
            channels: self.channels,
            lr: self.lr,
            batch_size: self.batch_size,
            crop_frames: self.crop_frames,
            dead_code_window: self.dead_code_window,
        }
    }
}

/// Serializable mirror of ArConfig for the model directory.
#[derive(serde::Serialize, serde::Deserialize)]
struct ArJson {
    layers: usize,
    width: usize,
    heads: usize,
    context: usize,
    lr: f64,
    steps: usize,
}

impl ArJson {
    fn from(cfg: &ArConfig) -> ArJson {
        ArJson {
            layers: cfg.layers,
            width: cfg.width,
            heads: cfg.heads,
            context: cfg.context,
            lr: cfg.lr,
            steps: cfg.steps,
        }
    }

    fn into_config(self) -> ArConfig {
        ArConfig {
            layers: self.layers,
            width: self.width,
            heads: self.heads,
            context: self.context,
            lr: self.lr,
            steps: self.steps,
        }
    }
}

fn spot_check_gradients(seed: u64) -> Result<f64, MainError> {
    use motok_autodiff::{grad_check, Tape};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut randt = |shape: &[usize]| {
        let n: usize = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .map_err(motok_autodiff::AdError::from)
    };
    let a = randt(&[3, 4])?;
    let b = randt(&[4, 2])?;
    let target = randt(&[3, 2])?;
    let err = grad_check(&[a, b], 1e-5, |tape: &mut Tape, inputs: &[Tensor]| {
        let ia = tape.input(inputs[0].clone(), true);
        let ib = tape.input(inputs[1].clone(), true);
        let y = tape.matmul(ia, ib)?;
        let t = tape.constant(target.clone());
        let loss = tape.mse_loss(y, t)?;
        Ok((vec![ia, ib], loss))
    })?;
    Ok(err)
}
