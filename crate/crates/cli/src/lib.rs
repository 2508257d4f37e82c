//! `ntt` command-line front end: argument parsing, configuration merging
//! and the subcommand implementations.

pub mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ntt_core::dataset::{
    gen_warped_ref, pair_directory, warp_with, write_pairs_jsonl, MatchCountConfig,
    SimilarityLevels, WarpParams, CROP_SIZE, DEFAULT_TAU,
};
use ntt_core::features::random_network_weights;
use ntt_core::losses::{
    perceptual_loss, psnr, rec_loss, ssim, texture_loss, total_objective, LossParts,
};
use ntt_core::transfer::{has_generator_weights, random_generator_weights, super_resolve};
use ntt_core::{
    bicubic_resample, extract_pyramid, load_image, load_weights, save_image, store_weights,
    swap_pipeline, Error, ErrorKind, ImageBuffer, SwappedPyramid, WeightStore,
};
use serde_json::{json, Value};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "ntt", version, about = "Reference-based super-resolution by neural texture transfer")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "NTT_THREADS")]
    pub threads: Option<usize>,
    /// Seed for every random choice in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Match and swap reference features; writes the swapped pyramid.
    Swap(SwapArgs),
    /// Super-resolve an LR image (swap + texture transfer); writes a PNG.
    Sr(SrArgs),
    /// Score an SR image against its HR ground truth; prints JSON.
    Eval(EvalArgs),
    /// Score image pairs in a directory and bucket them into similarity levels.
    Pair(PairArgs),
    /// Write a randomly warped copy of an HR image.
    WarpRef(WarpArgs),
    /// Print the effective run configuration as JSON.
    ExportConfig(ExportArgs),
    /// Write seeded random feature (and optionally generator) weights.
    InitWeights(InitArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Low-resolution input image.
    #[arg(long)]
    pub lr: Option<PathBuf>,
    /// Reference images; the bicubic-upscaled LR is used when none are given.
    #[arg(long, num_args = 1..)]
    pub refs: Vec<PathBuf>,
    /// NTTW weight file.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SwapArgs {
    #[command(flatten)]
    pub io: InputArgs,
}

#[derive(Debug, Args)]
pub struct SrArgs {
    #[command(flatten)]
    pub io: InputArgs,
    /// Previously written swapped pyramid; skips the swap stage.
    #[arg(long)]
    pub pyramid: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub sr: PathBuf,
    #[arg(long)]
    pub hr: Option<PathBuf>,
    /// Swapped pyramid for the texture term; omitted from the output when absent.
    #[arg(long)]
    pub pyramid: Option<PathBuf>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long)]
    pub dir: PathBuf,
    /// Four strictly decreasing match-count cutoffs, e.g. `700,260,50,0`.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    /// Cosine threshold for a patch to count as matched.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = CROP_SIZE)]
    pub crop: usize,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WarpArgs {
    #[arg(long)]
    pub hr: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Zero motion (debugging): the output equals the input.
    #[arg(long)]
    pub identity: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Last feature tap to include.
    #[arg(long, default_value = "relu5_1")]
    pub through: String,
    /// Also write generator weights for the configured transfer network.
    #[arg(long)]
    pub generator: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    /// 1 usage, 2 I/O, 3 shape or configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Io => 2,
                ErrorKind::Invalid => 3,
            },
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn required(v: &Option<PathBuf>, what: &str) -> CliResult<PathBuf> {
    v.clone()
        .ok_or_else(|| CliError::Usage(format!("missing --{what} (flag or config file)")))
}

/// Defaults, then the `--config` file, then flags shared by every command.
pub fn base_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_inputs(cfg: &mut RunConfig, io: &InputArgs) {
    if io.lr.is_some() {
        cfg.lr = io.lr.clone();
    }
    if !io.refs.is_empty() {
        cfg.refs = io.refs.clone();
    }
    if io.weights.is_some() {
        cfg.weights = io.weights.clone();
    }
    if io.out.is_some() {
        cfg.out = io.out.clone();
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let mut cfg = base_config(cli)?;
    match &cli.command {
        Command::Swap(a) => {
            apply_inputs(&mut cfg, &a.io);
            cmd_swap(&cfg)
        }
        Command::Sr(a) => {
            apply_inputs(&mut cfg, &a.io);
            cmd_sr(&cfg, a.pyramid.as_deref())
        }
        Command::Eval(a) => {
            if a.hr.is_some() {
                cfg.hr = a.hr.clone();
            }
            if a.weights.is_some() {
                cfg.weights = a.weights.clone();
            }
            let metrics = cmd_eval(&cfg, &a.sr, a.pyramid.as_deref())?;
            println!("{metrics}");
            Ok(())
        }
        Command::Pair(a) => {
            if a.weights.is_some() {
                cfg.weights = a.weights.clone();
            }
            if a.out.is_some() {
                cfg.out = a.out.clone();
            }
            cmd_pair(&cfg, a)
        }
        Command::WarpRef(a) => {
            if a.hr.is_some() {
                cfg.hr = a.hr.clone();
            }
            if a.out.is_some() {
                cfg.out = a.out.clone();
            }
            cmd_warp_ref(&cfg, a.identity)
        }
        Command::ExportConfig(a) => {
            let text = serde_json::to_string_pretty(&cfg).expect("config serializes");
            match &a.out {
                Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::io(p, e))?,
                None => println!("{text}"),
            }
            Ok(())
        }
        Command::InitWeights(a) => cmd_init_weights(&cfg, a),
    }
}

fn load_store(cfg: &RunConfig) -> CliResult<WeightStore> {
    let path = required(&cfg.weights, "weights")?;
    Ok(load_weights(&path)?)
}

/// LR image and reference list, falling back to the LR↑ self-reference.
fn load_inputs(cfg: &RunConfig) -> CliResult<(ImageBuffer, Vec<ImageBuffer>)> {
    let lr = load_image(required(&cfg.lr, "lr")?)?;
    let refs = if cfg.refs.is_empty() {
        log::info!("no references given; using the upscaled LR image as its own reference");
        vec![bicubic_resample(&lr, cfg.swap.sr_factor as f64)?]
    } else {
        cfg.refs.iter().map(load_image).collect::<Result<_, _>>()?
    };
    Ok((lr, refs))
}

pub fn cmd_swap(cfg: &RunConfig) -> CliResult<()> {
    let out = required(&cfg.out, "out")?;
    let weights = load_store(cfg)?;
    let (lr, refs) = load_inputs(cfg)?;
    let pyramid = swap_pipeline(&lr, &refs, &weights, &cfg.network(), &cfg.swap)?;
    if let Some(c) = pyramid.correspondence() {
        log::info!("mean best score {:.4} over {} LR patches", c.mean_score(), c.len());
    }
    pyramid.save(&out)?;
    Ok(())
}

/// Generator weights from the store, or seeded random ones sized for `pyramid`.
fn generator_weights(cfg: &RunConfig, store: WeightStore, pyramid: &SwappedPyramid) -> CliResult<WeightStore> {
    if has_generator_weights(&store) {
        return Ok(store);
    }
    log::info!("no generator weights in the store; using seeded random ones (seed {})", cfg.seed);
    let channels: Vec<usize> = pyramid.layers().iter().map(|l| l.swapped.channels()).collect();
    let mut all = store;
    all.extend(random_generator_weights(&cfg.transfer, &channels, cfg.seed)?);
    Ok(all)
}

pub fn cmd_sr(cfg: &RunConfig, pyramid_path: Option<&Path>) -> CliResult<()> {
    cfg.validate()?;
    let out = required(&cfg.out, "out")?;
    let pyramid = match pyramid_path {
        Some(p) => SwappedPyramid::load(p)?,
        None => {
            let store = load_store(cfg)?;
            let (lr, refs) = load_inputs(cfg)?;
            swap_pipeline(&lr, &refs, &store, &cfg.network(), &cfg.swap)?
        }
    };
    let lr = load_image(required(&cfg.lr, "lr")?)?;
    let store = match &cfg.weights {
        Some(p) => load_weights(p)?,
        None => WeightStore::new(),
    };
    let weights = generator_weights(cfg, store, &pyramid)?;
    let sr = super_resolve(&lr, &pyramid, &weights, &cfg.transfer)?;
    save_image(&sr, &out)?;
    log::info!("wrote {}x{} image to {}", sr.height(), sr.width(), out.display());
    Ok(())
}

fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!(v.to_string())
    }
}

pub fn cmd_eval(cfg: &RunConfig, sr_path: &Path, pyramid_path: Option<&Path>) -> CliResult<Value> {
    let sr = load_image(sr_path)?;
    let hr = load_image(required(&cfg.hr, "hr")?)?;
    let weights = load_store(cfg)?;
    let net = cfg.network();
    let rec = rec_loss(&sr, &hr)?;
    let per = perceptual_loss(&sr, &hr, &weights, &net)?;
    let tex = match pyramid_path {
        Some(p) => {
            let pyramid = SwappedPyramid::load(p)?;
            let layers: Vec<&str> = cfg.texture.layers.iter().map(String::as_str).collect();
            let feats = extract_pyramid(&sr, &weights, &net, &layers)?;
            Some(texture_loss(&feats, &pyramid, &cfg.texture)?)
        }
        None => None,
    };
    let parts = LossParts {
        rec,
        per,
        tex: tex.unwrap_or(0.0),
        adv: None,
    };
    let total = total_objective(&parts, &cfg.loss_weights)?;
    let mut out = json!({
        "psnr": number(psnr(&sr, &hr)?),
        "ssim": number(ssim(&sr, &hr)?),
        "rec": number(rec),
        "per": number(per),
        "total": number(total),
    });
    if let Some(t) = tex {
        out["tex"] = number(t);
    }
    Ok(out)
}

pub fn cmd_pair(cfg: &RunConfig, a: &PairArgs) -> CliResult<()> {
    let out = required(&cfg.out, "out")?;
    let levels = match &a.levels {
        Some(v) => {
            let cutoffs: [usize; 4] = v.as_slice().try_into().map_err(|_| {
                CliError::Usage(format!("--levels takes 4 values, got {}", v.len()))
            })?;
            SimilarityLevels::new(cutoffs)?
        }
        None => SimilarityLevels::default(),
    };
    let weights = load_store(cfg)?;
    let mc = MatchCountConfig {
        tau: a.tau,
        ..MatchCountConfig::default()
    };
    let records = pair_directory(&a.dir, &weights, &cfg.network(), &levels, &mc, a.crop, cfg.seed)?;
    log::info!("scored {} pairs", records.len());
    write_pairs_jsonl(&records, &out)?;
    Ok(())
}

pub fn cmd_warp_ref(cfg: &RunConfig, identity: bool) -> CliResult<()> {
    let hr = load_image(required(&cfg.hr, "hr")?)?;
    let out = required(&cfg.out, "out")?;
    let warped = if identity {
        warp_with(&hr, &WarpParams::IDENTITY)?
    } else {
        gen_warped_ref(&hr, cfg.seed)?
    };
    save_image(&warped, &out)?;
    Ok(())
}

pub fn cmd_init_weights(cfg: &RunConfig, a: &InitArgs) -> CliResult<()> {
    let net = cfg.network().through(&a.through)?;
    let mut store = random_network_weights(&net, cfg.seed)?;
    if a.generator {
        let mut taps = cfg
            .swap
            .target_layers
            .iter()
            .map(|t| net.tap_info(t))
            .collect::<Result<Vec<_>, _>>()?;
        // coarse to fine, the order the generator consumes them
        taps.sort_by(|x, y| y.1.cmp(&x.1));
        let channels: Vec<usize> = taps.iter().map(|t| t.0).collect();
        store.extend(random_generator_weights(&cfg.transfer, &channels, cfg.seed)?);
    }
    store_weights(&store, &a.out)?;
    log::info!("wrote {} tensors to {}", store.len(), a.out.display());
    Ok(())
}
