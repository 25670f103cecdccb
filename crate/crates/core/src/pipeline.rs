//! Corpus construction, evaluation and figure sweeps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::container::{self, Corpus, CorpusPair};
use crate::data::{self, Dataset, Scene, Split};
use crate::forward::{add_noise, measure_batch, NoiseSpec};
use crate::image_io::Grid;
use crate::metrics::{self, fmt_f64, QualityReport};
use crate::nn::{self, checkpoint, Arch, EpochStats, Network, NetworkParams, TrainConfig, TrainingSample};
use crate::recon::{ground_truth, pattern_count_for, reconstruct_batch, ReconImage, Source};
use crate::speckle::{self, Family, PatternSpec, PatternStack};
use crate::{Error, Result};

/// Sampling-ratio tiers used by the figures.
pub const TIERS: [f64; 7] = [0.005, 0.008, 0.01, 0.05, 0.10, 0.50, 1.00];

/// Parse `5%`, `0.8%` or a fraction such as `0.05`; the value must be a known tier.
pub fn parse_tier(s: &str) -> Result<f64> {
    let t = s.trim();
    let v = match t.strip_suffix('%') {
        Some(p) => p.trim().parse::<f64>().map(|v| v / 100.0),
        None => t.parse::<f64>(),
    }
    .map_err(|_| Error::Usage(format!("cannot read sampling ratio {s:?}")))?;
    TIERS
        .iter()
        .copied()
        .find(|&tier| (tier - v).abs() < 1e-9)
        .ok_or_else(|| {
            Error::Usage(format!(
                "sampling ratio {s} is not one of {}",
                TIERS.map(tier_label).join(", ")
            ))
        })
}

/// `0.008` → `0.8%`.
pub fn tier_label(beta: f64) -> String {
    format!("{}%", (beta * 1000.0).round() / 10.0)
}

/// How the regression target is derived from a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    /// The two-level class-mean image of the normalized input, normalized by
    /// its object mean.
    ClassMeans,
    /// The transmission map itself (class means mapped to 1 and 0).
    Mask,
}

/// Reconstruction method: plain correlation or the network trained on `family`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Method {
    pub family: Family,
    pub learned: bool,
}

impl Method {
    pub const CGI_WHITE: Method = Method { family: Family::White, learned: false };
    pub const DL_WHITE: Method = Method { family: Family::White, learned: true };
    pub const DL_PINK: Method = Method { family: Family::Pink, learned: true };

    pub fn tag(&self) -> String {
        format!(
            "{} {}",
            if self.learned { "DL" } else { "CGI" },
            self.family.as_str()
        )
    }
}

/// The first `round(beta · pixels)` patterns of `full`.
pub fn tier_stack(full: &PatternStack, beta: f64) -> Result<PatternStack> {
    full.prefix(pattern_count_for(beta, full.pixels())?)
}

const SCENE_CHUNK: usize = 256;

/// Measure, optionally add noise (seeded per scene index), and reconstruct.
pub fn simulate(scenes: &[Scene], stack: &PatternStack, noise: Option<&NoiseSpec>) -> Result<Vec<ReconImage>> {
    let mut out = Vec::with_capacity(scenes.len());
    for (c, chunk) in scenes.chunks(SCENE_CHUNK).enumerate() {
        let mut series = measure_batch(chunk, stack)?;
        if let Some(n) = noise {
            for (k, s) in series.iter_mut().enumerate() {
                *s = add_noise(s, &n.for_item(c * SCENE_CHUNK + k))?;
            }
        }
        out.extend(reconstruct_batch(stack, &series)?);
    }
    Ok(out)
}

/// Simulated (scene, reconstruction) pairs in dataset order.
pub fn build_training_corpus(dataset: &Dataset, stack: &PatternStack, noise: Option<&NoiseSpec>) -> Result<Corpus> {
    let recons = simulate(dataset.scenes(), stack, noise)?;
    Ok(Corpus {
        patterns: *stack.spec(),
        snr_db: noise.map(|n| n.snr_db),
        pairs: dataset
            .scenes()
            .iter()
            .cloned()
            .zip(recons)
            .map(|(scene, recon)| CorpusPair { scene, recon })
            .collect(),
    })
}

/// Network input for a reconstruction: the image min-max scaled to `[0, 1]`.
pub fn network_input(recon: &ReconImage) -> Vec<f32> {
    recon.min_max_normalized()
}

pub fn training_sample(pair: &CorpusPair, mode: TargetMode) -> Result<TrainingSample> {
    let input = network_input(&pair.recon);
    let (target, normalizer) = match mode {
        TargetMode::Mask => (
            pair.scene.transmission().iter().map(|&t| f32::from(t)).collect(),
            1.0,
        ),
        TargetMode::ClassMeans => {
            let scaled = ReconImage { g: input.clone(), ..pair.recon.clone() };
            let x = ground_truth(&pair.scene, &scaled)?;
            (x.x.iter().map(|&v| v as f32).collect(), x.mean_object as f32)
        }
    };
    if !(normalizer.abs() > 0.0) {
        return Err(Error::Degenerate(format!(
            "training target for digit {} has a zero object mean",
            pair.scene.label
        )));
    }
    Ok(TrainingSample { input, target, normalizer })
}

pub fn training_samples(corpus: &Corpus, mode: TargetMode) -> Result<Vec<TrainingSample>> {
    if corpus.pairs.is_empty() {
        return Err(Error::Config("training corpus is empty".into()));
    }
    corpus.pairs.iter().map(|p| training_sample(p, mode)).collect()
}

const INFER_BATCH: usize = 32;

/// Eval-mode network outputs for reconstructions.
pub fn infer(net: &Network<f32>, recons: &[ReconImage]) -> Result<Vec<ReconImage>> {
    let pixels = net.pixels();
    let mut out = Vec::with_capacity(recons.len());
    for chunk in recons.chunks(INFER_BATCH) {
        let mut input = Vec::with_capacity(chunk.len() * pixels);
        for r in chunk {
            if (r.height, r.width) != (net.arch.height, net.arch.width) {
                return Err(Error::DimensionMismatch(format!(
                    "network expects {}x{} images, got {}x{}",
                    net.arch.height, net.arch.width, r.height, r.width
                )));
            }
            input.extend(network_input(r));
        }
        let y = net.predict(&input, chunk.len())?;
        for (r, g) in chunk.iter().zip(y.chunks_exact(pixels)) {
            out.push(ReconImage::new(r.height, r.width, g.to_vec(), r.beta, Source::DlOutput)?);
        }
    }
    Ok(out)
}

/// Images and report rows for one method at one tier and noise condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub raw: Vec<ReconImage>,
    /// Network outputs, present for learned methods.
    pub learned: Option<Vec<ReconImage>>,
    pub reports: Vec<QualityReport>,
}

impl Evaluation {
    /// The images the reports score.
    pub fn scored(&self) -> &[ReconImage] {
        self.learned.as_deref().unwrap_or(&self.raw)
    }

    pub fn mean_cc(&self) -> f64 {
        self.reports.iter().map(|r| r.cc).sum::<f64>() / self.reports.len() as f64
    }
}

/// Simulate `scenes` under `stack` and score the method's output. `net` must
/// be given exactly when the method is learned. Report rows carry the
/// nominal tier `beta`.
pub fn evaluate(
    method: Method,
    net: Option<&Network<f32>>,
    scenes: &[Scene],
    stack: &PatternStack,
    beta: f64,
    noise: Option<&NoiseSpec>,
    bit_depth: u32,
) -> Result<Evaluation> {
    if stack.spec().family != method.family {
        return Err(Error::Config(format!(
            "{} needs {} patterns, got {}",
            method.tag(),
            method.family,
            stack.spec().family
        )));
    }
    let raw = simulate(scenes, stack, noise)?;
    let learned = match (method.learned, net) {
        (true, Some(n)) => Some(infer(n, &raw)?),
        (false, None) => None,
        (true, None) => return Err(Error::Config(format!("{} needs a trained network", method.tag()))),
        (false, Some(_)) => return Err(Error::Config("plain CGI takes no network".into())),
    };
    let scored = learned.as_deref().unwrap_or(&raw);
    let reports = scenes
        .iter()
        .zip(scored)
        .map(|(s, g)| {
            let mut r = QualityReport::score(&method.tag(), g, s, noise.map(|n| n.snr_db), bit_depth)?;
            r.beta = beta;
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation { raw, learned, reports })
}


/// Scene sources a command can run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSel {
    /// The MNIST digits used for training.
    HandwritingTrain,
    /// MNIST digits after the training subset.
    HandwritingHoldout,
    BlockDigits,
}

impl std::str::FromStr for DatasetSel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "handwriting-train" | "hand" => Ok(DatasetSel::HandwritingTrain),
            "handwriting-holdout" | "holdout" => Ok(DatasetSel::HandwritingHoldout),
            "block-digits" | "block" => Ok(DatasetSel::BlockDigits),
            other => Err(Error::Usage(format!(
                "unknown dataset {other:?} (handwriting-train, handwriting-holdout, block-digits)"
            ))),
        }
    }
}

/// Everything a run depends on. Loaded from TOML; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_dir: PathBuf,
    pub mnist_dir: PathBuf,
    /// MNIST digits simulated into each training corpus.
    pub train_pairs: usize,
    pub pattern_seed: u64,
    pub noise_seed: u64,
    pub binarize: bool,
    /// Noise injected into training corpora; absent means noiseless.
    pub train_snr_db: Option<f64>,
    pub target: TargetMode,
    pub bit_depth: u32,
    /// Noise realizations averaged per noisy condition in the summary figure.
    pub noise_realizations: usize,
    pub arch: Arch,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run_dir: PathBuf::from("runs/default"),
            mnist_dir: PathBuf::from("data/mnist"),
            train_pairs: 10000,
            pattern_seed: 0,
            noise_seed: 1,
            binarize: true,
            train_snr_db: None,
            target: TargetMode::Mask,
            bit_depth: metrics::DEFAULT_BIT_DEPTH,
            noise_realizations: 3,
            arch: Arch::default(),
            train: TrainConfig::default(),
        }
    }
}

/// `0.008` → `0.8pct`, for file names.
pub fn tier_slug(beta: f64) -> String {
    tier_label(beta).replace('%', "pct")
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.train.validate()?;
        if (self.arch.height, self.arch.width) != (crate::SCENE_HEIGHT, crate::SCENE_WIDTH) {
            return Err(Error::Config(format!(
                "network grid {}x{} must match the {}x{} scene grid",
                self.arch.height,
                self.arch.width,
                crate::SCENE_HEIGHT,
                crate::SCENE_WIDTH
            )));
        }
        if self.train_pairs == 0 || self.noise_realizations == 0 {
            return Err(Error::Config("train_pairs and noise_realizations must be positive".into()));
        }
        if let Some(snr) = self.train_snr_db {
            if !snr.is_finite() {
                return Err(Error::Config(format!("training SNR {snr} must be finite")));
            }
        }
        Ok(())
    }

    pub fn pattern_spec(&self, family: Family, beta: f64) -> Result<PatternSpec> {
        Ok(PatternSpec {
            binarize: self.binarize,
            ..PatternSpec::scene(family, pattern_count_for(beta, crate::SCENE_PIXELS)?, self.pattern_seed)
        })
    }

    /// The shared stack for `family` truncated to tier `beta`.
    pub fn stack(&self, family: Family, beta: f64) -> Result<PatternStack> {
        speckle::generate(&self.pattern_spec(family, beta)?)
    }

    pub fn checkpoint_path(&self, family: Family, beta: f64) -> PathBuf {
        self.run_dir
            .join("checkpoints")
            .join(format!("{family}-{}.ckpt", tier_slug(beta)))
    }

    pub fn corpus_path(&self, family: Family, beta: f64) -> PathBuf {
        self.run_dir
            .join("corpus")
            .join(format!("{family}-{}.corpus", tier_slug(beta)))
    }

    pub fn loss_log_path(&self, family: Family, beta: f64) -> PathBuf {
        self.run_dir
            .join("logs")
            .join(format!("{family}-{}.csv", tier_slug(beta)))
    }

    /// The CLI invocation that produces the checkpoint for `(family, beta)`.
    pub fn train_command(&self, config_path: Option<&Path>, family: Family, beta: f64) -> String {
        let cfg = config_path.map_or(String::new(), |p| format!(" --config {}", p.display()));
        format!("cgidl train{cfg} --family {family} --tier {}", tier_label(beta))
    }

    pub fn training_set(&self) -> Result<Dataset> {
        data::load_mnist(&self.mnist_dir, self.train_pairs)
    }

    /// Scenes for `digits` from the chosen source, in request order.
    pub fn scenes(&self, sel: DatasetSel, digits: &[u8]) -> Result<Vec<Scene>> {
        match sel {
            DatasetSel::BlockDigits => data::block_digits(digits),
            DatasetSel::HandwritingTrain => data::first_of_each(&self.training_set()?, digits),
            DatasetSel::HandwritingHoldout => {
                let all = data::load_mnist_prefix(&self.mnist_dir, "train", None, Split::Holdout)?;
                let rest: Vec<Scene> = all.into_scenes().into_iter().skip(self.train_pairs).collect();
                if rest.is_empty() {
                    return Err(Error::Config(format!(
                        "no handwriting digits beyond the {} training pairs",
                        self.train_pairs
                    )));
                }
                data::first_of_each(&Dataset::new(rest, Split::Holdout)?, digits)
            }
        }
    }

    /// Noise for realization `r` of a named evaluation condition.
    pub fn noise(&self, snr_db: f64, condition: &str, r: usize) -> NoiseSpec {
        let seed = self.noise_seed ^ fnv1a(condition) ^ (r as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
        NoiseSpec::new(snr_db, seed)
    }

    /// Load the trained network for `(family, beta)`.
    pub fn load_network(&self, config_path: Option<&Path>, family: Family, beta: f64) -> Result<Network<f32>> {
        let path = self.checkpoint_path(family, beta);
        if !path.exists() {
            return Err(Error::MissingCheckpoint {
                command: self.train_command(config_path, family, beta),
                path,
            });
        }
        let ck = checkpoint::load(&path)?;
        let arch = &ck.params.network.arch;
        if (arch.height, arch.width) != (crate::SCENE_HEIGHT, crate::SCENE_WIDTH) {
            return Err(Error::DimensionMismatch(format!(
                "{} holds a {}x{} network",
                path.display(),
                arch.height,
                arch.width
            )));
        }
        Ok(ck.params.network)
    }

    /// The simulated training corpus for `(family, beta)`.
    pub fn build_corpus(&self, family: Family, beta: f64) -> Result<Corpus> {
        let stack = self.stack(family, beta)?;
        let noise = self.train_snr_db.map(|snr| self.noise(snr, "train", 0));
        build_training_corpus(&self.training_set()?, &stack, noise.as_ref())
    }
}

/// Where training reads its corpus and writes its checkpoint and loss log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPaths {
    pub corpus: PathBuf,
    pub checkpoint: PathBuf,
    pub loss_log: PathBuf,
}

impl RunConfig {
    pub fn train_paths(&self, family: Family, beta: f64) -> TrainPaths {
        TrainPaths {
            corpus: self.corpus_path(family, beta),
            checkpoint: self.checkpoint_path(family, beta),
            loss_log: self.loss_log_path(family, beta),
        }
    }
}

/// Train the `(family, beta)` network, checkpointing after every epoch.
///
/// Uses the stored corpus when present, otherwise simulates it. With
/// `resume`, an existing checkpoint is continued instead of restarted.
pub fn train_network<F: FnMut(&EpochStats)>(
    cfg: &RunConfig,
    family: Family,
    beta: f64,
    paths: &TrainPaths,
    resume: bool,
    mut progress: F,
) -> Result<NetworkParams<f32>> {
    cfg.validate()?;
    let want = cfg.pattern_spec(family, beta)?;
    let corpus = if paths.corpus.exists() {
        let c = container::read_corpus(&paths.corpus)?;
        if c.patterns != want {
            return Err(Error::Config(format!(
                "{} was built with {}, the config asks for {}",
                paths.corpus.display(),
                c.patterns.id(),
                want.id()
            )));
        }
        c
    } else {
        cfg.build_corpus(family, beta)?
    };
    let samples = training_samples(&corpus, cfg.target)?;
    drop(corpus);
    let ckpt = &paths.checkpoint;
    let mut params = if resume && ckpt.exists() {
        let ck = checkpoint::load(ckpt)?;
        if ck.params.network.arch != cfg.arch {
            return Err(Error::Config(format!("{} has a different architecture", ckpt.display())));
        }
        ck.params
    } else {
        NetworkParams::new(Network::new(cfg.arch.clone(), cfg.train.seed)?)
    };
    if let Some(dir) = paths.loss_log.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut log = String::from("epoch,learning_rate,mean_loss,iterations\n");
    if params.epoch > 0 && paths.loss_log.exists() {
        log = fs::read_to_string(&paths.loss_log)?;
    }
    nn::train(&mut params, &samples, &cfg.train, |stats, p| {
        checkpoint::save(ckpt, p, &cfg.train)?;
        log.push_str(&format!(
            "{},{},{},{}\n",
            stats.epoch,
            fmt_f64(stats.learning_rate),
            fmt_f64(stats.mean_loss),
            stats.iterations
        ));
        fs::write(&paths.loss_log, &log)?;
        progress(stats);
        Ok(())
    })?;
    Ok(params)
}

/// Tiers shown per method in the noisy figures.
pub const FIGURE_TIERS: [(Method, [f64; 3]); 3] = [
    (Method::CGI_WHITE, [1.00, 0.50, 0.10]),
    (Method::DL_WHITE, [0.50, 0.05, 0.01]),
    (Method::DL_PINK, [0.05, 0.008, 0.005]),
];

/// Digits shown in the noisy figures and averaged in the summary.
pub const FIGURE_DIGITS: [u8; 4] = [2, 3, 5, 6];

/// Networks each figure needs.
pub fn figure_networks(id: u32) -> Result<Vec<(Family, f64)>> {
    let mut out = Vec::new();
    match id {
        3 => {
            out.push((Family::White, 0.05));
            out.push((Family::Pink, 0.05));
        }
        4..=6 => {
            for (m, tiers) in FIGURE_TIERS {
                if m.learned {
                    out.extend(tiers.iter().map(|&t| (m.family, t)));
                }
            }
        }
        _ => return Err(Error::Usage(format!("unknown figure {id} (expected 3, 4, 5 or 6)"))),
    }
    Ok(out)
}

/// Lazily loaded networks and stacks shared across a sweep.
struct Resources<'a> {
    cfg: &'a RunConfig,
    config_path: Option<&'a Path>,
    nets: BTreeMap<(Family, u64), Network<f32>>,
    stacks: BTreeMap<(Family, u64), PatternStack>,
}

impl<'a> Resources<'a> {
    fn new(cfg: &'a RunConfig, config_path: Option<&'a Path>, id: u32) -> Result<Self> {
        let mut r = Resources {
            cfg,
            config_path,
            nets: BTreeMap::new(),
            stacks: BTreeMap::new(),
        };
        // fail before any work if a checkpoint is missing
        for (family, beta) in figure_networks(id)? {
            let net = cfg.load_network(config_path, family, beta)?;
            r.nets.insert((family, beta.to_bits()), net);
        }
        Ok(r)
    }

    fn evaluate(&mut self, method: Method, beta: f64, scenes: &[Scene], noise: Option<&NoiseSpec>) -> Result<Evaluation> {
        let key = (method.family, beta.to_bits());
        if !self.stacks.contains_key(&key) {
            self.stacks.insert(key, self.cfg.stack(method.family, beta)?);
        }
        if method.learned && !self.nets.contains_key(&key) {
            let net = self.cfg.load_network(self.config_path, method.family, beta)?;
            self.nets.insert(key, net);
        }
        let net = if method.learned { self.nets.get(&key) } else { None };
        evaluate(method, net, scenes, &self.stacks[&key], beta, noise, self.cfg.bit_depth)
    }
}

/// Files written by a figure sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureOutput {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

fn method_slug(m: Method) -> String {
    m.tag().to_lowercase().replace(' ', "-")
}

/// One column of an image grid: a method at a tier.
type Column = (Method, f64);

/// Evaluate `columns` on `scenes` and write the grid, per-image PNGs, the
/// scored images and their metric rows.
fn image_figure(
    res: &mut Resources,
    dir: &Path,
    scenes: &[Scene],
    columns: &[Column],
    noise: &[Option<NoiseSpec>],
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    // rows: one per (noise condition, scene); columns: ground truth then methods
    let (h, w) = (crate::SCENE_HEIGHT, crate::SCENE_WIDTH);
    let mut grid = Grid::new(noise.len() * scenes.len(), columns.len() + 1, h, w, 2);
    let mut reports = Vec::new();
    let mut images = Vec::new();
    for (ni, n) in noise.iter().enumerate() {
        for (si, s) in scenes.iter().enumerate() {
            let t: Vec<f32> = s.transmission().iter().map(|&v| f32::from(v)).collect();
            grid.put(ni * scenes.len() + si, 0, &t)?;
        }
        for (ci, &(method, beta)) in columns.iter().enumerate() {
            let e = res.evaluate(method, beta, scenes, n.as_ref())?;
            for (si, (s, g)) in scenes.iter().zip(e.scored()).enumerate() {
                grid.put(ni * scenes.len() + si, ci + 1, &g.g)?;
                let snr = n.map_or("noiseless".to_string(), |n| format!("{}dB", n.snr_db));
                let name = format!(
                    "{}-{}-{}-{}-{snr}.png",
                    s.style,
                    s.label,
                    method_slug(method),
                    tier_slug(beta)
                );
                let path = dir.join("images").join(name);
                crate::image_io::write_png(&path, h, w, &crate::image_io::to_gray8(&g.g))?;
                files.push(path);
            }
            images.extend(e.scored().iter().cloned());
            reports.extend(e.reports);
        }
    }
    let grid_path = dir.join("grid.png");
    grid.write_png(&grid_path)?;
    let recon_path = dir.join("images.recon");
    container::write_recons(&recon_path, &images)?;
    let csv_path = dir.join("metrics.csv");
    metrics::write_reports(&reports, fs::File::create(&csv_path)?)?;
    files.extend([grid_path, recon_path, csv_path]);
    Ok(())
}

/// Summary rows: per condition, method and tier, metric means over
/// [`FIGURE_DIGITS`] block digits and the configured noise realizations.
pub fn summary_rows(cfg: &RunConfig, config_path: Option<&Path>) -> Result<Vec<SummaryRow>> {
    let mut res = Resources::new(cfg, config_path, 6)?;
    let scenes = data::block_digits(&FIGURE_DIGITS)?;
    let mut rows = Vec::new();
    let mut conditions: Vec<(&str, Option<f64>, Vec<Column>)> = vec![(
        "simulation",
        None,
        vec![(Method::CGI_WHITE, 0.05), (Method::DL_WHITE, 0.05), (Method::DL_PINK, 0.05)],
    )];
    let all: Vec<Column> = FIGURE_TIERS
        .iter()
        .flat_map(|(m, tiers)| tiers.iter().map(move |&t| (*m, t)))
        .collect();
    conditions.push(("simulation", Some(4.77), all.clone()));
    conditions.push(("experiment", Some(14.90), all.clone()));
    conditions.push(("experiment", Some(4.77), all));
    for (condition, snr, columns) in conditions {
        let realizations = if snr.is_some() { cfg.noise_realizations } else { 1 };
        for (method, beta) in columns {
            let mut acc = Vec::new();
            for r in 0..realizations {
                let noise = snr.map(|s| cfg.noise(s, condition, r));
                acc.extend(res.evaluate(method, beta, &scenes, noise.as_ref())?.reports);
            }
            rows.push(SummaryRow::mean(condition, snr, method, beta, &acc));
        }
    }
    Ok(rows)
}

/// Metric means for one cell of the summary figure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub condition: String,
    pub snr_db: Option<f64>,
    pub method: String,
    pub beta: f64,
    pub psnr: f64,
    pub vis: f64,
    pub cc: f64,
    pub count: usize,
}

impl SummaryRow {
    fn mean(condition: &str, snr_db: Option<f64>, method: Method, beta: f64, rows: &[QualityReport]) -> Self {
        let n = rows.len() as f64;
        let avg = |f: fn(&QualityReport) -> f64| rows.iter().map(f).sum::<f64>() / n;
        SummaryRow {
            condition: condition.to_string(),
            snr_db,
            method: method.tag(),
            beta,
            psnr: avg(|r| r.psnr),
            vis: avg(|r| r.vis),
            cc: avg(|r| r.cc),
            count: rows.len(),
        }
    }
}

pub fn write_summary<W: std::io::Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["condition", "snr_db", "method", "beta", "psnr", "vis", "cc", "count"])?;
    for r in rows {
        w.write_record([
            r.condition.clone(),
            fmt_f64(r.snr_db.unwrap_or(f64::INFINITY)),
            r.method.clone(),
            fmt_f64(r.beta),
            fmt_f64(r.psnr),
            fmt_f64(r.vis),
            fmt_f64(r.cc),
            r.count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Regenerate the data behind figure `id` under `<run_dir>/figures/fig<id>`.
pub fn figure_sweep(cfg: &RunConfig, config_path: Option<&Path>, id: u32) -> Result<FigureOutput> {
    cfg.validate()?;
    let mut res = Resources::new(cfg, config_path, id)?;
    let dir = cfg.run_dir.join("figures").join(format!("fig{id}"));
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    let all: Vec<Column> = FIGURE_TIERS
        .iter()
        .flat_map(|(m, tiers)| tiers.iter().map(move |&t| (*m, t)))
        .collect();
    match id {
        3 => {
            let digits: Vec<u8> = (1..=9).collect();
            let columns = [(Method::CGI_WHITE, 0.05), (Method::DL_WHITE, 0.05), (Method::DL_PINK, 0.05)];
            for sel in [DatasetSel::HandwritingTrain, DatasetSel::BlockDigits] {
                let scenes = cfg.scenes(sel, &digits)?;
                let sub = dir.join(scenes[0].style.to_string());
                image_figure(&mut res, &sub, &scenes, &columns, &[None], &mut files)?;
            }
        }
        4 => {
            for sel in [DatasetSel::HandwritingTrain, DatasetSel::BlockDigits] {
                let scenes = cfg.scenes(sel, &FIGURE_DIGITS)?;
                let sub = dir.join(scenes[0].style.to_string());
                let noise = [Some(cfg.noise(4.77, "simulation", 0))];
                image_figure(&mut res, &sub, &scenes, &all, &noise, &mut files)?;
            }
        }
        5 => {
            let scenes = cfg.scenes(DatasetSel::BlockDigits, &FIGURE_DIGITS)?;
            let noise = [
                Some(cfg.noise(14.90, "experiment", 0)),
                Some(cfg.noise(4.77, "experiment", 0)),
            ];
            image_figure(&mut res, &dir, &scenes, &all, &noise, &mut files)?;
        }
        6 => {
            drop(res);
            let rows = summary_rows(cfg, config_path)?;
            let path = dir.join("summary.csv");
            write_summary(&rows, fs::File::create(&path)?)?;
            files.push(path);
        }
        _ => unreachable!("figure ids are checked when resources load"),
    }
    write_manifest(cfg)?;
    Ok(FigureOutput { dir, files })
}

/// Seeds, versions and the full configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub pattern_seed: u64,
    pub noise_seed: u64,
    pub train_seed: u64,
    pub checkpoint_format: u32,
    pub container_format: u16,
    pub config: &'a RunConfig,
}

pub fn write_manifest(cfg: &RunConfig) -> Result<PathBuf> {
    let m = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        pattern_seed: cfg.pattern_seed,
        noise_seed: cfg.noise_seed,
        train_seed: cfg.train.seed,
        checkpoint_format: checkpoint::FORMAT_VERSION,
        container_format: container::CONTAINER_VERSION,
        config: cfg,
    };
    fs::create_dir_all(&cfg.run_dir)?;
    let path = cfg.run_dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tier_parsing() {
        assert_eq!(parse_tier("0.8%").unwrap(), 0.008);
        assert_eq!(parse_tier("5%").unwrap(), 0.05);
        assert_eq!(parse_tier("0.5").unwrap(), 0.50);
        assert!(parse_tier("7%").is_err());
        assert!(parse_tier("abc").is_err());
        assert_eq!(tier_label(0.008), "0.8%");
        assert_eq!(tier_label(1.0), "100%");
        for t in TIERS {
            assert_eq!(parse_tier(&tier_label(t)).unwrap(), t);
        }
    }

    #[test]
    fn method_tags() {
        assert_eq!(Method::CGI_WHITE.tag(), "CGI white");
        assert_eq!(Method::DL_PINK.tag(), "DL pink");
    }
}
