//! Command-line front end: pattern generation, simulation, corpus building,
//! training, evaluation and figure sweeps.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cgidl::container;
use cgidl::data::Scene;
use cgidl::forward::{add_noise, measure, NoiseSpec};
use cgidl::image_io::{to_gray8, write_pgm, write_png};
use cgidl::metrics;
use cgidl::pipeline::{self, parse_tier, tier_label, DatasetSel, Method, RunConfig};
use cgidl::recon::reconstruct;
use cgidl::speckle::{self, Family, PatternSpec};
use cgidl::{Error, Result};

#[derive(Parser)]
#[command(name = "cgidl", version, about = "Ghost imaging with pink speckle and a learned reconstructor")]
struct Cli {
    /// TOML run configuration; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,
    /// Directory holding the MNIST IDX files.
    #[arg(long, global = true)]
    mnist_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pattern_seed: Option<u64>,
    #[arg(long, global = true)]
    noise_seed: Option<u64>,
    /// MNIST digits per training corpus.
    #[arg(long, global = true)]
    train_pairs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Target {
    #[arg(long)]
    family: Family,
    /// Sampling ratio tier, e.g. `5%` or `0.008`.
    #[arg(long, value_parser = parse_tier_arg)]
    tier: f64,
}

fn parse_tier_arg(s: &str) -> std::result::Result<f64, String> {
    parse_tier(s).map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Write a pattern stack container.
    GenPatterns {
        #[arg(long)]
        family: Family,
        /// Tier (sets the count from the 54x98 grid).
        #[arg(long, value_parser = parse_tier_arg, conflicts_with = "count")]
        tier: Option<f64>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        no_binarize: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write the radial power spectrum as CSV.
        #[arg(long)]
        spectrum: Option<PathBuf>,
        /// Also export one pattern as a PGM image.
        #[arg(long)]
        pgm: Option<PathBuf>,
        /// Pattern exported by --pgm.
        #[arg(long, default_value_t = 0)]
        pattern_index: usize,
    },
    /// Simulate one scene: bucket series CSV and correlation image.
    Simulate {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value = "block-digits")]
        dataset: DatasetSel,
        #[arg(long)]
        digit: u8,
        /// Detector SNR in dB; noiseless when absent.
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the training corpus for one family and tier.
    BuildCorpus {
        #[command(flatten)]
        target: Target,
        /// Noise injected into the corpus; noiseless when absent.
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the network for one family and tier.
    Train {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Checkpoint path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from an existing checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Score a method on a set of scenes.
    Eval {
        #[command(flatten)]
        target: Target,
        /// Plain correlation reconstruction instead of the trained network.
        #[arg(long)]
        cgi: bool,
        #[arg(long, default_value = "block-digits")]
        dataset: DatasetSel,
        #[arg(long, value_delimiter = ',', default_value = "2,3,5,6")]
        digits: Vec<u8>,
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate the data of figure 3, 4, 5 or 6.
    Figure {
        #[arg(long)]
        id: u32,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = &cli.run_dir {
        cfg.run_dir = d.clone();
    }
    if let Some(d) = &cli.mnist_dir {
        cfg.mnist_dir = d.clone();
    }
    if let Some(s) = cli.pattern_seed {
        cfg.pattern_seed = s;
    }
    if let Some(s) = cli.noise_seed {
        cfg.noise_seed = s;
    }
    if let Some(n) = cli.train_pairs {
        cfg.train_pairs = n;
    }
    Ok(cfg)
}

fn noise_for(cfg: &RunConfig, snr: Option<f64>, condition: &str) -> Option<NoiseSpec> {
    snr.map(|s| cfg.noise(s, condition, 0))
}

fn first_scene(cfg: &RunConfig, sel: DatasetSel, digit: u8) -> Result<Scene> {
    Ok(cfg.scenes(sel, &[digit])?.remove(0))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::GenPatterns {
            family,
            tier,
            count,
            no_binarize,
            out,
            spectrum,
            pgm,
            pattern_index,
        } => {
            let count = match (tier, count) {
                (Some(t), None) => cgidl::recon::pattern_count_for(t, cgidl::SCENE_PIXELS)?,
                (None, Some(c)) => c,
                _ => return Err(Error::Usage("give exactly one of --tier or --count".into())),
            };
            let spec = PatternSpec {
                binarize: !no_binarize,
                ..PatternSpec::scene(family, count, cfg.pattern_seed)
            };
            let stack = speckle::generate(&spec)?;
            container::write_stack(&out, &stack)?;
            if let Some(path) = pgm {
                if pattern_index >= stack.count() {
                    return Err(Error::Usage(format!(
                        "pattern {pattern_index} out of range for {} patterns",
                        stack.count()
                    )));
                }
                let gray: Vec<u8> = stack
                    .pattern(pattern_index)
                    .iter()
                    .map(|&v| (v * 255.0).round() as u8)
                    .collect();
                write_pgm(&path, spec.height, spec.width, &gray)?;
            }
            if let Some(path) = spectrum {
                let curve = speckle::radial_power_spectrum(&stack)?;
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["frequency", "power"])?;
                for b in &curve {
                    w.write_record([metrics::fmt_f64(b.frequency), metrics::fmt_f64(b.power)])?;
                }
                w.flush()?;
                let slope = speckle::spectral_slope(&curve, speckle::mid_band(spec.height, spec.width))?;
                println!("mid-band slope {slope:.4}");
            }
            println!("wrote {} ({})", out.display(), spec.id());
        }
        Command::Simulate {
            target,
            dataset,
            digit,
            snr,
            out,
        } => {
            let scene = first_scene(&cfg, dataset, digit)?;
            let stack = cfg.stack(target.family, target.tier)?;
            let clean = measure(&scene, &stack)?;
            let series = match noise_for(&cfg, snr, "simulate") {
                Some(n) => add_noise(&clean, &n)?,
                None => clean,
            };
            fs::create_dir_all(&out)?;
            series.write_csv(fs::File::create(out.join("buckets.csv"))?)?;
            let g = reconstruct(&stack, &series)?;
            write_png(&out.join("recon.png"), g.height, g.width, &to_gray8(&g.g))?;
            container::write_recons(&out.join("recon.recon"), std::slice::from_ref(&g))?;
            println!("wrote {}", out.display());
        }
        Command::BuildCorpus { target, snr, out } => {
            if snr.is_some() {
                cfg.train_snr_db = snr;
            }
            let corpus = cfg.build_corpus(target.family, target.tier)?;
            let path = out.unwrap_or_else(|| cfg.corpus_path(target.family, target.tier));
            container::write_corpus(&path, &corpus)?;
            pipeline::write_manifest(&cfg)?;
            println!("wrote {} pairs to {}", corpus.pairs.len(), path.display());
        }
        Command::Train {
            target,
            snr,
            epochs,
            batch,
            seed,
            corpus,
            out,
            resume,
        } => {
            if snr.is_some() {
                cfg.train_snr_db = snr;
            }
            if let Some(e) = epochs {
                // keep the decay at the same fraction of the schedule
                let t = &mut cfg.train;
                t.decay_epoch = (t.decay_epoch * e / t.max_epochs).min(e.saturating_sub(1));
                t.max_epochs = e;
            }
            if let Some(b) = batch {
                cfg.train.batch_size = b;
            }
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            let mut paths = cfg.train_paths(target.family, target.tier);
            if let Some(c) = corpus {
                paths.corpus = c;
            }
            if let Some(o) = out {
                paths.checkpoint = o;
            }
            pipeline::write_manifest(&cfg)?;
            pipeline::train_network(&cfg, target.family, target.tier, &paths, resume, |s| {
                eprintln!(
                    "epoch {:>3}  lr {:.0e}  loss {:.6}  iterations {}",
                    s.epoch + 1,
                    s.learning_rate,
                    s.mean_loss,
                    s.iterations
                );
            })?;
            println!("wrote {}", paths.checkpoint.display());
        }
        Command::Eval {
            target,
            cgi,
            dataset,
            digits,
            snr,
            out,
        } => {
            let method = Method {
                family: target.family,
                learned: !cgi,
            };
            let net = if cgi {
                None
            } else {
                Some(cfg.load_network(config_path, target.family, target.tier)?)
            };
            let scenes = cfg.scenes(dataset, &digits)?;
            let stack = cfg.stack(target.family, target.tier)?;
            let noise = noise_for(&cfg, snr, "eval");
            let e = pipeline::evaluate(method, net.as_ref(), &scenes, &stack, target.tier, noise.as_ref(), cfg.bit_depth)?;
            fs::create_dir_all(&out)?;
            metrics::write_reports(&e.reports, fs::File::create(out.join("metrics.csv"))?)?;
            container::write_recons(&out.join("images.recon"), e.scored())?;
            for (s, g) in scenes.iter().zip(e.scored()) {
                let name = format!("{}-{}.png", s.style, s.label);
                write_png(&out.join(name), g.height, g.width, &to_gray8(&g.g))?;
            }
            println!(
                "{} at {}: mean CC {:.4} over {} scenes",
                method.tag(),
                tier_label(target.tier),
                e.mean_cc(),
                e.reports.len()
            );
        }
        Command::Figure { id } => {
            let out = pipeline::figure_sweep(&cfg, config_path, id)?;
            println!("wrote {} files under {}", out.files.len(), out.dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Usage(_)) { 2 } else { 1 })
        }
    }
}
