//! Acceptance gate. Each test checks one criterion and prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cgidl::data::{block_digits, Scene, Style};
use cgidl::forward::{measure, measure_snr, noise_component, NoiseSpec};
use cgidl::metrics;
use cgidl::nn::layers::{relu_backward, relu_forward, BatchNorm2d, Conv2d, Dense, Dropout};
use cgidl::nn::{
    iteration_plan, loss_mse, sgdm_step, sgdm_update, train, Arch, DenseInit, Gradients, Mode, Network,
    NetworkParams, TrainConfig, TrainingSample,
};
use cgidl::pipeline::{self, figure_networks, tier_label, Method, RunConfig, TargetMode};
use cgidl::recon::{ground_truth_from_values, ReconImage, Source};
use cgidl::speckle::{generate, mid_band, neighbor_correlation, radial_power_spectrum, spectral_slope, Family, PatternSpec};

fn report(n: &str, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn mnist_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

// ---------------------------------------------------------------- criterion 1

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Norm-wise relative error between analytic and numeric gradients.
fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` with respect to every entry of `x`.
fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let mut xs = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xs[i];
            xs[i] = orig + h;
            let up = f(&xs);
            xs[i] = orig - h;
            let down = f(&xs);
            xs[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const INSTANCES: usize = 20;

fn check_conv(rng: &mut ChaCha8Rng) -> f64 {
    let (ci, co, h, w, b) = (rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(2..6), rng.gen_range(2..6), 2);
    let mut conv = Conv2d::<f64>::new(ci, co, h, w, rng);
    conv.bias = uniform(rng, co);
    let x = uniform(rng, b * ci * h * w);
    let u = uniform(rng, b * co * h * w);
    let (mut gw, mut gb, mut gx) = (vec![0.0; conv.weight.len()], vec![0.0; co], vec![0.0; x.len()]);
    conv.backward(&x, &u, b, &mut gw, &mut gb, Some(&mut gx));
    let nx = numeric_grad(&x, |x| dot(&conv.forward(x, b), &u));
    let nw = numeric_grad(&conv.weight.clone(), |wt| {
        let c = Conv2d { weight: wt.to_vec(), ..conv.clone() };
        dot(&c.forward(&x, b), &u)
    });
    let nb = numeric_grad(&conv.bias.clone(), |bs| {
        let c = Conv2d { bias: bs.to_vec(), ..conv.clone() };
        dot(&c.forward(&x, b), &u)
    });
    rel_err(&gx, &nx).max(rel_err(&gw, &nw)).max(rel_err(&gb, &nb))
}

fn check_bn(rng: &mut ChaCha8Rng) -> f64 {
    let (c, s, b) = (rng.gen_range(1..4), rng.gen_range(2..10), rng.gen_range(2..5));
    let mut bn = BatchNorm2d::<f64>::new(c, s);
    bn.gamma = uniform(rng, c);
    bn.beta = uniform(rng, c);
    let x = uniform(rng, b * c * s);
    let u = uniform(rng, b * c * s);
    let (_, cache) = bn.clone().forward_train(&x, b);
    let (mut gg, mut gb) = (vec![0.0; c], vec![0.0; c]);
    let gx = bn.backward(&cache, &u, b, &mut gg, &mut gb);
    let nx = numeric_grad(&x, |x| dot(&bn.clone().forward_train(x, b).0, &u));
    let ng = numeric_grad(&bn.gamma.clone(), |g| {
        let mut m = BatchNorm2d { gamma: g.to_vec(), ..bn.clone() };
        dot(&m.forward_train(&x, b).0, &u)
    });
    let nb = numeric_grad(&bn.beta.clone(), |be| {
        let mut m = BatchNorm2d { beta: be.to_vec(), ..bn.clone() };
        dot(&m.forward_train(&x, b).0, &u)
    });
    rel_err(&gx, &nx).max(rel_err(&gg, &ng)).max(rel_err(&gb, &nb))
}

fn check_relu(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.gen_range(4..40);
    // keep inputs away from the kink
    let x: Vec<f64> = uniform(rng, n)
        .into_iter()
        .map(|v| if v.abs() < 1e-3 { v + 0.01 } else { v })
        .collect();
    let u = uniform(rng, n);
    let ga = relu_backward(&relu_forward(&x), &u);
    let nx = numeric_grad(&x, |x| dot(&relu_forward(x), &u));
    rel_err(&ga, &nx)
}

fn check_dropout(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.gen_range(4..40);
    let seed = rng.gen::<u64>();
    let d = Dropout { rate: 0.2 };
    let x = uniform(rng, n);
    let u = uniform(rng, n);
    let (_, mask) = d.forward_train(&x, &mut ChaCha8Rng::seed_from_u64(seed));
    let ga = Dropout::backward(&mask, &u);
    let nx = numeric_grad(&x, |x| dot(&d.forward_train(x, &mut ChaCha8Rng::seed_from_u64(seed)).0, &u));
    rel_err(&ga, &nx)
}

fn check_dense(rng: &mut ChaCha8Rng) -> f64 {
    let (i, o, b) = (rng.gen_range(1..8), rng.gen_range(1..8), rng.gen_range(1..4));
    let d = Dense {
        inputs: i,
        outputs: o,
        weight: uniform(rng, i * o),
        bias: uniform(rng, o),
    };
    let x = uniform(rng, b * i);
    let u = uniform(rng, b * o);
    let (mut gw, mut gb, mut gx) = (vec![0.0; i * o], vec![0.0; o], vec![0.0; b * i]);
    d.backward(&x, &u, b, &mut gw, &mut gb, Some(&mut gx));
    let nx = numeric_grad(&x, |x| dot(&d.forward(x, b), &u));
    let nw = numeric_grad(&d.weight.clone(), |w| dot(&Dense { weight: w.to_vec(), ..d.clone() }.forward(&x, b), &u));
    let nb = numeric_grad(&d.bias.clone(), |bs| dot(&Dense { bias: bs.to_vec(), ..d.clone() }.forward(&x, b), &u));
    rel_err(&gx, &nx).max(rel_err(&gw, &nw)).max(rel_err(&gb, &nb))
}

fn check_loss(rng: &mut ChaCha8Rng) -> f64 {
    let n = rng.gen_range(1..20);
    let g = uniform(rng, n);
    let x = uniform(rng, n);
    let norm = rng.gen_range(0.2..2.0);
    let (_, ga) = loss_mse(&g, &x, norm).unwrap();
    let ng = numeric_grad(&g, |g| loss_mse(g, &x, norm).unwrap().0);
    rel_err(&ga, &ng)
}

/// Two blocks on an 8×8 input, measured over the whole parameter vector: a
/// conv bias feeding batch norm has an identically zero gradient, so a
/// per-tensor ratio would compare roundoff with roundoff.
fn check_network(rng: &mut ChaCha8Rng) -> f64 {
    let arch = Arch {
        height: 8,
        width: 8,
        channels: vec![rng.gen_range(1..4), rng.gen_range(1..3)],
        dropout: 0.2,
        dense_init: DenseInit::He,
    };
    let mut net = Network::<f64>::new(arch, rng.gen()).unwrap();
    let b = 3;
    let x = uniform(rng, b * 64);
    let u = uniform(rng, b * 64);
    let seed = rng.gen::<u64>();
    let (_, cache) = net.forward(&x, b, Mode::Train, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let g = net.backward(&cache.unwrap(), &u).unwrap();
    let mut numeric = Vec::new();
    for t in 0..g.tensors.len() {
        let theta = net.params()[t].clone();
        let num = numeric_grad(&theta, |p| {
            let mut n = net.clone();
            n.params_mut()[t].copy_from_slice(p);
            let (y, _) = n.forward(&x, b, Mode::Train, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            dot(&y, &u)
        });
        numeric.extend(num);
    }
    let analytic: Vec<f64> = g.tensors.concat();
    rel_err(&analytic, &numeric)
}

#[test]
fn criterion_1_gradient_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let checks: [(&str, fn(&mut ChaCha8Rng) -> f64); 7] = [
        ("conv", check_conv),
        ("batchnorm", check_bn),
        ("relu", check_relu),
        ("dropout", check_dropout),
        ("dense", check_dense),
        ("loss", check_loss),
        ("network", check_network),
    ];
    let mut worst = BTreeMap::new();
    for (name, f) in checks {
        let w = (0..INSTANCES).map(|_| f(&mut rng)).fold(0.0f64, f64::max);
        worst.insert(name, w);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let max = worst.values().copied().fold(0.0f64, f64::max);
    let pass = max <= 1e-4 && elapsed < 60.0;
    report(
        "1",
        pass,
        format!("max relative error {max:.2e} over {INSTANCES} instances per layer in {elapsed:.1}s; {worst:?}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 2

/// `θ_{ℓ+1} = θ_ℓ - α g_ℓ + γ (θ_ℓ - θ_{ℓ-1})`, with `θ_{-1} = θ_0`.
fn recurrence(theta0: f64, grads: &[f64], alpha: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![theta0];
    let mut prev = theta0;
    let mut cur = theta0;
    for (g, a) in grads.iter().zip(alpha) {
        let next = cur - a * g + gamma * (cur - prev);
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

#[test]
fn criterion_2_optimizer_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for case in 0..60 {
        let gamma = match case % 3 {
            0 => 0.0,
            _ => rng.gen_range(0.0..0.99),
        };
        let len = rng.gen_range(1..60);
        let grads: Vec<f64> = (0..len)
            .map(|i| if case % 4 == 1 && i % 2 == 1 { 0.0 } else { rng.gen_range(-5.0..5.0) })
            .collect();
        let alpha: Vec<f64> = (0..len).map(|i| if i < len / 2 { 1e-3 } else { 1e-4 }).collect();
        let theta0 = rng.gen_range(-2.0..2.0);
        let want = recurrence(theta0, &grads, &alpha, gamma);
        let mut theta = [theta0];
        let mut step = [0.0];
        for (i, (g, a)) in grads.iter().zip(&alpha).enumerate() {
            sgdm_update(&mut theta, &mut step, &[*g], *a, gamma);
            let scale = want[i + 1].abs().max(1.0);
            worst = worst.max((theta[0] - want[i + 1]).abs() / scale);
        }
        cases += 1;
    }

    // the full optimizer path on a network, with γ = 0.9, a zero-gradient
    // iteration and the learning-rate step at the decay epoch
    let arch = Arch {
        height: 2,
        width: 2,
        channels: vec![1],
        dropout: 0.0,
        dense_init: DenseInit::He,
    };
    let net = Network::<f64>::new(arch, 3).unwrap();
    let config = TrainConfig {
        max_epochs: 4,
        decay_epoch: 2,
        ..TrainConfig::default()
    };
    let mut params = NetworkParams::new(net.clone());
    let n_params: usize = net.params().iter().map(|p| p.len()).sum();
    let epochs = [0usize, 1, 1, 2, 3, 3];
    let flat0: Vec<f64> = net.params().iter().flat_map(|p| p.iter().copied()).collect();
    let mut traces: Vec<Vec<f64>> = vec![Vec::new(); n_params];
    for (it, &epoch) in epochs.iter().enumerate() {
        let mut g = Gradients::zeros_like(&params.network);
        if it != 2 {
            for t in g.tensors.iter_mut().flatten() {
                *t = rng.gen_range(-1.0..1.0);
            }
        }
        for (k, v) in g.tensors.iter().flatten().enumerate() {
            traces[k].push(*v);
        }
        sgdm_step(&mut params, &g, &config, epoch).unwrap();
    }
    let alpha: Vec<f64> = epochs.iter().map(|&e| config.learning_rate(e)).collect();
    let flat: Vec<f64> = params.network.params().iter().flat_map(|p| p.iter().copied()).collect();
    for k in 0..n_params {
        let want = recurrence(flat0[k], &traces[k], &alpha, config.momentum);
        worst = worst.max((flat[k] - want[epochs.len()]).abs() / want[epochs.len()].abs().max(1.0));
    }
    let iter_ok = params.optimizer.iteration == epochs.len() as u64;
    let pass = worst <= 1e-13 && iter_ok;
    report(
        "2",
        pass,
        format!("{cases} scalar traces and {n_params} network parameters; max deviation {worst:.1e}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 3

#[test]
fn criterion_3_iteration_count() {
    let planned = iteration_plan(10000, 32, 100).unwrap().total();
    // run the trainer itself on 10000 tiny pairs
    let arch = Arch {
        height: 1,
        width: 2,
        channels: vec![1],
        dropout: 0.2,
        dense_init: DenseInit::Zeros,
    };
    let samples: Vec<TrainingSample> = (0..10000)
        .map(|i| {
            let v = (i % 10) as f32 / 10.0;
            TrainingSample {
                input: vec![v, 1.0 - v],
                target: vec![1.0, 0.0],
                normalizer: 1.0,
            }
        })
        .collect();
    let mut params = NetworkParams::new(Network::new(arch, 0).unwrap());
    let history = train(&mut params, &samples, &TrainConfig::default(), |_, _| Ok(())).unwrap();
    let ran = params.optimizer.iteration;
    let pass = planned == 31200 && ran == 31200 && history.len() == 100;
    report("3", pass, format!("planned {planned}, executed {ran} iterations over {} epochs", history.len()));
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_spectral_property() {
    let start = Instant::now();
    let spec = |family| PatternSpec {
        binarize: false,
        ..PatternSpec::scene(family, 256, 4)
    };
    let pink = generate(&spec(Family::Pink)).unwrap();
    let white = generate(&spec(Family::White)).unwrap();
    let band = mid_band(54, 98);
    let ps = spectral_slope(&radial_power_spectrum(&pink).unwrap(), band).unwrap();
    let ws = spectral_slope(&radial_power_spectrum(&white).unwrap(), band).unwrap();
    let nc = neighbor_correlation(&pink).unwrap();
    let binary = generate(&PatternSpec::scene(Family::Pink, 256, 4)).unwrap();
    let nc_bin = neighbor_correlation(&binary).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = (ps + 1.0).abs() <= 0.15 && ws.abs() <= 0.15 && nc > 0.0 && nc_bin > 0.0 && elapsed < 60.0;
    report(
        "4",
        pass,
        format!(
            "pink slope {ps:.3}, white slope {ws:.3}, pink neighbor correlation {nc:.3} (binarized {nc_bin:.3}) in {elapsed:.1}s"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 5

struct Brute {
    mse: f64,
    psnr: f64,
    vis: f64,
    cc: f64,
}

/// Straight-from-the-definition metrics with plain loops.
fn brute_metrics(g: &[f64], t: &[u8], k: u32) -> Brute {
    let (mut so, mut no, mut sb, mut nb) = (0.0, 0.0, 0.0, 0.0);
    for (v, &m) in g.iter().zip(t) {
        if m == 1 {
            so += v;
            no += 1.0;
        } else {
            sb += v;
            nb += 1.0;
        }
    }
    let (go, gb) = (so / no, sb / nb);
    let x: Vec<f64> = t.iter().map(|&m| if m == 1 { go } else { gb }).collect();
    let n = g.len() as f64;
    let mut mse = 0.0;
    for i in 0..g.len() {
        let d = (g[i] - x[i]) / go;
        mse += d * d;
    }
    mse /= n;
    let peak = (2f64.powi(k as i32) - 1.0).powi(2);
    let psnr = 10.0 * (peak / mse).log10();
    let vis = (go - gb) / (go + gb);
    let mg = g.iter().sum::<f64>() / n;
    let mx = x.iter().sum::<f64>() / n;
    let (mut cov, mut vg, mut vx) = (0.0, 0.0, 0.0);
    for i in 0..g.len() {
        cov += (g[i] - mg) * (x[i] - mx);
        vg += (g[i] - mg) * (g[i] - mg);
        vx += (x[i] - mx) * (x[i] - mx);
    }
    let cc = cov / (vg * vx).sqrt();
    Brute { mse, psnr, vis, cc }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn criterion_5_metric_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut worst_cc) = (0.0f64, 0.0f64);
    let mut count = 0;
    while count < 200 {
        let (h, w) = (rng.gen_range(2..9), rng.gen_range(2..9));
        let t: Vec<u8> = (0..h * w).map(|_| rng.gen_range(0..2)).collect();
        let Ok(scene) = Scene::new(h, w, t.clone(), 1, Style::Block) else { continue };
        let gv: Vec<f32> = (0..h * w).map(|_| rng.gen_range(0.05f32..3.0)).collect();
        let g = ReconImage::new(h, w, gv, 0.05, Source::RawCgi).unwrap();
        let values = g.values_f64();
        let x = ground_truth_from_values(&scene, &values).unwrap();
        let b = brute_metrics(&values, &t, 8);
        worst = worst
            .max(rel(metrics::mse(&g, &x).unwrap(), b.mse))
            .max(rel(metrics::psnr(&g, &x, 8).unwrap(), b.psnr))
            .max(rel(metrics::vis(&g, &scene).unwrap(), b.vis));
        worst_cc = worst_cc.max(rel(metrics::cc(&g, &x).unwrap(), b.cc));
        count += 1;
    }
    let pass = worst <= 1e-9 && worst_cc <= 1e-12;
    report(
        "5",
        pass,
        format!("{count} random images: max relative error {worst:.1e} (MSE/PSNR/VIS), {worst_cc:.1e} (CC)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 6

#[test]
fn criterion_6_snr_calibration() {
    let scenes = block_digits(&[2, 8]).unwrap();
    let mut worst = 0.0f64;
    let mut checks = 0;
    for count in [1000, 5292] {
        for family in [Family::White, Family::Pink] {
            let stack = generate(&PatternSpec::scene(family, count, 6)).unwrap();
            for scene in &scenes {
                let clean = measure(scene, &stack).unwrap();
                for target in [4.77, 14.90] {
                    for seed in 0..3 {
                        let noise = noise_component(&clean, &NoiseSpec::new(target, seed)).unwrap();
                        let got = measure_snr(&clean, &noise).unwrap();
                        worst = worst.max((got - target).abs());
                        checks += 1;
                    }
                }
            }
        }
    }
    let pass = worst <= 0.2;
    report("6", pass, format!("{checks} series at N in {{1000, 5292}}: max deviation {worst:.3} dB"));
    assert!(pass);
}

// ---------------------------------------------------------------- criterion 7

fn desk_config(run_dir: &Path) -> RunConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    RunConfig {
        run_dir: run_dir.to_path_buf(),
        mnist_dir: mnist_dir(),
        ..RunConfig::load(&path).unwrap()
    }
}

/// Mean CC over the scenes, averaged over the given noise realizations.
fn mean_cc(
    cfg: &RunConfig,
    method: Method,
    net: Option<&Network<f32>>,
    beta: f64,
    scenes: &[Scene],
    noise: &[Option<NoiseSpec>],
) -> f64 {
    let stack = cfg.stack(method.family, beta).unwrap();
    let total: f64 = noise
        .iter()
        .map(|n| {
            pipeline::evaluate(method, net, scenes, &stack, beta, n.as_ref(), cfg.bit_depth)
                .unwrap()
                .mean_cc()
        })
        .sum();
    total / noise.len() as f64
}

#[test]
fn criterion_7_desk_ordering() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = desk_config(tmp.path());
    let mut nets = BTreeMap::new();
    for (family, beta) in [(Family::Pink, 0.05), (Family::White, 0.05), (Family::Pink, 0.008), (Family::White, 0.5)] {
        let t = Instant::now();
        let params = pipeline::train_network(&cfg, family, beta, &cfg.train_paths(family, beta), false, |_| {}).unwrap();
        eprintln!("trained {family} {} in {:.0}s", tier_label(beta), t.elapsed().as_secs_f64());
        nets.insert((family, tier_label(beta)), params.network);
    }
    let net = |f: Family, beta: f64| nets.get(&(f, tier_label(beta)));
    let blocks = block_digits(&pipeline::FIGURE_DIGITS).unwrap();
    let clean = [None];
    let noisy: Vec<Option<NoiseSpec>> = (0..cfg.noise_realizations.max(3))
        .map(|r| Some(cfg.noise(4.77, "acceptance", r)))
        .collect();

    let a_pink = mean_cc(&cfg, Method::DL_PINK, net(Family::Pink, 0.05), 0.05, &blocks, &clean);
    let a_white = mean_cc(&cfg, Method::DL_WHITE, net(Family::White, 0.05), 0.05, &blocks, &clean);
    let a_cgi = mean_cc(&cfg, Method::CGI_WHITE, None, 0.05, &blocks, &clean);
    let b_pink = mean_cc(&cfg, Method::DL_PINK, net(Family::Pink, 0.008), 0.008, &blocks, &noisy);
    let b_cgi = mean_cc(&cfg, Method::CGI_WHITE, None, 1.0, &blocks, &noisy);
    let c_pink = mean_cc(&cfg, Method::DL_PINK, net(Family::Pink, 0.05), 0.05, &blocks, &noisy);
    let c_white = mean_cc(&cfg, Method::DL_WHITE, net(Family::White, 0.5), 0.5, &blocks, &noisy);

    let a = a_pink >= a_white && a_white > a_cgi;
    let b = b_pink > b_cgi;
    let c = c_pink > c_white;
    let elapsed = start.elapsed().as_secs_f64() / 60.0;
    let within = elapsed <= 120.0;
    report(
        "7",
        a && b && c && within,
        format!(
            "(a) noiseless 5%: DL pink {a_pink:.3} >= DL white {a_white:.3} > CGI white {a_cgi:.3} [{}]; \
             (b) 4.77 dB: DL pink 0.8% {b_pink:.3} > CGI white 100% {b_cgi:.3} [{}]; \
             (c) 4.77 dB: DL pink 5% {c_pink:.3} > DL white 50% {c_white:.3} [{}]; {} realizations, {elapsed:.0} min",
            ok(a),
            ok(b),
            ok(c),
            noisy.len()
        ),
    );
    assert!(a && b && c && within);
}

fn ok(v: bool) -> &'static str {
    if v {
        "ok"
    } else {
        "violated"
    }
}

// ---------------------------------------------------------------- criterion 8

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_8_figure_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        run_dir: tmp.path().to_path_buf(),
        mnist_dir: mnist_dir(),
        train_pairs: 64,
        noise_realizations: 2,
        target: TargetMode::Mask,
        arch: Arch {
            channels: vec![2, 1],
            ..Arch::default()
        },
        train: TrainConfig {
            max_epochs: 2,
            decay_epoch: 1,
            ..TrainConfig::default()
        },
        ..RunConfig::default()
    };
    let mut nets = Vec::new();
    for id in [3, 4, 5, 6] {
        for n in figure_networks(id).unwrap() {
            if !nets.contains(&n) {
                nets.push(n);
            }
        }
    }
    for &(family, beta) in &nets {
        pipeline::train_network(&cfg, family, beta, &cfg.train_paths(family, beta), false, |_| {}).unwrap();
    }
    let mut identical = true;
    let mut files = 0;
    for id in [3, 4, 5, 6] {
        let first = pipeline::figure_sweep(&cfg, None, id).unwrap();
        let a = snapshot(&first.dir);
        let second = pipeline::figure_sweep(&cfg, None, id).unwrap();
        let b = snapshot(&second.dir);
        identical &= !a.is_empty() && a == b;
        files += a.len();
    }
    report(
        "8",
        identical,
        format!("figures 3-6 rerun with one config: {files} files, byte-identical = {identical}"),
    );
    assert!(identical);
}
