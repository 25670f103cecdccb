//! Independent reimplementations checked against the library.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cgidl::data::{load_mnist, resize_to_scene, Scene, Style};
use cgidl::forward::measure;
use cgidl::recon::reconstruct;
use cgidl::speckle::{generate, radial_power_spectrum, Family, PatternSpec, PatternStack};

fn random_stack(h: usize, w: usize, count: usize, seed: u64) -> PatternStack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = PatternSpec {
        height: h,
        width: w,
        count,
        family: Family::White,
        seed,
        binarize: false,
    };
    let data = (0..h * w * count).map(|_| rng.gen::<f32>()).collect();
    PatternStack::from_raw(spec, data).unwrap()
}

/// Big-endian u32 at `at`.
fn be(bytes: &[u8], at: usize) -> usize {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
}

fn gunzip(path: &Path) -> Vec<u8> {
    let mut out = Vec::new();
    flate2::read::GzDecoder::new(std::fs::File::open(path).unwrap())
        .read_to_end(&mut out)
        .unwrap();
    out
}

#[test]
fn mnist_loader_matches_direct_byte_reading() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist");
    let images = gunzip(&dir.join("train-images-idx3-ubyte.gz"));
    let labels = gunzip(&dir.join("train-labels-idx1-ubyte.gz"));
    assert_eq!(be(&images, 0), 0x0803);
    assert_eq!(be(&labels, 0), 0x0801);
    let (rows, cols) = (be(&images, 8), be(&images, 12));
    assert_eq!((rows, cols), (28, 28));

    let n = 50;
    let ds = load_mnist(&dir, n).unwrap();
    assert_eq!(ds.len(), n);
    for (k, scene) in ds.scenes().iter().enumerate() {
        assert_eq!(scene.label, labels[8 + k]);
        let raw = &images[16 + k * 784..16 + (k + 1) * 784];
        let bin: Vec<u8> = raw.iter().map(|&p| u8::from(p >= 128)).collect();
        // 54 rows scaled from 28, centered in 98 columns
        for r in 0..54 {
            for c in 0..98 {
                let want = if (22..76).contains(&c) {
                    let sr = (2 * r + 1) * 28 / 108;
                    let sc = (2 * (c - 22) + 1) * 28 / 108;
                    bin[sr * 28 + sc]
                } else {
                    0
                };
                assert_eq!(scene.transmission()[r * 98 + c], want, "image {k} at ({r},{c})");
            }
        }
    }
}

#[test]
fn resize_preserves_area_fraction() {
    let mut img = vec![0u8; 784];
    for r in 7..21 {
        for c in 7..21 {
            img[r * 28 + c] = 1;
        }
    }
    let s = resize_to_scene(&img, 0, Style::Handwriting).unwrap();
    // a 14x14 square covers a quarter of the 28x28 frame: 27x27 of 54x54
    assert_eq!(s.open_count(), 27 * 27);
}

/// Periodogram via the defining double sum, binned like the library.
fn direct_spectrum(stack: &PatternStack) -> Vec<(f64, f64)> {
    let (h, w) = (stack.height(), stack.width());
    let n = (h * w) as f64;
    let freq = |k: usize, len: usize| {
        if k <= len / 2 {
            k as f64
        } else {
            k as f64 - len as f64
        }
    };
    let mut power = vec![0.0f64; h * w];
    for p in stack.patterns() {
        let mean = p.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
        for ky in 0..h {
            for kx in 0..w {
                let (mut re, mut im) = (0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let v = f64::from(p[y * w + x]) - mean;
                        let a = -2.0 * PI * ((ky * y) as f64 / h as f64 + (kx * x) as f64 / w as f64);
                        re += v * a.cos();
                        im += v * a.sin();
                    }
                }
                power[ky * w + kx] += (re * re + im * im) / n;
            }
        }
        power[0] += n * mean * mean;
    }
    let mut bins: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for ky in 0..h {
        for kx in 0..w {
            let f = (freq(ky, h).powi(2) + freq(kx, w).powi(2)).sqrt();
            let e = bins.entry(f.round() as usize).or_default();
            e.0 += power[ky * w + kx] / stack.count() as f64;
            e.1 += 1;
        }
    }
    bins.into_iter().map(|(k, (s, c))| (k as f64, s / c as f64)).collect()
}

#[test]
fn radial_spectrum_matches_direct_dft() {
    for (h, w, seed) in [(6, 10, 1), (7, 9, 2), (8, 8, 3)] {
        let stack = random_stack(h, w, 3, seed);
        let fast = radial_power_spectrum(&stack).unwrap();
        let slow = direct_spectrum(&stack);
        assert_eq!(fast.len(), slow.len());
        for (a, (f, p)) in fast.iter().zip(&slow) {
            assert_eq!(a.frequency, *f);
            assert!((a.power - p).abs() <= 1e-9 * p.abs().max(1.0), "{h}x{w} bin {f}: {} vs {p}", a.power);
        }
    }
}

#[test]
fn reconstruction_matches_covariance_definition() {
    let (h, w, n) = (5, 7, 40);
    let stack = random_stack(h, w, n, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut t: Vec<u8> = (0..h * w).map(|_| rng.gen_range(0..2)).collect();
    t[0] = 1;
    t[1] = 0;
    let scene = Scene::new(h, w, t.clone(), 0, Style::Block).unwrap();
    let series = measure(&scene, &stack).unwrap();
    for (i, p) in stack.patterns().enumerate() {
        let direct: f64 = p.iter().zip(&t).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
        assert!((series.values[i] - direct).abs() < 1e-12);
    }
    let g = reconstruct(&stack, &series).unwrap();
    // <B I> - <B><I>
    let nf = n as f64;
    let mb = series.values.iter().sum::<f64>() / nf;
    for j in 0..h * w {
        let mi = stack.patterns().map(|p| f64::from(p[j])).sum::<f64>() / nf;
        let mbi = stack.patterns().zip(&series.values).map(|(p, b)| b * f64::from(p[j])).sum::<f64>() / nf;
        let want = mbi - mb * mi;
        assert!((f64::from(g.g[j]) - want).abs() <= 1e-5 * want.abs().max(1e-3), "pixel {j}");
    }
}

#[test]
fn white_stack_mean_is_one_half() {
    let spec = PatternSpec {
        binarize: false,
        ..PatternSpec::scene(Family::White, 5292, 11)
    };
    let s = generate(&spec).unwrap();
    let mean = s.as_slice().iter().map(|&v| f64::from(v)).sum::<f64>() / s.as_slice().len() as f64;
    assert!((mean - 0.5).abs() < 0.01, "{mean}");
}
