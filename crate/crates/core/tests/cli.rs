use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mnist_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

fn cgidl(run_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgidl"))
        .arg("--run-dir")
        .arg(run_dir)
        .arg("--mnist-dir")
        .arg(mnist_dir())
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_figure_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = cgidl(dir.path(), &["figure", "--id", "9"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn figure_without_checkpoint_names_the_training_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = cgidl(dir.path(), &["figure", "--id", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("missing checkpoint"), "{msg}");
    assert!(msg.contains("cgidl") && msg.contains("train --family"), "{msg}");
}

#[test]
fn bad_tier_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.stack");
    let o = cgidl(dir.path(), &["gen-patterns", "--family", "pink", "--tier", "-3%", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn gen_patterns_writes_stack_spectrum_and_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pink.stack");
    let csv = dir.path().join("spectrum.csv");
    let pgm = dir.path().join("p.pgm");
    let o = cgidl(
        dir.path(),
        &[
            "gen-patterns",
            "--family",
            "pink",
            "--count",
            "64",
            "--no-binarize",
            "--out",
            out.to_str().unwrap(),
            "--spectrum",
            csv.to_str().unwrap(),
            "--pgm",
            pgm.to_str().unwrap(),
        ],
    )
    ;
    assert!(o.status.success(), "{}", stderr(&o));
    let stack = cgidl::container::read_stack(&out).unwrap();
    assert_eq!(stack.count(), 64);
    assert!(std::fs::read_to_string(&csv).unwrap().lines().count() > 10);
    assert!(std::fs::read(&pgm).unwrap().starts_with(b"P5\n98 54\n255\n"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("slope"));
}

#[test]
fn simulate_writes_buckets_and_image() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = cgidl(
        dir.path(),
        &["simulate", "--family", "white", "--tier", "1%", "--digit", "5", "--snr", "4.77", "--out", out.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let buckets = std::fs::read_to_string(out.join("buckets.csv")).unwrap();
    assert_eq!(buckets.lines().count(), 1 + 53);
    assert!(out.join("recon.png").exists());
    let recons = cgidl::container::read_recons(&out.join("recon.recon")).unwrap();
    assert_eq!(recons.len(), 1);
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "train_pairs = 10\nlearning_rate = 3\n").unwrap();
    let o = cgidl(dir.path(), &["--config", cfg.to_str().unwrap(), "figure", "--id", "3"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));
}

#[test]
fn shipped_configs_load() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let desk = cgidl::pipeline::RunConfig::load(&root.join("desk.toml")).unwrap();
    assert_eq!((desk.train_pairs, desk.train.max_epochs), (2000, 30));
    let full = cgidl::pipeline::RunConfig::load(&root.join("full.toml")).unwrap();
    let plan = cgidl::nn::iteration_plan(full.train_pairs, full.train.batch_size, full.train.max_epochs).unwrap();
    assert_eq!(plan.total(), 31200);
    assert_eq!(full.arch.channels, vec![16, 32, 32, 1]);
}
