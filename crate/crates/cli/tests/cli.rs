//! Command-line behavior on a tiny end-to-end pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;
use tempfile::TempDir;

const TINY_CONFIG: &str = r#"
seed = 11

[data]
n_clips = 4
clip_seconds = 4.0

[vqvae]
corpus = "corpus"
latent_dim = 8
codebook_size = 16
epochs = 2
window_frames = 60

[diffusion]
vqvae = "vqvae/vqvae.json"
pretrain_corpus = "corpus"
model_dim = 16
layers = 1
heads = 2
ff_dim = 32
steps = 40
epochs = 2
batch_size = 4
window = 15

[database]
vqvae = "vqvae/vqvae.json"
gestures = "corpus/gestures"

[sample]
vqvae = "vqvae/vqvae.json"
diffusion = "diffusion/diffusion.json"
duration_seconds = 2.0

[long]
window = 15
overlap = 5

[eval]
real = "corpus"
generated = "corpus"
vqvae = "vqvae/vqvae.json"
"#;

fn gesture(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gesture"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("GESTURE_LLM_ENDPOINT")
        .output()
        .expect("spawn gesture")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = gesture(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_slice(&fs::read(path.as_ref()).unwrap()).unwrap()
}

/// Corpus, codec, pretrained model and database shared by all tests.
fn pipeline() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let p = dir.path();
        fs::write(p.join("run.toml"), TINY_CONFIG).unwrap();
        for args in [
            ["gen-corpus", "--config", "run.toml", "--out", "corpus"],
            ["train-vqvae", "--config", "run.toml", "--out", "vqvae"],
            ["train-diffusion", "--config", "run.toml", "--out", "diffusion"],
            ["build-db", "--config", "run.toml", "--out", "db"],
        ] {
            run_ok(p, &args);
        }
        dir
    })
    .path()
}

/// A case directory under the shared pipeline whose `run.toml` points at
/// the shared artifacts, edited by `patch`.
fn case(name: &str, patch: impl Fn(String) -> String) -> PathBuf {
    let base = pipeline();
    let dir = base.join(name);
    fs::create_dir_all(&dir).unwrap();
    let text = TINY_CONFIG.replace("= \"", "= \"../");
    fs::write(dir.join("run.toml"), patch(text)).unwrap();
    dir
}

#[test]
fn missing_seed_is_rejected() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.toml"), "[data]\nn_clips = 2\n").unwrap();
    let out = gesture(dir.path(), &["gen-corpus", "--config", "run.toml", "--out", "c"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.toml"), "seed = 1\n[data]\nclips = 2\n").unwrap();
    let out = gesture(dir.path(), &["gen-corpus", "--config", "run.toml", "--out", "c"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("clips"));
}

#[test]
fn missing_path_names_the_key() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.toml"), "seed = 1\n").unwrap();
    let out = gesture(dir.path(), &["train-vqvae", "--config", "run.toml", "--out", "v"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("vqvae.corpus"));
}

#[test]
fn seed_flag_alone_is_enough_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    for out in ["a", "b"] {
        run_ok(p, &["gen-corpus", "--seed", "5", "--out", out]);
    }
    let a = fs::read(p.join("a/manifest.json")).unwrap();
    let b = fs::read(p.join("b/manifest.json")).unwrap();
    assert_eq!(a, b);
    let m = read_json(p.join("a/manifest.json"));
    assert_eq!(m["config"]["seed"], 5);
}

#[test]
fn evaluate_identical_sets_gives_zero_fgd() {
    let dir = case("eval_same", |t| t);
    run_ok(&dir, &["evaluate", "--config", "run.toml", "--out", "eval"]);
    let report = read_json(dir.join("eval/report.json"));
    assert!(report["fgd"].as_f64().unwrap().abs() <= 1e-8, "{report}");
    assert_eq!(report["srgr_advisory"], true);
}

#[test]
fn evaluate_empty_directory_errors() {
    let dir = case("eval_empty", |t| t.replace("generated = \"../corpus\"", "generated = \"empty\""));
    fs::create_dir_all(dir.join("empty")).unwrap();
    let out = gesture(&dir, &["evaluate", "--config", "run.toml", "--out", "eval"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no motion files"));
}

#[test]
fn pretrain_only_records_one_phase() {
    let report = read_json(pipeline().join("diffusion/report.json"));
    let phases = report["phases"].as_array().unwrap();
    assert_eq!(phases.len(), 1);
    assert_eq!(phases[0]["name"], "pretrain");
}

#[test]
fn sample_without_transcript_has_empty_plan() {
    let dir = case("plain", |t| t);
    run_ok(&dir, &["sample", "--config", "run.toml", "--out", "s"]);
    let plan = read_json(dir.join("s/plan.json"));
    assert!(plan["spans"].as_array().unwrap().is_empty());
    let report = read_json(dir.join("s/report.json"));
    assert_eq!(report["routing"], "window");
    assert_eq!(report["frames"], 60);
    let motion = read_json(dir.join("s/motion/sample_000.json"));
    assert_eq!(motion["frames"].as_array().unwrap().len(), 60);
}

#[test]
fn long_duration_routes_through_segments_with_keyword_spans() {
    let dir = case("long", |t| {
        t.replace("duration_seconds = 2.0", "duration_seconds = 6.0\ntranscript = \"words.json\"\ndatabase = \"../db/database.json\"\nllm = \"none\"")
    });
    let words: Vec<Value> = ["we", "look", "left", "and", "then", "stop"]
        .iter()
        .enumerate()
        .map(|(i, w)| serde_json::json!({"text": w, "start": i as f64 * 0.8, "end": i as f64 * 0.8 + 0.6}))
        .collect();
    fs::write(dir.join("words.json"), serde_json::to_vec(&words).unwrap()).unwrap();
    let stdout = run_ok(&dir, &["sample", "--config", "run.toml", "--out", "s"]);
    assert!(stdout.contains("keyword fallback"), "{stdout}");
    let report = read_json(dir.join("s/report.json"));
    assert_eq!(report["routing"], "long");
    assert!(report["segments"].as_u64().unwrap() >= 3);
    assert_eq!(report["assignment_source"], "fallback");
    let plan = read_json(dir.join("s/plan.json"));
    assert!(!plan["spans"].as_array().unwrap().is_empty());
}
