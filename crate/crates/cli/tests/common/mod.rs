#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use paneval::fid::FeatureMatrix;
use paneval::{write_features, FeatureFormat, ScoreReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// Published comparison rows: (label, similarity, plot, rounded story score).
pub const REFERENCE_ROWS: [(&str, f64, f64, f64); 4] = [
    ("GPT-4 with biography prompt", 0.57, 0.67, 0.62),
    ("GPT-4 without biography prompt", 0.49, 0.66, 0.57),
    ("Llama-2 with biography prompt", 0.52, 0.58, 0.55),
    ("Llama-2 without biography prompt", 0.54, 0.67, 0.60),
];

pub fn paneval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paneval"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Runs a command expected to succeed and parses its JSON report.
pub fn run_report(args: &[&str]) -> ScoreReport {
    let out = paneval(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}: {}",
        out.status.code(),
        stderr(&out)
    );
    ScoreReport::from_json(&stdout(&out)).expect("report parses")
}

pub fn score(report: &ScoreReport, row: usize, key: &str) -> f64 {
    report.rows[row].scores[key]
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn doc(id: &str, embedding: Value) -> Value {
    json!({
        "id": id,
        "title": id,
        "summary_text": format!("summary of {id}"),
        "embedding": embedding,
    })
}

/// Manifest whose pinned unit vectors have the given cosine to the
/// candidate: the target at `similarity`, every reference at `plot`.
pub fn table_manifest(label: &str, similarity: f64, plot: f64, gamma: f64) -> Value {
    let unit = |c: f64, axis: usize| {
        let mut v = [c, 0.0, 0.0];
        v[axis] = (1.0 - c * c).sqrt();
        json!(v)
    };
    json!({
        "gamma": gamma,
        "candidate": doc(label, json!([1.0, 0.0, 0.0])),
        "target": doc("target", unit(similarity, 1)),
        "references": [
            doc("ref-a", unit(plot, 2)),
            doc("ref-b", unit(plot, 2)),
            doc("ref-c", unit(plot, 2)),
        ],
    })
}

pub fn write_json(path: &Path, value: &Value) -> PathBuf {
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_owned()
}

pub fn random_gray(rng: &mut ChaCha8Rng, h: u32, w: u32) -> image::GrayImage {
    image::GrayImage::from_fn(w, h, |_, _| image::Luma([rng.random::<u8>()]))
}

/// Writes `n` PNGs named `img_00.png`, ... into `dir`.
pub fn write_pngs(dir: &Path, n: usize, h: u32, w: u32, seed: u64) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let path = dir.join(format!("img_{i:02}.png"));
            random_gray(&mut rng, h, w).save(&path).unwrap();
            path
        })
        .collect()
}

pub fn random_features(seed: u64, n: usize, d: usize, shift: f64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0) + shift).collect())
        .collect();
    FeatureMatrix::from_rows(&rows).unwrap()
}

pub fn write_feature_file(path: &Path, rows: &FeatureMatrix, format: FeatureFormat) -> PathBuf {
    write_features(rows, path, format).unwrap();
    path.to_owned()
}

pub fn load_report(path: &Path) -> ScoreReport {
    ScoreReport::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}
