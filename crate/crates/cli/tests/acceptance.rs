//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any fails.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dyntopic::pipeline::{fit_two_layer, ModelSettings, TwoLayerModel};
use dyntopic::synth::matched_accuracy;
use dyntopic::validation::SubjectMatch;
use dyntopic::*;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn dyntopic(args: &[&str]) -> std::result::Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dyntopic"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("dyntopic {args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn read_json(path: &Path) -> std::result::Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Synthesizes the standard planted corpus and runs the whole pipeline on it
/// with [2, 8] sweeps in both layers.
fn planted_pipeline(root: &Path, out: &str) -> std::result::Result<Duration, String> {
    let synth = root.join("synth");
    if !synth.join("synth/manifest.json").is_file() {
        dyntopic(&["synth", "--set", "seed=1", "--out", synth.to_str().unwrap()])?;
    }
    let corpus = format!("corpus={}", synth.join("synth/corpus.jsonl").display());
    let clock = Instant::now();
    dyntopic(&[
        "pipeline",
        "--set",
        &corpus,
        "--set",
        "window_k=2-8",
        "--set",
        "dynamic_k=2-8",
        "--set",
        "seed=1",
        "--out",
        root.join(out).to_str().unwrap(),
    ])?;
    Ok(clock.elapsed())
}

fn planted_recovery(root: &Path) -> Check {
    let elapsed = planted_pipeline(root, "run_a")?;
    let truth = read_json(&root.join("synth/synth/truth.json"))?;
    let speeches = read_json(&root.join("run_a/timeseries/dynamic_speeches.json"))?;
    let topics = speeches.as_array().unwrap();
    let theme_of = |id: &str| -> usize {
        let topic = truth["doc_topic"][id].as_u64().unwrap() as usize;
        truth["topic_theme"][topic].as_u64().unwrap() as usize
    };
    let (mut planted, mut found) = (vec![], vec![]);
    for t in topics {
        for id in t["speeches"].as_array().unwrap() {
            planted.push(theme_of(id.as_str().unwrap()));
            found.push(t["topic"].as_u64().unwrap() as usize);
        }
    }
    let n_docs = truth["doc_topic"].as_object().unwrap().len();
    let acc = matched_accuracy(&planted, &found);
    ensure!(topics.len() == 4, "k' = {}, expected 4", topics.len());
    ensure!(planted.len() == n_docs, "{} of {n_docs} documents reached a dynamic topic", planted.len());
    ensure!(acc >= 0.9, "matched accuracy {acc:.3}");
    ensure!(elapsed < Duration::from_secs(120), "pipeline took {elapsed:.1?}");
    Ok(format!("k' = 4, {n_docs} docs, matched accuracy {acc:.3}, {elapsed:.2?}"))
}

fn planted_factors(seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, m, k) = (30, 20, 3);
    let w = Array2::from_shape_fn((n, k), |(i, j)| {
        if i % k == j { rng.gen_range(1.0..2.0) } else { rng.gen_range(0.0..0.2) }
    });
    let h = Array2::from_shape_fn((k, m), |(j, c)| {
        if c * k / m == j { rng.gen_range(1.0..2.0) } else { rng.gen_range(0.0..0.1) }
    });
    (w, h)
}

fn nmf_recovery() -> Check {
    let (w_star, h_star) = planted_factors(7);
    let a = w_star.dot(&h_star);
    let fit = factorize(&CsrMatrix::from_dense(&a), 3, &NmfConfig::default()).map_err(|e| e.to_string())?;
    let rel = fit.final_error() / a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let worst = oracle::best_row_cosines(&h_star, &fit.h).into_iter().fold(1.0f64, f64::min);
    ensure!(rel <= 1e-3, "relative error {rel:e}");
    ensure!(worst >= 0.95, "worst row cosine {worst}");
    Ok(format!("relative error {rel:.1e}, worst row cosine {worst:.4}"))
}

fn nndsvd_oracle_agreement() -> Check {
    let mut worst = 0.0f64;
    for (i, (a, k)) in oracle::nndsvd_fixtures().into_iter().enumerate() {
        let sparse = CsrMatrix::from_dense(&a);
        let (w, h) = nndsvd_init(&sparse, k).map_err(|e| e.to_string())?;
        let (w_ref, h_ref) = oracle::nndsvd_oracle(&a, k);
        let d = oracle::max_abs_diff(&w, &w_ref).max(oracle::max_abs_diff(&h, &h_ref));
        ensure!(d <= 1e-8, "fixture {i}: max entry difference {d:e}");
        worst = worst.max(d);
        let (w2, h2) = nndsvd_init(&sparse, k).map_err(|e| e.to_string())?;
        let same = |x: &Array2<f64>, y: &Array2<f64>| x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits());
        ensure!(same(&w, &w2) && same(&h, &h2), "fixture {i}: repeated runs differ");
    }
    Ok(format!("5 fixtures, max entry difference {worst:.1e}, bitwise repeatable"))
}

fn space(entries: &[(&str, Vec<f64>)]) -> EmbeddingSpace {
    let dims = entries[0].1.len();
    EmbeddingSpace::new(dims, entries.iter().map(|(t, v)| (t.to_string(), v.clone()))).unwrap()
}

fn coherence() -> Check {
    // cos(a,b) = 0, cos(a,c) = cos(b,c) = 1/sqrt2, cos(a,d) = -1
    let s = space(&[
        ("a", vec![1.0, 0.0]),
        ("b", vec![0.0, 3.0]),
        ("c", vec![1.0, 1.0]),
        ("d", vec![-2.0, 0.0]),
    ]);
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let cases: [(&[&str], f64); 3] = [
        (&["a", "b", "c"], 2.0 * r2 / 3.0),
        (&["a", "d"], -1.0),
        (&["a", "b", "c", "d"], (0.0 + r2 - 1.0 + r2 + 0.0 - r2) / 6.0),
    ];
    for (terms, expected) in cases {
        let got = topic_coherence(terms, &s).score;
        ensure!((got - expected).abs() <= 1e-12, "{terms:?}: {got} vs {expected}");
    }
    let terms: Vec<String> = ["a", "b", "c", "d"].iter().map(|t| t.to_string()).collect();
    let model = TopicModelFactors {
        w: Array2::zeros((1, 2)),
        // top-2 descriptors: [a, c] and [b, d]
        h: ndarray::array![[3.0, 0.0, 1.0, 0.0], [0.0, 2.0, 0.0, 1.0]],
        k: 2,
        error_trace: vec![0.0],
        iterations: 0,
    };
    let mc = model_coherence(&model, &terms, 2, &s).map_err(|e| e.to_string())?.score;
    ensure!((mc - (r2 + 0.0) / 2.0).abs() <= 1e-12, "model coherence {mc}");

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..100 {
        let dims = rng.gen_range(2..8);
        let n = rng.gen_range(2..12);
        let entries: Vec<(String, Vec<f64>)> = (0..n)
            .map(|i| (format!("w{i}"), (0..dims).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let s = EmbeddingSpace::new(dims, entries.clone()).unwrap();
        let mut terms: Vec<String> = entries.into_iter().map(|(t, _)| t).collect();
        let base = topic_coherence(&terms, &s).score;
        ensure!((-1.0..=1.0).contains(&base), "trial {trial}: coherence {base} out of range");
        terms.shuffle(&mut rng);
        let shuffled = topic_coherence(&terms, &s).score;
        ensure!((shuffled - base).abs() <= 1e-12, "trial {trial}: order changed {base} to {shuffled}");
    }
    Ok("hand fixtures within 1e-12, 100 permutation trials bounded and invariant".into())
}

fn conservation_of(model: &TwoLayerModel) -> std::result::Result<(), String> {
    let mut n_prime = 0;
    for wm in &model.window_models {
        ensure!(wm.assignments.len() == wm.speech_ids.len(), "window {}: unassigned speeches", wm.window_id);
        let sizes = wm.topic_sizes();
        ensure!(sizes.iter().sum::<usize>() == wm.speech_ids.len(), "window {}: partition broken", wm.window_id);
        n_prime += wm.k_selected;
    }
    ensure!(model.topic_documents.rows.len() == n_prime, "n' = {} but sum k = {n_prime}", model.topic_documents.rows.len());
    ensure!(model.dynamic.assignments.len() == n_prime, "second layer assigns {} rows", model.dynamic.assignments.len());
    let ts = &model.time_series;
    for (w, id) in ts.window_ids.iter().enumerate() {
        let docs = model.window_models.iter().find(|m| m.window_id == *id).unwrap().speech_ids.len();
        let col: usize = ts.counts.iter().map(|s| s[w]).sum();
        ensure!(col == docs, "window {id}: column sum {col} vs {docs} speeches");
    }
    for d in 0..model.dynamic.k {
        let collected = collect_speeches(&model.dynamic, d, &model.window_models).len();
        let row: usize = ts.series(d).iter().sum();
        ensure!(row == collected, "topic {d}: series sums to {row}, collected {collected}");
    }
    Ok(())
}

fn conservation(root: &Path) -> Check {
    let sweep = ModelSettings {
        window_k: KRange::new(2, 8).unwrap(),
        dynamic_k: KRange::new(2, 8).unwrap(),
        ..Default::default()
    };
    let mut fixtures: Vec<PlantedSpec> = (1..=3).map(PlantedSpec::standard).collect();
    // uneven window sizes and a theme that bursts only once
    let mut gappy = PlantedSpec::standard(5);
    gappy.topics[3].burst_profile = vec![0, 0, 0, 90, 0, 0];
    gappy.topics[2].burst_profile[2] = 10;
    fixtures.push(gappy);
    for spec in &fixtures {
        let (corpus, _) = generate(spec).map_err(|e| e.to_string())?;
        let skipgram = SkipgramConfig { seed: spec.seed, ..Default::default() };
        let prepared = dyntopic::pipeline::prepare(&corpus, &spec.window_spec(), &PreprocessConfig::default())
            .map_err(|e| e.to_string())?;
        let space = dyntopic::pipeline::train_embeddings(&prepared, &skipgram).map_err(|e| e.to_string())?;
        let model = fit_two_layer(&corpus, &spec.window_spec(), &PreprocessConfig::default(), &sweep, &space)
            .map_err(|e| e.to_string())?;
        conservation_of(&model).map_err(|e| format!("seed {}: {e}", spec.seed))?;
    }

    // the same identities on what the command line wrote
    let ts = read_json(&root.join("run_a/timeseries/timeseries.json"))?;
    let speeches = read_json(&root.join("run_a/timeseries/dynamic_speeches.json"))?;
    let windows = read_json(&root.join("run_a/window-topics/index.json"))?;
    let counts: Vec<Vec<u64>> = serde_json::from_value(ts["counts"].clone()).unwrap();
    for (w, win) in windows.as_array().unwrap().iter().enumerate() {
        let col: u64 = counts.iter().map(|s| s[w]).sum();
        ensure!(col == win["speeches"].as_u64().unwrap(), "cli window {w}: column sum {col}");
    }
    let mut seen = BTreeSet::new();
    for (d, t) in speeches.as_array().unwrap().iter().enumerate() {
        let ids = t["speeches"].as_array().unwrap();
        ensure!(counts[d].iter().sum::<u64>() == ids.len() as u64, "cli topic {d}: series and speeches disagree");
        for id in ids {
            ensure!(seen.insert(id.as_str().unwrap().to_string()), "speech {id} in two dynamic topics");
        }
    }
    Ok(format!("{} in-process fixtures and the command-line run", fixtures.len()))
}

fn monotone_error() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut fixtures, mut worst) = (0, f64::NEG_INFINITY);
    while fixtures < 50 {
        let n = rng.gen_range(4..25);
        let m = rng.gen_range(4..25);
        let density = rng.gen_range(0.2..1.0);
        let a = Array2::from_shape_fn((n, m), |_| {
            if rng.gen_bool(density) { rng.gen_range(0.0..3.0) } else { 0.0 }
        });
        let sparse = CsrMatrix::from_dense(&a);
        if sparse.nnz() == 0 {
            continue;
        }
        let k = rng.gen_range(1..=n.min(m).min(6));
        let fit = factorize(&sparse, k, &NmfConfig::default()).map_err(|e| e.to_string())?;
        let e0 = fit.error_trace[0];
        for pair in fit.error_trace.windows(2) {
            let rise = (pair[1] - pair[0]) / e0.max(f64::MIN_POSITIVE);
            worst = worst.max(rise);
            ensure!(pair[1] <= pair[0] + 1e-9 * e0, "fixture {fixtures}: {} -> {}", pair[0], pair[1]);
        }
        fixtures += 1;
    }
    Ok(format!("50 fixtures, largest relative step {worst:.1e}"))
}

fn validation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..100 {
        let k = rng.gen_range(2..15);
        let m = rng.gen_range(3..30);
        let h = Array2::from_shape_fn((k, m), |_| rng.gen_range(0.0..1.0));
        let d = cluster_topics(&h).map_err(|e| e.to_string())?;
        ensure!(d.merges.len() == k - 1, "trial {trial}: {} merges for {k} topics", d.merges.len());
        for pair in d.merges.windows(2) {
            ensure!(pair[1].height >= pair[0].height, "trial {trial}: heights {} then {}", pair[0].height, pair[1].height);
        }
        let matches: Vec<SubjectMatch> = (0..rng.gen_range(1..30))
            .map(|i| SubjectMatch {
                code: i.to_string(),
                title: String::new(),
                best_topic: 0,
                similarity: rng.gen_range(0.0..1.0),
            })
            .collect();
        let mut grid: Vec<f64> = (0..rng.gen_range(1..25)).map(|_| rng.gen_range(-0.2..1.2)).collect();
        grid.sort_by(f64::total_cmp);
        let curve = recall_curve(&matches, &grid);
        for pair in curve.windows(2) {
            ensure!(pair[1].recall <= pair[0].recall, "trial {trial}: recall rises");
        }
    }
    let h = ndarray::array![[0.1, 0.5, 0.9, 0.0], [0.1, 0.5, 0.9, 0.0], [0.9, 0.1, 0.0, 0.4]];
    let d = cluster_topics(&h).map_err(|e| e.to_string())?;
    let first = d.merges[0];
    ensure!((first.a, first.b) == (0, 1) && first.height.abs() < 1e-12, "identical rows merged as {first:?}");
    Ok("100 random dendrograms and recall curves, identical rows merge at 0".into())
}

fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "timings.json" {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism(root: &Path) -> Check {
    if !root.join("run_a/validate/manifest.json").is_file() {
        planted_pipeline(root, "run_a")?;
    }
    planted_pipeline(root, "run_b")?;
    let a = files_under(&root.join("run_a"));
    let b = files_under(&root.join("run_b"));
    ensure!(a.keys().eq(b.keys()), "runs wrote different file sets");
    for (name, bytes) in &a {
        ensure!(*bytes == b[name], "{name} differs between runs");
    }
    Ok(format!("{} artifact files byte-identical", a.len()))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let root = dir.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        ("planted recovery", Box::new(|| planted_recovery(root))),
        ("nmf planted factors", Box::new(nmf_recovery)),
        ("nndsvd oracle", Box::new(nndsvd_oracle_agreement)),
        ("coherence", Box::new(coherence)),
        ("conservation", Box::new(|| conservation(root))),
        ("monotone error", Box::new(monotone_error)),
        ("validation", Box::new(validation)),
        ("determinism", Box::new(|| determinism(root))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
