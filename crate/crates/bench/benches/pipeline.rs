use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dyntopic::pipeline::{fit_prepared, prepare, train_embeddings, ModelSettings};
use dyntopic::*;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_sparse(n: usize, m: usize, density: f64, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dense = Array2::from_shape_fn((n, m), |_| {
        if rng.gen_bool(density) { rng.gen_range(0.0..1.0) } else { 0.0 }
    });
    CsrMatrix::from_dense(&dense)
}

fn nmf(c: &mut Criterion) {
    let a = random_sparse(400, 1000, 0.02, 1);
    let mut group = c.benchmark_group("nmf");
    for k in [5, 10, 20] {
        group.bench_with_input(BenchmarkId::new("nndsvd", k), &k, |b, &k| {
            b.iter(|| nndsvd_init(black_box(&a), k).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("factorize", k), &k, |b, &k| {
            b.iter(|| factorize(black_box(&a), k, &NmfConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn text(c: &mut Criterion) {
    let spec = PlantedSpec::standard(1);
    let (corpus, _) = generate(&spec).unwrap();
    let config = PreprocessConfig::default();
    let docs = preprocess(&corpus.speeches, &config);
    c.bench_function("preprocess/1200 speeches", |b| {
        b.iter(|| preprocess(black_box(&corpus.speeches), &config))
    });
    c.bench_function("build_matrix/1200 speeches", |b| {
        b.iter(|| build_matrix(black_box(&docs), &config, 0).unwrap())
    });
}

fn coherence(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let entries: Vec<(String, Vec<f64>)> = (0..2000)
        .map(|i| (format!("w{i}"), (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    let space = EmbeddingSpace::new(100, entries).unwrap();
    let mut group = c.benchmark_group("coherence");
    for t in [10, 20] {
        let terms: Vec<String> = (0..t).map(|i| format!("w{}", i * 17)).collect();
        group.bench_with_input(BenchmarkId::from_parameter(t), &terms, |b, terms| {
            b.iter(|| topic_coherence(black_box(terms), &space))
        });
    }
    group.finish();
}

fn pipeline(c: &mut Criterion) {
    let spec = PlantedSpec::standard(1);
    let (corpus, _) = generate(&spec).unwrap();
    let config = PreprocessConfig::default();
    let skipgram = SkipgramConfig { seed: 1, ..Default::default() };
    let settings = ModelSettings {
        window_k: KRange::new(2, 8).unwrap(),
        dynamic_k: KRange::new(2, 8).unwrap(),
        ..Default::default()
    };
    let prepared = prepare(&corpus, &spec.window_spec(), &config).unwrap();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("skipgram", |b| b.iter(|| train_embeddings(&prepared, &skipgram).unwrap()));
    let space = train_embeddings(&prepared, &skipgram).unwrap();
    group.bench_function("two layers", |b| {
        b.iter(|| fit_prepared(prepared.clone(), &settings, &space).unwrap())
    });
    group.finish();
}

criterion_group!(benches, nmf, text, coherence, pipeline);
criterion_main!(benches);
