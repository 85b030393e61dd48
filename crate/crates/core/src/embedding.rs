//! Word embedding space and embedding-based topic coherence.
//!
//! Vectors either come from a word2vec text file or from the built-in
//! skip-gram trainer with negative sampling. Training is single threaded and
//! driven by one seeded generator, so a given corpus and config always give
//! the same vectors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedDocument;
use crate::error::{Error, Result};
use crate::nmf::TopicModelFactors;
use crate::window_topics::top_terms;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    dims: usize,
    terms: Vec<String>,
    index: HashMap<String, usize>,
    /// Row-major `terms.len() x dims`.
    vectors: Vec<f64>,
}

impl EmbeddingSpace {
    /// Builds a space from `(term, vector)` pairs. A repeated term replaces the
    /// earlier vector.
    pub fn new(dims: usize, entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
        }
        let mut space = EmbeddingSpace {
            dims,
            terms: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
        };
        for (term, vector) in entries {
            if vector.len() != dims {
                return Err(Error::ShapeMismatch(format!(
                    "vector for {term:?} has {} entries, expected {dims}",
                    vector.len()
                )));
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("vector for {term:?} is not finite")));
            }
            space.insert(term, &vector);
        }
        Ok(space)
    }

    fn insert(&mut self, term: String, vector: &[f64]) -> bool {
        match self.index.get(&term) {
            Some(&i) => {
                self.vectors[i * self.dims..(i + 1) * self.dims].copy_from_slice(vector);
                false
            }
            None => {
                self.index.insert(term.clone(), self.terms.len());
                self.terms.push(term);
                self.vectors.extend_from_slice(vector);
                true
            }
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn vocab_size(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn get(&self, term: &str) -> Option<&[f64]> {
        self.index
            .get(term)
            .map(|&i| &self.vectors[i * self.dims..(i + 1) * self.dims])
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    /// Cosine similarity of two in-vocabulary terms; a zero vector has
    /// similarity 0 with everything.
    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine(self.get(a)?, self.get(b)?))
    }

    pub fn write_word2vec<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.terms.len(), self.dims)?;
        let mut line = String::new();
        for (i, term) in self.terms.iter().enumerate() {
            line.clear();
            line.push_str(term);
            for v in &self.vectors[i * self.dims..(i + 1) * self.dims] {
                let _ = write!(line, " {v}");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_word2vec(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Parses the word2vec text format: a `vocab dims` header followed by one
    /// `term v1 .. vd` line per term.
    pub fn read_word2vec<R: BufRead>(input: R, source: &str) -> Result<Self> {
        let mut lines = input.lines();
        let header = match lines.next() {
            Some(l) => l.map_err(|e| Error::io(source, e))?,
            None => return Err(Error::parse(source, 1, "missing `vocab dims` header")),
        };
        let mut head = header.split_whitespace().map(str::parse::<usize>);
        let (Some(Ok(declared)), Some(Ok(dims)), None) = (head.next(), head.next(), head.next()) else {
            return Err(Error::parse(source, 1, "header must be `vocab dims`"));
        };
        if dims == 0 {
            return Err(Error::parse(source, 1, "dimension must be positive"));
        }
        let mut space = EmbeddingSpace::new(dims, std::iter::empty())?;
        let mut vector = Vec::with_capacity(dims);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line.map_err(|e| Error::io(source, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let term = parts.next().expect("line is not blank").to_string();
            vector.clear();
            for p in parts {
                let v: f64 = p
                    .parse()
                    .map_err(|_| Error::parse(source, line_no, format!("bad number {p:?}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(source, line_no, "non-finite value"));
                }
                vector.push(v);
            }
            if vector.len() != dims {
                return Err(Error::parse(
                    source,
                    line_no,
                    format!("expected {dims} values, found {}", vector.len()),
                ));
            }
            if !space.insert(term.clone(), &vector) {
                log::warn!("{source}:{line_no}: duplicate term {term:?}, keeping the later vector");
            }
        }
        if space.vocab_size() != declared {
            log::warn!(
                "{source}: header declares {declared} terms but {} were read",
                space.vocab_size()
            );
        }
        Ok(space)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_word2vec(std::io::BufReader::new(file), &path.display().to_string())
    }
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkipgramConfig {
    pub dims: usize,
    pub context_window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        SkipgramConfig {
            dims: 100,
            context_window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 5,
            learning_rate: 0.025,
            seed: 1,
        }
    }
}

impl SkipgramConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("dims", self.dims),
            ("context_window", self.context_window),
            ("negatives", self.negatives),
            ("epochs", self.epochs),
            ("min_count", self.min_count),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("skip-gram {name} must be positive")));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("skip-gram learning_rate must be positive".into()));
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Trains skip-gram vectors with negative sampling over the token streams of
/// `docs`. Context windows never cross document boundaries.
pub fn train_skipgram(docs: &[TokenizedDocument], config: &SkipgramConfig) -> Result<EmbeddingSpace> {
    config.validate()?;
    if !docs.iter().any(|d| d.tokens.len() >= 2) {
        return Err(Error::InvalidConfig(
            "skip-gram training needs a document with at least two tokens".into(),
        ));
    }

    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in docs.iter().flat_map(|d| &d.tokens) {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut vocab: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= config.min_count)
        .collect();
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary {
            min_count: config.min_count,
        });
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let ids: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, &(t, _))| (t, i)).collect();
    let streams: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.tokens.iter().filter_map(|t| ids.get(t.as_str()).copied()).collect())
        .collect();

    let dims = config.dims;
    let v = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input: Vec<f64> = (0..v * dims)
        .map(|_| (rng.gen::<f64>() - 0.5) / dims as f64)
        .collect();
    let mut output = vec![0.0; v * dims];
    let noise = WeightedIndex::new(vocab.iter().map(|&(_, c)| (c as f64).powf(0.75)))
        .expect("vocabulary counts are positive");

    let total = streams.iter().map(Vec::len).sum::<usize>() * config.epochs;
    let floor = config.learning_rate * 1e-4;
    let mut processed = 0usize;
    let mut grad = vec![0.0; dims];

    for _ in 0..config.epochs {
        for stream in &streams {
            for (pos, &center) in stream.iter().enumerate() {
                let lr = (config.learning_rate * (1.0 - processed as f64 / total as f64)).max(floor);
                processed += 1;
                let reach = config.context_window - rng.gen_range(0..config.context_window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(stream.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let ctx = stream[ctx_pos];
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let l1 = ctx * dims;
                    for n in 0..=config.negatives {
                        let (target, label) = if n == 0 {
                            (center, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == center {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let l2 = target * dims;
                        let f: f64 = (0..dims).map(|d| input[l1 + d] * output[l2 + d]).sum();
                        let g = (label - sigmoid(f)) * lr;
                        for d in 0..dims {
                            grad[d] += g * output[l2 + d];
                            output[l2 + d] += g * input[l1 + d];
                        }
                    }
                    for d in 0..dims {
                        input[l1 + d] += grad[d];
                    }
                }
            }
        }
    }

    let entries = vocab.iter().enumerate().map(|(i, &(t, _))| {
        (t.to_string(), input[i * dims..(i + 1) * dims].to_vec())
    });
    EmbeddingSpace::new(dims, entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicCoherence {
    pub score: f64,
    /// Number of in-vocabulary term pairs that were averaged.
    pub pairs: usize,
    /// Fewer than two terms were in the vocabulary; `score` is 0.
    pub degenerate: bool,
}

/// Mean pairwise cosine similarity of the in-vocabulary terms of a topic
/// descriptor. Pairs involving unknown terms are skipped.
pub fn topic_coherence<S: AsRef<str>>(terms: &[S], space: &EmbeddingSpace) -> TopicCoherence {
    let vectors: Vec<&[f64]> = terms.iter().filter_map(|t| space.get(t.as_ref())).collect();
    if vectors.len() < 2 {
        return TopicCoherence {
            score: 0.0,
            pairs: 0,
            degenerate: true,
        };
    }
    let mut sum = 0.0;
    let mut pairs = 0;
    for j in 1..vectors.len() {
        for i in 0..j {
            sum += cosine(vectors[i], vectors[j]);
            pairs += 1;
        }
    }
    TopicCoherence {
        score: sum / pairs as f64,
        pairs,
        degenerate: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCoherence {
    pub score: f64,
    pub per_topic: Vec<TopicCoherence>,
}

/// Mean topic coherence over the `k` topics of a model, each described by the
/// top `t` terms of its `H` row. `terms` names the columns of `H`.
pub fn model_coherence(
    model: &TopicModelFactors,
    terms: &[String],
    t: usize,
    space: &EmbeddingSpace,
) -> Result<ModelCoherence> {
    if t < 2 {
        return Err(Error::InvalidConfig(format!(
            "coherence needs at least 2 top terms per topic, got {t}"
        )));
    }
    if terms.len() != model.h.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "{} terms for an H factor with {} columns",
            terms.len(),
            model.h.ncols()
        )));
    }
    let per_topic: Vec<TopicCoherence> = model
        .h
        .rows()
        .into_iter()
        .map(|row| {
            let descriptor = top_terms(row, terms, t);
            topic_coherence(&descriptor.terms, space)
        })
        .collect();
    let score = per_topic.iter().map(|c| c.score).sum::<f64>() / per_topic.len().max(1) as f64;
    Ok(ModelCoherence { score, per_topic })
}
