//! Flat `key = value` configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use serde::Serialize;
use sha2::{Digest, Sha256};

use dyntopic::corpus::{load_term_list, Granularity, Normalizer, PreprocessConfig};
use dyntopic::pipeline::ModelSettings;
use dyntopic::{KRange, NmfConfig, SkipgramConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizerChoice {
    Identity,
    Stemmer,
    Lemma(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingSource {
    Train,
    Load(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub corpus: Option<PathBuf>,
    /// Where stage directories go. Not part of the config hash: moving the
    /// output does not change what is computed.
    #[serde(skip)]
    pub output: PathBuf,
    pub granularity: Granularity,
    pub window_start: Option<NaiveDate>,
    pub window_end: Option<NaiveDate>,
    pub min_token_len: usize,
    pub min_doc_freq: usize,
    /// Replaces the built-in stopword list when set.
    pub stopwords: Option<PathBuf>,
    pub extra_stopwords: Option<PathBuf>,
    pub blocked_names: Option<PathBuf>,
    pub normalizer: NormalizerChoice,
    pub window_k: KRange,
    pub dynamic_k: KRange,
    pub t_coherence: usize,
    pub t_stack: usize,
    pub normalize_b: bool,
    pub nmf: NmfConfig,
    pub embedding: EmbeddingSource,
    pub embedding_dims: usize,
    pub embedding_window: usize,
    pub embedding_negatives: usize,
    pub embedding_epochs: usize,
    pub embedding_min_count: usize,
    pub embedding_learning_rate: f64,
    pub seed: u64,
    pub taxonomy: Option<PathBuf>,
    pub taxonomy_depth: usize,
    pub taxonomy_top_t: usize,
    pub recall_thresholds: Vec<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let models = ModelSettings::default();
        let skipgram = SkipgramConfig::default();
        PipelineConfig {
            corpus: None,
            output: PathBuf::from("out"),
            granularity: Granularity::Quarter,
            window_start: None,
            window_end: None,
            min_token_len: 3,
            min_doc_freq: 5,
            stopwords: None,
            extra_stopwords: None,
            blocked_names: None,
            normalizer: NormalizerChoice::Identity,
            window_k: models.window_k,
            dynamic_k: models.dynamic_k,
            t_coherence: models.t_coherence,
            t_stack: models.t_stack,
            normalize_b: models.normalize_b,
            nmf: models.nmf,
            embedding: EmbeddingSource::Train,
            embedding_dims: skipgram.dims,
            embedding_window: skipgram.context_window,
            embedding_negatives: skipgram.negatives,
            embedding_epochs: skipgram.epochs,
            embedding_min_count: skipgram.min_count,
            embedding_learning_rate: skipgram.learning_rate,
            seed: skipgram.seed,
            taxonomy: None,
            taxonomy_depth: 1,
            taxonomy_top_t: 10,
            recall_thresholds: (0..=20).map(|i| i as f64 / 20.0).collect(),
        }
    }
}

fn parse_range(value: &str) -> Result<KRange> {
    let (lo, hi) = value
        .split_once('-')
        .with_context(|| format!("expected a range like 10-25, got {value:?}"))?;
    Ok(KRange::new(lo.trim().parse()?, hi.trim().parse()?)?)
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("expected true or false, got {value:?}"),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl PipelineConfig {
    /// Reads a config file on top of the defaults. Relative paths stay relative
    /// to the working directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config = PipelineConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("{}:{}: expected key = value", path.display(), n + 1))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                bail!("{}:{}: {key} is set twice", path.display(), n + 1);
            }
            config
                .set(key, value.trim())
                .with_context(|| format!("{}:{}", path.display(), n + 1))?;
        }
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |what: &str| format!("{key}: invalid {what} {value:?}");
        match key {
            "corpus" => self.corpus = optional_path(value),
            "output" => self.output = PathBuf::from(value),
            "granularity" => self.granularity = value.parse()?,
            "window_start" => self.window_start = Some(value.parse().with_context(|| num("date"))?),
            "window_end" => self.window_end = Some(value.parse().with_context(|| num("date"))?),
            "min_token_len" => self.min_token_len = value.parse().with_context(|| num("integer"))?,
            "min_doc_freq" => self.min_doc_freq = value.parse().with_context(|| num("integer"))?,
            "stopwords" => self.stopwords = optional_path(value),
            "extra_stopwords" => self.extra_stopwords = optional_path(value),
            "blocked_names" => self.blocked_names = optional_path(value),
            "normalizer" => {
                self.normalizer = match value {
                    "identity" => NormalizerChoice::Identity,
                    "stemmer" => NormalizerChoice::Stemmer,
                    other => match other.strip_prefix("lemma:") {
                        Some(p) if !p.is_empty() => NormalizerChoice::Lemma(PathBuf::from(p)),
                        _ => bail!("normalizer: expected identity, stemmer or lemma:<file>, got {other:?}"),
                    },
                }
            }
            "window_k" => self.window_k = parse_range(value)?,
            "dynamic_k" => self.dynamic_k = parse_range(value)?,
            "t_coherence" => self.t_coherence = value.parse().with_context(|| num("integer"))?,
            "t_stack" => self.t_stack = value.parse().with_context(|| num("integer"))?,
            "normalize_b" => self.normalize_b = parse_bool(value)?,
            "nmf_max_iter" => self.nmf.max_iter = value.parse().with_context(|| num("integer"))?,
            "nmf_rel_tol" => self.nmf.rel_tol = value.parse().with_context(|| num("number"))?,
            "nmf_nonneg_clip" => self.nmf.nonneg_clip = value.parse().with_context(|| num("number"))?,
            "embedding" => {
                self.embedding = match value {
                    "train" => EmbeddingSource::Train,
                    path => EmbeddingSource::Load(PathBuf::from(path)),
                }
            }
            "embedding_dims" => self.embedding_dims = value.parse().with_context(|| num("integer"))?,
            "embedding_window" => self.embedding_window = value.parse().with_context(|| num("integer"))?,
            "embedding_negatives" => self.embedding_negatives = value.parse().with_context(|| num("integer"))?,
            "embedding_epochs" => self.embedding_epochs = value.parse().with_context(|| num("integer"))?,
            "embedding_min_count" => self.embedding_min_count = value.parse().with_context(|| num("integer"))?,
            "embedding_learning_rate" => {
                self.embedding_learning_rate = value.parse().with_context(|| num("number"))?
            }
            "seed" => self.seed = value.parse().with_context(|| num("integer"))?,
            "taxonomy" => self.taxonomy = optional_path(value),
            "taxonomy_depth" => self.taxonomy_depth = value.parse().with_context(|| num("integer"))?,
            "taxonomy_top_t" => self.taxonomy_top_t = value.parse().with_context(|| num("integer"))?,
            "recall_thresholds" => {
                self.recall_thresholds = value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .with_context(|| num("threshold list"))?
            }
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    /// Applies `key=value` overrides from the command line.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .with_context(|| format!("override {o:?} is not key=value"))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_coherence < 2 {
            bail!("t_coherence must be at least 2");
        }
        if self.t_stack == 0 {
            bail!("t_stack must be at least 1");
        }
        if self.taxonomy_depth == 0 || self.taxonomy_top_t == 0 {
            bail!("taxonomy_depth and taxonomy_top_t must be at least 1");
        }
        if let (Some(s), Some(e)) = (self.window_start, self.window_end) {
            if s > e {
                bail!("window_start {s} is after window_end {e}");
            }
        }
        self.nmf.validate()?;
        self.skipgram().validate()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        format!("{:x}", Sha256::digest(json))
    }

    pub fn skipgram(&self) -> SkipgramConfig {
        SkipgramConfig {
            dims: self.embedding_dims,
            context_window: self.embedding_window,
            negatives: self.embedding_negatives,
            epochs: self.embedding_epochs,
            min_count: self.embedding_min_count,
            learning_rate: self.embedding_learning_rate,
            seed: self.seed,
        }
    }

    pub fn models(&self) -> ModelSettings {
        ModelSettings {
            window_k: self.window_k,
            dynamic_k: self.dynamic_k,
            t_coherence: self.t_coherence,
            t_stack: self.t_stack,
            normalize_b: self.normalize_b,
            nmf: self.nmf,
        }
    }

    pub fn preprocess(&self) -> Result<PreprocessConfig> {
        let mut config = PreprocessConfig {
            min_token_len: self.min_token_len,
            min_doc_freq: self.min_doc_freq,
            ..Default::default()
        };
        if let Some(p) = &self.stopwords {
            config.stopwords = load_term_list(p)?;
        }
        if let Some(p) = &self.extra_stopwords {
            config.extra_stopwords = load_term_list(p)?;
        }
        if let Some(p) = &self.blocked_names {
            config.blocked_names = load_term_list(p)?;
        }
        config.normalizer = match &self.normalizer {
            NormalizerChoice::Identity => Normalizer::Identity,
            NormalizerChoice::Stemmer => Normalizer::SuffixStemmer,
            NormalizerChoice::Lemma(p) => Normalizer::lemma_dictionary(p)?,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(
            &path,
            "# demo\ncorpus = speeches.jsonl\nwindow_k = 2-8\n\ndynamic_k=3-6 # inline\nnormalize_b = false\nseed = 9\n",
        )
        .unwrap();
        let c = PipelineConfig::from_file(&path).unwrap();
        assert_eq!(c.corpus, Some(PathBuf::from("speeches.jsonl")));
        assert_eq!(c.window_k, KRange::new(2, 8).unwrap());
        assert_eq!(c.dynamic_k, KRange::new(3, 6).unwrap());
        assert!(!c.normalize_b);
        assert_eq!(c.skipgram().seed, 9);
    }

    #[test]
    fn rejects_unknown_and_repeated_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        std::fs::write(&path, "colour = blue\n").unwrap();
        let err = format!("{:#}", PipelineConfig::from_file(&path).unwrap_err());
        assert!(err.contains("bad.conf:1") && err.contains("colour"), "{err}");
        std::fs::write(&path, "seed = 1\nseed = 2\n").unwrap();
        assert!(PipelineConfig::from_file(&path).is_err());
        std::fs::write(&path, "window_k = 8-2\n").unwrap();
        assert!(PipelineConfig::from_file(&path).is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let mut a = PipelineConfig::default();
        let mut b = PipelineConfig::default();
        b.output = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        a.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }
}
