//! Synthetic corpora with planted topic structure, used as ground truth.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Granularity, Speech, TimeWindowSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTopic {
    pub vocabulary: Vec<String>,
    /// Dynamic theme this topic belongs to.
    pub theme: usize,
    /// Documents generated in each window; zero means inactive.
    pub burst_profile: Vec<usize>,
}

impl PlantedTopic {
    pub fn active_windows(&self) -> impl Iterator<Item = usize> + '_ {
        self.burst_profile
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(w, _)| w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub n_windows: usize,
    /// First day of the first quarterly window.
    pub start: NaiveDate,
    pub topics: Vec<PlantedTopic>,
    pub background_vocab: Vec<String>,
    /// Inclusive token count range per document.
    pub doc_length: (usize, usize),
    /// Share of each document's tokens drawn from its topic vocabulary.
    pub topic_fraction: f64,
    /// Zipf exponent of term weights within a topic vocabulary; 0 samples uniformly.
    #[serde(default)]
    pub term_skew: f64,
    pub seed: u64,
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn syllable(x: usize, out: &mut String) {
    out.push(CONSONANTS[(x / VOWELS.len()) % CONSONANTS.len()] as char);
    out.push(VOWELS[x % VOWELS.len()] as char);
}

/// A pronounceable, purely alphabetic pseudo-word, unique per `(namespace, index)`
/// for indices below 4900.
pub fn pseudo_word(namespace: usize, index: usize) -> String {
    let base = CONSONANTS.len() * VOWELS.len();
    let mut w = String::with_capacity(6);
    syllable(namespace, &mut w);
    syllable(index / base, &mut w);
    syllable(index % base, &mut w);
    w
}

/// `size` pseudo-words for `theme`; the first `overlap` are shared with the
/// previous theme's vocabulary.
pub fn planted_vocabulary(theme: usize, size: usize, overlap: usize) -> Vec<String> {
    let shared = if theme == 0 { 0 } else { overlap.min(size) };
    let prev_tail = |i: usize| pseudo_word(theme - 1, size - shared + i);
    (0..shared)
        .map(prev_tail)
        .chain((shared..size).map(|i| pseudo_word(theme, i)))
        .collect()
}

impl PlantedSpec {
    /// Four themes with disjoint vocabularies over six quarterly windows of
    /// 200 documents each; every window mixes two or three themes.
    ///
    /// Theme sizes are graded: the more windows a theme spans, the more
    /// documents it has. With disjoint vocabularies an under-sized model drops
    /// its smallest blocks whole instead of blending them, and frequent terms
    /// embed less tightly than rare ones, so graded sizes make dropping a
    /// theme cost coherence.
    pub fn standard(seed: u64) -> Self {
        let profiles = [
            [130, 120, 0, 110, 130, 120],
            [70, 0, 120, 0, 70, 80],
            [0, 80, 50, 60, 0, 0],
            [0, 0, 30, 30, 0, 0],
        ];
        let topics = profiles
            .iter()
            .enumerate()
            .map(|(theme, p)| PlantedTopic {
                vocabulary: planted_vocabulary(theme, 15, 0),
                theme,
                burst_profile: p.to_vec(),
            })
            .collect();
        PlantedSpec {
            n_windows: 6,
            start: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            topics,
            background_vocab: (0..40).map(|i| pseudo_word(60, i)).collect(),
            doc_length: (8, 14),
            topic_fraction: 0.8,
            term_skew: 0.0,
            seed,
        }
    }

    pub fn n_themes(&self) -> usize {
        self.topics.iter().map(|t| t.theme + 1).max().unwrap_or(0)
    }

    /// Quarterly windows covering exactly the generated span.
    pub fn window_spec(&self) -> TimeWindowSpec {
        let end = self.start + chrono::Months::new(3 * self.n_windows as u32);
        TimeWindowSpec {
            granularity: Granularity::Quarter,
            start: self.start,
            end: end.pred_opt().unwrap(),
        }
    }

    fn split(&self, len: usize) -> (usize, usize) {
        let topical = (len as f64 * self.topic_fraction).round() as usize;
        (topical, len - topical)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPlantedSpec(m));
        if self.n_windows == 0 || self.topics.is_empty() {
            return bad("need at least one window and one topic".into());
        }
        if self.start.day() != 1 || self.start.month0() % 3 != 0 {
            return bad(format!("start {} is not the first day of a quarter", self.start));
        }
        let (lo, hi) = self.doc_length;
        if lo == 0 || lo > hi {
            return bad(format!("document length range {lo}..={hi} is empty"));
        }
        if !(0.0..=1.0).contains(&self.topic_fraction) {
            return bad("topic_fraction must lie in [0, 1]".into());
        }
        if !(self.term_skew.is_finite() && self.term_skew >= 0.0) {
            return bad("term_skew must be finite and non-negative".into());
        }
        let (topical, background) = (0..=hi - lo)
            .map(|d| self.split(lo + d))
            .fold((0, 0), |acc, s| (acc.0.max(s.0), acc.1.max(s.1)));
        for (i, topic) in self.topics.iter().enumerate() {
            if topic.burst_profile.len() != self.n_windows {
                return bad(format!("topic {i} has a burst profile for {} windows", topic.burst_profile.len()));
            }
            if topic.vocabulary.len() < topical {
                return bad(format!(
                    "topic {i} vocabulary of {} terms is too small for {topical} distinct topic tokens per document",
                    topic.vocabulary.len()
                ));
            }
        }
        if self.background_vocab.len() < background {
            return bad(format!(
                "background vocabulary of {} terms is too small for {background} background tokens per document",
                self.background_vocab.len()
            ));
        }
        let required = self.topics.len().min(2);
        for w in 0..self.n_windows {
            let active = self.topics.iter().filter(|t| t.burst_profile[w] > 0).count();
            if active < required {
                return bad(format!("window {w} has {active} active topics, need {required}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Planted topic of every generated document.
    pub doc_topic: BTreeMap<String, usize>,
    /// Theme of every planted topic.
    pub topic_theme: Vec<usize>,
    /// `docs_per_window[w][topic]`.
    pub docs_per_window: Vec<Vec<usize>>,
}

impl GroundTruth {
    pub fn doc_theme(&self, id: &str) -> Option<usize> {
        self.doc_topic.get(id).map(|&t| self.topic_theme[t])
    }
}

/// Generates the corpus. Each document belongs to one planted topic and mixes
/// distinct topic terms with distinct background terms, shuffled.
pub fn generate(spec: &PlantedSpec) -> Result<(Corpus, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let windows = spec.window_spec().windows();
    let mut speeches = Vec::new();
    let mut doc_topic = BTreeMap::new();
    let mut docs_per_window = vec![vec![0; spec.topics.len()]; spec.n_windows];
    for (w, window) in windows.iter().enumerate() {
        let days = (window.end - window.start).num_days() as u64;
        for (t, topic) in spec.topics.iter().enumerate() {
            for j in 0..topic.burst_profile[w] {
                let len = rng.gen_range(spec.doc_length.0..=spec.doc_length.1);
                let (topical, background) = spec.split(len);
                let mut tokens: Vec<&str> = sample_topical(&mut rng, topic.vocabulary.len(), topical, spec.term_skew)
                    .into_iter()
                    .map(|i| topic.vocabulary[i].as_str())
                    .chain(
                        index::sample(&mut rng, spec.background_vocab.len(), background)
                            .into_iter()
                            .map(|i| spec.background_vocab[i].as_str()),
                    )
                    .collect();
                tokens.shuffle(&mut rng);
                let id = format!("w{w:02}-t{t:02}-{j:04}");
                let date = window.start + chrono::Days::new(rng.gen_range(0..=days));
                doc_topic.insert(id.clone(), t);
                docs_per_window[w][t] += 1;
                speeches.push(Speech {
                    id,
                    date,
                    speaker_id: None,
                    text: tokens.join(" "),
                });
            }
        }
    }
    let truth = GroundTruth {
        doc_topic,
        topic_theme: spec.topics.iter().map(|t| t.theme).collect(),
        docs_per_window,
    };
    Ok((Corpus::new(speeches), truth))
}

fn sample_topical(rng: &mut ChaCha8Rng, n: usize, amount: usize, skew: f64) -> Vec<usize> {
    if skew == 0.0 {
        return index::sample(rng, n, amount).into_vec();
    }
    index::sample_weighted(rng, n, |i| (i as f64 + 1.0).powf(-skew), amount)
        .expect("finite positive weights")
        .into_vec()
}

/// Fraction of items whose predicted cluster maps to their true label under
/// the best one-to-one matching of clusters to labels.
pub fn matched_accuracy(truth: &[usize], predicted: &[usize]) -> f64 {
    assert_eq!(truth.len(), predicted.len(), "label vectors differ in length");
    if truth.is_empty() {
        return 1.0;
    }
    let n_true = truth.iter().max().unwrap() + 1;
    let n_pred = predicted.iter().max().unwrap() + 1;
    let (rows, cols) = (n_true.min(n_pred), n_true.max(n_pred));
    let mut counts = Matrix::new(rows, cols, 0i64);
    for (&t, &p) in truth.iter().zip(predicted) {
        let (r, c) = if n_true <= n_pred { (t, p) } else { (p, t) };
        counts[(r, c)] += 1;
    }
    let (matched, _) = kuhn_munkres(&counts);
    matched as f64 / truth.len() as f64
}
