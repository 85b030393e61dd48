//! First layer: one topic model per time window, with the number of topics
//! chosen by embedding coherence and each speech assigned to a single topic.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{s, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DocTermMatrix;
use crate::embedding::{model_coherence, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::nmf::{factorize_from, nndsvd_init, NmfConfig, TopicModelFactors};
use crate::sparse::CsrMatrix;

/// Inclusive range of candidate topic counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KRange {
    pub min: usize,
    pub max: usize,
}

impl KRange {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min < 2 || max < min {
            return Err(Error::InvalidConfig(format!(
                "topic range [{min}, {max}] must satisfy 2 <= min <= max"
            )));
        }
        Ok(KRange { min, max })
    }

    /// The range with its upper end lowered to `bound`, if anything remains.
    pub fn clamped(&self, bound: usize) -> Option<KRange> {
        let max = self.max.min(bound);
        (max >= self.min).then_some(KRange { min: self.min, max })
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.min..=self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub terms: Vec<String>,
    pub weights: Vec<f64>,
    /// Fewer than `t` terms carry weight.
    pub short: bool,
}

/// The `t` highest-weighted terms of a topic row, heaviest first, ties in
/// lexicographic order. Zero-weight terms are never included.
pub fn top_terms(row: ArrayView1<f64>, terms: &[String], t: usize) -> Descriptor {
    let mut ranked: Vec<usize> = (0..row.len()).filter(|&j| row[j] > 0.0).collect();
    ranked.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then_with(|| terms[a].cmp(&terms[b])));
    ranked.truncate(t);
    Descriptor {
        short: ranked.len() < t,
        terms: ranked.iter().map(|&j| terms[j].clone()).collect(),
        weights: ranked.iter().map(|&j| row[j]).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub topic: usize,
    /// The membership row was all zero, so the topic is arbitrary.
    pub zero_weight: bool,
}

/// Row-wise argmax of a membership matrix; ties go to the lowest column.
pub fn assign_rows(w: &Array2<f64>) -> Vec<Assignment> {
    w.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            Assignment {
                topic: best,
                zero_weight: row.iter().all(|&v| v <= 0.0),
            }
        })
        .collect()
}

pub fn assign_speeches(factors: &TopicModelFactors) -> Vec<Assignment> {
    assign_rows(&factors.w)
}

/// Result of fitting every `k` in a range and keeping the most coherent model.
#[derive(Debug, Clone, PartialEq)]
pub struct KSweep {
    pub k_selected: usize,
    pub factors: TopicModelFactors,
    pub coherence_by_k: BTreeMap<usize, f64>,
    pub topic_coherence: Vec<f64>,
}

/// Factorizes `matrix` for every `k` in `range` and keeps the model with the
/// highest mean coherence of its top-`t` descriptors. Ties favour smaller `k`.
pub fn sweep_k(
    matrix: &CsrMatrix,
    terms: &[String],
    range: KRange,
    t: usize,
    space: &EmbeddingSpace,
    nmf: &NmfConfig,
) -> Result<KSweep> {
    let bound = matrix.n_rows().min(matrix.n_cols());
    if range.max > bound {
        return Err(Error::InvalidRank {
            k: range.max,
            bound,
            rows: matrix.n_rows(),
            cols: matrix.n_cols(),
        });
    }
    // one decomposition seeds every k in the range
    let (w0, h0) = nndsvd_init(matrix, range.max)?;
    let fits: Vec<(usize, TopicModelFactors, Vec<f64>, f64)> = range
        .iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| {
            let w = w0.slice(s![.., ..k]).to_owned();
            let h = h0.slice(s![..k, ..]).to_owned();
            let factors = factorize_from(matrix, w, h, nmf)?;
            let coh = model_coherence(&factors, terms, t, space)?;
            let per_topic = coh.per_topic.iter().map(|c| c.score).collect();
            Ok((k, factors, per_topic, coh.score))
        })
        .collect::<Result<_>>()?;

    let coherence_by_k = fits.iter().map(|(k, _, _, s)| (*k, *s)).collect();
    let mut best = 0;
    for (i, fit) in fits.iter().enumerate() {
        if fit.3 > fits[best].3 {
            best = i;
        }
    }
    let (k_selected, factors, topic_coherence, _) = fits.into_iter().nth(best).expect("range is non-empty");
    Ok(KSweep {
        k_selected,
        factors,
        coherence_by_k,
        topic_coherence,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowTopicModel {
    pub window_id: usize,
    pub k_selected: usize,
    pub factors: TopicModelFactors,
    pub coherence_by_k: BTreeMap<usize, f64>,
    pub topic_coherence: Vec<f64>,
    pub descriptors: Vec<Descriptor>,
    /// Speech id of each row of `W`.
    pub speech_ids: Vec<String>,
    /// Term of each column of `H`.
    pub terms: Vec<String>,
    pub assignments: Vec<Assignment>,
}

impl WindowTopicModel {
    /// Speeches assigned to `topic`, in matrix row order.
    pub fn topic_speeches(&self, topic: usize) -> impl Iterator<Item = &str> {
        self.speech_ids
            .iter()
            .zip(&self.assignments)
            .filter(move |(_, a)| a.topic == topic)
            .map(|(id, _)| id.as_str())
    }

    pub fn topic_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_selected];
        for a in &self.assignments {
            sizes[a.topic] += 1;
        }
        sizes
    }
}

/// Fits the window model over `range`, describing topics by their top `t` terms.
pub fn select_k(
    a: &DocTermMatrix,
    range: KRange,
    t: usize,
    space: &EmbeddingSpace,
    nmf: &NmfConfig,
) -> Result<WindowTopicModel> {
    let sweep = sweep_k(&a.matrix, &a.terms, range, t, space, nmf)?;
    let descriptors = sweep
        .factors
        .h
        .rows()
        .into_iter()
        .map(|row| top_terms(row, &a.terms, t))
        .collect();
    let assignments = assign_speeches(&sweep.factors);
    Ok(WindowTopicModel {
        window_id: a.window_id,
        k_selected: sweep.k_selected,
        factors: sweep.factors,
        coherence_by_k: sweep.coherence_by_k,
        topic_coherence: sweep.topic_coherence,
        descriptors,
        speech_ids: a.rows.clone(),
        terms: a.terms.clone(),
        assignments,
    })
}

#[derive(Serialize, Deserialize)]
pub(crate) struct SweepScore {
    pub k: usize,
    pub coherence: f64,
}

#[derive(Serialize, Deserialize)]
struct TopicRecord {
    topic: usize,
    coherence: f64,
    size: usize,
    #[serde(flatten)]
    descriptor: Descriptor,
}

#[derive(Serialize, Deserialize)]
struct SpeechAssignment {
    speech_id: String,
    topic: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    zero_weight: bool,
}

#[derive(Serialize, Deserialize)]
struct WindowArtifact {
    window_id: usize,
    k_selected: usize,
    k_sweep: Vec<SweepScore>,
    topics: Vec<TopicRecord>,
    assignments: Vec<SpeechAssignment>,
}

impl WindowTopicModel {
    fn stem(window_id: usize) -> String {
        format!("window_{window_id:03}")
    }

    /// Writes the window JSON artifact (sweep scores, selected k, descriptors,
    /// assignments) next to the factor triplets and the term dictionary.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let stem = Self::stem(self.window_id);
        let sizes = self.topic_sizes();
        let artifact = WindowArtifact {
            window_id: self.window_id,
            k_selected: self.k_selected,
            k_sweep: self
                .coherence_by_k
                .iter()
                .map(|(&k, &coherence)| SweepScore { k, coherence })
                .collect(),
            topics: self
                .descriptors
                .iter()
                .enumerate()
                .map(|(topic, d)| TopicRecord {
                    topic,
                    coherence: self.topic_coherence[topic],
                    size: sizes[topic],
                    descriptor: d.clone(),
                })
                .collect(),
            assignments: self
                .speech_ids
                .iter()
                .zip(&self.assignments)
                .map(|(id, a)| SpeechAssignment {
                    speech_id: id.clone(),
                    topic: a.topic,
                    zero_weight: a.zero_weight,
                })
                .collect(),
        };
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&artifact)? + "\n")
            .map_err(|e| Error::io(&path, e))?;
        let path = dir.join(format!("{stem}.terms"));
        std::fs::write(&path, crate::corpus::matrix_terms_file(&self.terms))
            .map_err(|e| Error::io(&path, e))?;
        self.factors.save(dir, &stem)
    }

    pub fn load(dir: &Path, window_id: usize) -> Result<Self> {
        let stem = Self::stem(window_id);
        let path = dir.join(format!("{stem}.json"));
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let artifact: WindowArtifact = serde_json::from_str(&text)?;
        let terms = crate::corpus::read_matrix_terms(&dir.join(format!("{stem}.terms")))?;
        let factors = TopicModelFactors::load(dir, &stem)?;
        if factors.k != artifact.k_selected
            || factors.h.ncols() != terms.len()
            || factors.w.nrows() != artifact.assignments.len()
        {
            return Err(Error::ShapeMismatch(format!("{stem}: artifact and factors disagree")));
        }
        let mut topic_coherence = Vec::new();
        let mut descriptors = Vec::new();
        for rec in artifact.topics {
            topic_coherence.push(rec.coherence);
            descriptors.push(rec.descriptor);
        }
        let (speech_ids, assignments) = artifact
            .assignments
            .into_iter()
            .map(|a| {
                (
                    a.speech_id,
                    Assignment {
                        topic: a.topic,
                        zero_weight: a.zero_weight,
                    },
                )
            })
            .unzip();
        Ok(WindowTopicModel {
            window_id: artifact.window_id,
            k_selected: artifact.k_selected,
            factors,
            coherence_by_k: artifact.k_sweep.into_iter().map(|s| (s.k, s.coherence)).collect(),
            topic_coherence,
            descriptors,
            speech_ids,
            terms,
            assignments,
        })
    }
}
