//! Second layer: window topics are stacked into a topic-document matrix and
//! factorized again, giving dynamic topics that can span many windows.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::nmf::{NmfConfig, TopicModelFactors};
use crate::sparse::CsrMatrix;
use crate::window_topics::{
    assign_rows, sweep_k, top_terms, Assignment, Descriptor, KRange, SweepScore, WindowTopicModel,
};

/// A topic of one window model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowTopicRef {
    pub window_id: usize,
    pub topic: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicDocumentMatrix {
    pub rows: Vec<WindowTopicRef>,
    /// Terms that appear among the top terms of at least one window topic.
    pub terms: Vec<String>,
    pub matrix: CsrMatrix,
}

impl TopicDocumentMatrix {
    /// Writes `<stem>.triplets`, `<stem>.terms` and `<stem>.rows.json`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let write = |name: String, body: String| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(path, e))
        };
        write(format!("{stem}.triplets"), self.matrix.to_triplet_string())?;
        write(format!("{stem}.terms"), crate::corpus::matrix_terms_file(&self.terms))?;
        write(format!("{stem}.rows.json"), serde_json::to_string_pretty(&self.rows)? + "\n")
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let matrix = CsrMatrix::load(&dir.join(format!("{stem}.triplets")))?;
        let terms = crate::corpus::read_matrix_terms(&dir.join(format!("{stem}.terms")))?;
        let path = dir.join(format!("{stem}.rows.json"));
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let rows: Vec<WindowTopicRef> = serde_json::from_str(&text)?;
        if rows.len() != matrix.n_rows() || terms.len() != matrix.n_cols() {
            return Err(Error::ShapeMismatch(format!(
                "{stem}: {} rows and {} terms for a {}x{} matrix",
                rows.len(),
                terms.len(),
                matrix.n_rows(),
                matrix.n_cols()
            )));
        }
        Ok(TopicDocumentMatrix { rows, terms, matrix })
    }
}

/// Stacks the top-`t` weights of every window topic as rows over the union of
/// selected terms. Terms never selected get no column. With `normalize` each
/// row is scaled to unit L2 norm.
pub fn build_topic_document_matrix(
    models: &[WindowTopicModel],
    t: usize,
    normalize: bool,
) -> Result<TopicDocumentMatrix> {
    if models.is_empty() {
        return Err(Error::InvalidConfig("no window topic models to stack".into()));
    }
    if t == 0 {
        return Err(Error::InvalidConfig("stacking needs at least one term per topic".into()));
    }
    let mut refs = Vec::new();
    let mut truncated: Vec<Descriptor> = Vec::new();
    for model in models {
        for (topic, row) in model.factors.h.rows().into_iter().enumerate() {
            refs.push(WindowTopicRef {
                window_id: model.window_id,
                topic,
            });
            truncated.push(top_terms(row, &model.terms, t));
        }
    }
    let vocab: BTreeSet<&str> = truncated
        .iter()
        .flat_map(|d| d.terms.iter().map(String::as_str))
        .collect();
    let column: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let rows = truncated
        .iter()
        .map(|d| {
            d.terms
                .iter()
                .zip(&d.weights)
                .map(|(term, &w)| (column[term.as_str()], w))
                .collect()
        })
        .collect();
    let mut matrix = CsrMatrix::from_rows(vocab.len(), rows)?;
    if normalize {
        matrix.normalize_rows();
    }
    Ok(TopicDocumentMatrix {
        rows: refs,
        terms: vocab.into_iter().map(String::from).collect(),
        matrix,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicModel {
    pub k: usize,
    pub factors: TopicModelFactors,
    pub coherence_by_k: BTreeMap<usize, f64>,
    pub topic_coherence: Vec<f64>,
    pub descriptors: Vec<Descriptor>,
    /// Window topic of each row of the second-layer `W`.
    pub rows: Vec<WindowTopicRef>,
    /// Term of each column of the second-layer `H`.
    pub terms: Vec<String>,
    /// Dynamic topic of each window topic, aligned with `rows`.
    pub assignments: Vec<Assignment>,
    pub frequency: Vec<usize>,
}

impl DynamicModel {
    /// Window topics assigned to dynamic topic `d`.
    pub fn members(&self, d: usize) -> Vec<WindowTopicRef> {
        self.rows
            .iter()
            .zip(&self.assignments)
            .filter(|(_, a)| a.topic == d)
            .map(|(r, _)| *r)
            .collect()
    }
}

pub fn assign_window_topics(factors: &TopicModelFactors) -> Vec<Assignment> {
    assign_rows(&factors.w)
}

/// Number of distinct windows contributing at least one window topic to each
/// dynamic topic.
pub fn topic_frequency(model: &DynamicModel) -> Vec<usize> {
    frequency_of(model.k, &model.rows, &model.assignments)
}

fn frequency_of(k: usize, rows: &[WindowTopicRef], assignments: &[Assignment]) -> Vec<usize> {
    let mut windows = vec![BTreeSet::new(); k];
    for (r, a) in rows.iter().zip(assignments) {
        windows[a.topic].insert(r.window_id);
    }
    windows.iter().map(BTreeSet::len).collect()
}

/// Second-layer factorization with the number of dynamic topics chosen by
/// coherence of the top-`t` descriptors.
pub fn fit_dynamic(
    b: &TopicDocumentMatrix,
    range: KRange,
    t: usize,
    space: &EmbeddingSpace,
    nmf: &NmfConfig,
) -> Result<DynamicModel> {
    let sweep = sweep_k(&b.matrix, &b.terms, range, t, space, nmf)?;
    let descriptors = sweep
        .factors
        .h
        .rows()
        .into_iter()
        .map(|row| top_terms(row, &b.terms, t))
        .collect();
    let assignments = assign_window_topics(&sweep.factors);
    let frequency = frequency_of(sweep.k_selected, &b.rows, &assignments);
    Ok(DynamicModel {
        k: sweep.k_selected,
        factors: sweep.factors,
        coherence_by_k: sweep.coherence_by_k,
        topic_coherence: sweep.topic_coherence,
        descriptors,
        rows: b.rows.clone(),
        terms: b.terms.clone(),
        assignments,
        frequency,
    })
}

fn index_models(window_models: &[WindowTopicModel]) -> HashMap<usize, &WindowTopicModel> {
    window_models.iter().map(|m| (m.window_id, m)).collect()
}

/// Union of the speeches of every window topic assigned to dynamic topic `d`.
pub fn collect_speeches(
    model: &DynamicModel,
    d: usize,
    window_models: &[WindowTopicModel],
) -> BTreeSet<String> {
    let by_id = index_models(window_models);
    let mut out = BTreeSet::new();
    for member in model.members(d) {
        if let Some(wm) = by_id.get(&member.window_id) {
            out.extend(wm.topic_speeches(member.topic).map(String::from));
        }
    }
    out
}

/// Speech counts per window for every dynamic topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub window_ids: Vec<usize>,
    /// `counts[d][w]` speeches of dynamic topic `d` in `window_ids[w]`.
    pub counts: Vec<Vec<usize>>,
}

impl TimeSeries {
    pub fn series(&self, d: usize) -> &[usize] {
        &self.counts[d]
    }

    /// One row per window, one column per dynamic topic. `label` names each window.
    pub fn write_csv<W: Write>(&self, mut out: W, label: impl Fn(usize) -> String) -> std::io::Result<()> {
        write!(out, "window_id,window")?;
        for d in 0..self.counts.len() {
            write!(out, ",topic_{d}")?;
        }
        writeln!(out)?;
        for (w, &id) in self.window_ids.iter().enumerate() {
            write!(out, "{id},{}", label(id))?;
            for series in &self.counts {
                write!(out, ",{}", series[w])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Counts, for each dynamic topic and window, the speeches reached through the
/// two assignment layers. Windows without members are zero.
pub fn topic_time_series(model: &DynamicModel, window_models: &[WindowTopicModel]) -> TimeSeries {
    let window_ids: Vec<usize> = window_models
        .iter()
        .map(|m| m.window_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let column: HashMap<usize, usize> = window_ids.iter().enumerate().map(|(i, &w)| (w, i)).collect();
    let by_id = index_models(window_models);
    let mut counts = vec![vec![0; window_ids.len()]; model.k];
    for (r, a) in model.rows.iter().zip(&model.assignments) {
        if let Some(wm) = by_id.get(&r.window_id) {
            counts[a.topic][column[&r.window_id]] += wm.topic_speeches(r.topic).count();
        }
    }
    TimeSeries { window_ids, counts }
}

#[derive(Serialize, Deserialize)]
struct DynamicTopicRecord {
    topic: usize,
    coherence: f64,
    frequency: usize,
    #[serde(flatten)]
    descriptor: Descriptor,
    members: Vec<WindowTopicRef>,
}

#[derive(Serialize, Deserialize)]
struct DynamicArtifact {
    k: usize,
    k_sweep: Vec<SweepScore>,
    topics: Vec<DynamicTopicRecord>,
    window_topics: Vec<WindowTopicAssignment>,
}

#[derive(Serialize, Deserialize)]
struct WindowTopicAssignment {
    window_id: usize,
    topic: usize,
    dynamic_topic: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    zero_weight: bool,
}

impl DynamicModel {
    /// Writes `dynamic_topics.json`, the second-layer factors and `dynamic.terms`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let artifact = DynamicArtifact {
            k: self.k,
            k_sweep: self
                .coherence_by_k
                .iter()
                .map(|(&k, &coherence)| SweepScore { k, coherence })
                .collect(),
            topics: (0..self.k)
                .map(|d| DynamicTopicRecord {
                    topic: d,
                    coherence: self.topic_coherence[d],
                    frequency: self.frequency[d],
                    descriptor: self.descriptors[d].clone(),
                    members: self.members(d),
                })
                .collect(),
            window_topics: self
                .rows
                .iter()
                .zip(&self.assignments)
                .map(|(r, a)| WindowTopicAssignment {
                    window_id: r.window_id,
                    topic: r.topic,
                    dynamic_topic: a.topic,
                    zero_weight: a.zero_weight,
                })
                .collect(),
        };
        let path = dir.join("dynamic_topics.json");
        std::fs::write(&path, serde_json::to_string_pretty(&artifact)? + "\n")
            .map_err(|e| Error::io(&path, e))?;
        let path = dir.join("dynamic.terms");
        std::fs::write(&path, crate::corpus::matrix_terms_file(&self.terms))
            .map_err(|e| Error::io(&path, e))?;
        self.factors.save(dir, "dynamic")
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("dynamic_topics.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let artifact: DynamicArtifact = serde_json::from_str(&text)?;
        let terms = crate::corpus::read_matrix_terms(&dir.join("dynamic.terms"))?;
        let factors = TopicModelFactors::load(dir, "dynamic")?;
        if factors.k != artifact.k || factors.w.nrows() != artifact.window_topics.len() {
            return Err(Error::ShapeMismatch("dynamic artifact and factors disagree".into()));
        }
        let mut topic_coherence = Vec::new();
        let mut frequency = Vec::new();
        let mut descriptors = Vec::new();
        for rec in artifact.topics {
            topic_coherence.push(rec.coherence);
            frequency.push(rec.frequency);
            descriptors.push(rec.descriptor);
        }
        let (rows, assignments) = artifact
            .window_topics
            .into_iter()
            .map(|a| {
                (
                    WindowTopicRef {
                        window_id: a.window_id,
                        topic: a.topic,
                    },
                    Assignment {
                        topic: a.dynamic_topic,
                        zero_weight: a.zero_weight,
                    },
                )
            })
            .unzip();
        Ok(DynamicModel {
            k: artifact.k,
            factors,
            coherence_by_k: artifact.k_sweep.into_iter().map(|s| (s.k, s.coherence)).collect(),
            topic_coherence,
            descriptors,
            rows,
            terms,
            assignments,
            frequency,
        })
    }
}
