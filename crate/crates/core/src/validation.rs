//! Checks on the dynamic topics: a hierarchy over their term profiles and a
//! comparison against an external subject taxonomy.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Write;

use kodama::{linkage, Method};
use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::corpus::PreprocessConfig;
use crate::error::{Error, Result};
use crate::window_topics::Descriptor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Node ids: `0..leaves` are topics, `leaves + i` is the cluster made by merge `i`.
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: usize,
    pub merges: Vec<Merge>,
    /// Rows with zero variance; their similarity to everything was set to 0.5.
    pub constant_rows: Vec<usize>,
}

/// Pearson correlation rescaled to `[0, 1]`. `None` when either vector is constant.
pub fn normalized_pearson(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.sum() / n, y.sum() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Some((r + 1.0) / 2.0)
}

/// Average-linkage clustering of the rows of `h` (one row per dynamic topic)
/// with distance `1 - normalized_pearson`.
pub fn cluster_topics(h: &Array2<f64>) -> Result<Dendrogram> {
    let n = h.nrows();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "clustering needs at least 2 topics, got {n}"
        )));
    }
    let constant: BTreeSet<usize> = (0..n)
        .filter(|&i| {
            let row = h.row(i);
            row.iter().all(|&v| v == row[0])
        })
        .collect();
    if !constant.is_empty() {
        log::warn!(
            "{} topic rows have zero variance; their similarities default to 0.5",
            constant.len()
        );
    }
    let mut condensed = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let sim = normalized_pearson(h.row(i), h.row(j)).unwrap_or(0.5);
            condensed.push(1.0 - sim);
        }
    }
    let dend = linkage(&mut condensed, n, Method::Average);
    let merges = dend
        .steps()
        .iter()
        .map(|s| Merge {
            a: s.cluster1,
            b: s.cluster2,
            height: s.dissimilarity.max(0.0),
            size: s.size,
        })
        .collect();
    Ok(Dendrogram {
        leaves: n,
        merges,
        constant_rows: constant.into_iter().collect(),
    })
}

impl Dendrogram {
    fn height(&self, node: usize) -> f64 {
        if node < self.leaves {
            0.0
        } else {
            self.merges[node - self.leaves].height
        }
    }

    /// Newick rendering with branch lengths equal to height differences.
    /// Leaves are named by `label`.
    pub fn to_newick(&self, label: impl Fn(usize) -> String) -> String {
        let mut out = String::new();
        match self.merges.len() {
            0 => out.push_str(&label(0)),
            m => self.write_node(&mut out, self.leaves + m - 1, &label),
        }
        out.push(';');
        out
    }

    fn write_node(&self, out: &mut String, node: usize, label: &impl Fn(usize) -> String) {
        if node < self.leaves {
            out.push_str(&label(node));
            return;
        }
        let merge = self.merges[node - self.leaves];
        out.push('(');
        for (i, child) in [merge.a, merge.b].into_iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            self.write_node(out, child, label);
            let _ = write!(out, ":{}", merge.height - self.height(child));
        }
        out.push(')');
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyNode {
    pub code: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub children: Vec<TaxonomyNode>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TaxonomyFile {
    Forest(Vec<TaxonomyNode>),
    Tree(TaxonomyNode),
}

/// Parses a taxonomy given as one root object or an array of roots.
pub fn parse_taxonomy(json: &str) -> Result<Vec<TaxonomyNode>> {
    Ok(match serde_json::from_str(json)? {
        TaxonomyFile::Forest(nodes) => nodes,
        TaxonomyFile::Tree(node) => vec![node],
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomySubject {
    pub code: String,
    pub title: String,
    /// Title and description of the subject and of every subject below it.
    pub document: String,
}

/// Subjects found `depth` levels down the taxonomy (roots are depth 1).
pub fn subjects_at_depth(roots: &[TaxonomyNode], depth: usize) -> Result<Vec<TaxonomySubject>> {
    fn collect<'a>(nodes: &'a [TaxonomyNode], depth: usize, out: &mut Vec<&'a TaxonomyNode>) {
        for node in nodes {
            if depth == 1 {
                out.push(node);
            } else {
                collect(&node.children, depth - 1, out);
            }
        }
    }
    fn document(node: &TaxonomyNode, out: &mut String) {
        for part in [&node.title, &node.description] {
            if !part.is_empty() {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(part);
            }
        }
        for child in &node.children {
            document(child, out);
        }
    }
    if depth == 0 {
        return Err(Error::InvalidConfig("taxonomy depth starts at 1".into()));
    }
    let mut nodes = Vec::new();
    collect(roots, depth, &mut nodes);
    let mut seen = HashSet::new();
    nodes
        .into_iter()
        .map(|node| {
            if !seen.insert(node.code.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate subject code {}", node.code)));
            }
            let mut doc = String::new();
            document(node, &mut doc);
            Ok(TaxonomySubject {
                code: node.code.clone(),
                title: node.title.clone(),
                document: doc,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMatch {
    pub code: String,
    pub title: String,
    pub best_topic: usize,
    pub similarity: f64,
}

/// Cosine similarity between binary top-term vectors and term-frequency
/// subject vectors.
fn presence_tf_cosine(topic: &BTreeSet<&str>, tf: &HashMap<String, usize>, tf_norm: f64) -> f64 {
    if topic.is_empty() || tf_norm == 0.0 {
        return 0.0;
    }
    let dot: usize = topic.iter().filter_map(|t| tf.get(*t)).sum();
    dot as f64 / ((topic.len() as f64).sqrt() * tf_norm)
}

/// Finds, for each subject, the dynamic topic whose top `top_t` terms are most
/// similar to the subject document. Subject text goes through the corpus
/// token filters in `config`. Ties go to the lower topic index.
pub fn match_taxonomy(
    descriptors: &[Descriptor],
    subjects: &[TaxonomySubject],
    top_t: usize,
    config: &PreprocessConfig,
) -> Result<Vec<SubjectMatch>> {
    if subjects.is_empty() {
        return Err(Error::InvalidConfig("no taxonomy subjects to match".into()));
    }
    if descriptors.is_empty() {
        return Err(Error::InvalidConfig("no topics to match against".into()));
    }
    let topics: Vec<BTreeSet<&str>> = descriptors
        .iter()
        .map(|d| d.terms.iter().take(top_t).map(String::as_str).collect())
        .collect();
    subjects
        .iter()
        .map(|subject| {
            let tokens = crate::corpus::preprocess_text(&subject.document, config);
            if tokens.is_empty() {
                return Err(Error::EmptySubject {
                    code: subject.code.clone(),
                });
            }
            let mut tf: HashMap<String, usize> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_insert(0) += 1;
            }
            let norm = tf.values().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
            let mut best = (0, f64::NEG_INFINITY);
            for (d, topic) in topics.iter().enumerate() {
                let sim = presence_tf_cosine(topic, &tf, norm);
                if sim > best.1 {
                    best = (d, sim);
                }
            }
            Ok(SubjectMatch {
                code: subject.code.clone(),
                title: subject.title.clone(),
                best_topic: best.0,
                similarity: best.1,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallPoint {
    pub threshold: f64,
    pub recall: f64,
}

/// Fraction of subjects whose best similarity reaches each threshold.
pub fn recall_curve(matches: &[SubjectMatch], thresholds: &[f64]) -> Vec<RecallPoint> {
    thresholds
        .iter()
        .map(|&threshold| {
            let hits = matches.iter().filter(|m| m.similarity >= threshold).count();
            RecallPoint {
                threshold,
                recall: if matches.is_empty() {
                    0.0
                } else {
                    hits as f64 / matches.len() as f64
                },
            }
        })
        .collect()
}

pub fn write_recall_csv<W: Write>(mut out: W, curve: &[RecallPoint]) -> std::io::Result<()> {
    writeln!(out, "threshold,recall")?;
    for p in curve {
        writeln!(out, "{},{}", p.threshold, p.recall)?;
    }
    Ok(())
}
