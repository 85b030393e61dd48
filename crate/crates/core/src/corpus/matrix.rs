use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PreprocessConfig, TokenizedDocument};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// TF-IDF speech × term matrix of one time window.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    pub window_id: usize,
    /// Speech id of each row.
    pub rows: Vec<String>,
    /// Term of each column, in lexicographic order.
    pub terms: Vec<String>,
    pub matrix: CsrMatrix,
    /// Speeches of the window that ended up without a row.
    pub dropped: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    window_id: usize,
    rows: Vec<String>,
    dropped: Vec<String>,
}

impl DocTermMatrix {
    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Writes `<stem>.triplets`, `<stem>.terms` (one term per line, line index
    /// = column index) and `<stem>.rows.json` (row ids and dropped speeches).
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let write = |name: String, body: String| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(path, e))
        };
        write(format!("{stem}.triplets"), self.matrix.to_triplet_string())?;
        write(format!("{stem}.terms"), terms_file(&self.terms))?;
        let sidecar = Sidecar {
            window_id: self.window_id,
            rows: self.rows.clone(),
            dropped: self.dropped.clone(),
        };
        write(format!("{stem}.rows.json"), serde_json::to_string_pretty(&sidecar)? + "\n")
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let matrix = CsrMatrix::load(&dir.join(format!("{stem}.triplets")))?;
        let terms = read_terms_file(&dir.join(format!("{stem}.terms")))?;
        let path = dir.join(format!("{stem}.rows.json"));
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)?;
        if sidecar.rows.len() != matrix.n_rows() || terms.len() != matrix.n_cols() {
            return Err(Error::ShapeMismatch(format!(
                "{stem}: {} row ids and {} terms for a {}x{} matrix",
                sidecar.rows.len(),
                terms.len(),
                matrix.n_rows(),
                matrix.n_cols()
            )));
        }
        Ok(DocTermMatrix {
            window_id: sidecar.window_id,
            rows: sidecar.rows,
            terms,
            matrix,
            dropped: sidecar.dropped,
        })
    }
}

pub(crate) fn terms_file(terms: &[String]) -> String {
    let mut out = String::with_capacity(terms.iter().map(|t| t.len() + 1).sum());
    for t in terms {
        out.push_str(t);
        out.push('\n');
    }
    out
}

pub(crate) fn read_terms_file(path: &Path) -> Result<Vec<String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    std::io::BufReader::new(file)
        .lines()
        .map(|l| l.map_err(|e| Error::io(path, e)))
        .collect()
}

/// Builds the window matrix: raw term counts weighted by `ln(n / df)` with
/// `n` the number of documents given, then rows scaled to unit L2 norm.
/// Terms found in fewer than `min_doc_freq` documents are discarded and rows
/// left without weight are dropped.
pub fn build_matrix(
    docs: &[TokenizedDocument],
    config: &PreprocessConfig,
    window_id: usize,
) -> Result<DocTermMatrix> {
    config.validate()?;
    let counts: Vec<HashMap<&str, usize>> = docs
        .iter()
        .map(|d| {
            let mut tf = HashMap::new();
            for t in &d.tokens {
                *tf.entry(t.as_str()).or_insert(0) += 1;
            }
            tf
        })
        .collect();

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for tf in &counts {
        for &term in tf.keys() {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    // BTreeMap iteration gives lexicographic column order
    let terms: Vec<&str> = df
        .iter()
        .filter(|&(_, &f)| f >= config.min_doc_freq)
        .map(|(&t, _)| t)
        .collect();
    let column: HashMap<&str, usize> = terms.iter().enumerate().map(|(i, &t)| (t, i)).collect();

    let n = docs.len() as f64;
    let idf: Vec<f64> = terms.iter().map(|t| (n / df[t] as f64).ln()).collect();

    let mut rows = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (doc, tf) in docs.iter().zip(&counts) {
        let row: Vec<(usize, f64)> = tf
            .iter()
            .filter_map(|(t, &c)| column.get(t).map(|&j| (j, c as f64 * idf[j])))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        if row.is_empty() {
            dropped.push(doc.id.clone());
        } else {
            rows.push(row);
            kept.push(doc.id.clone());
        }
    }
    if rows.is_empty() {
        return Err(Error::DegenerateWindow { window_id });
    }
    if !dropped.is_empty() {
        log::info!("window {window_id}: {} speeches without weight dropped", dropped.len());
    }
    let mut matrix = CsrMatrix::from_rows(terms.len(), rows)?;
    matrix.normalize_rows();
    Ok(DocTermMatrix {
        window_id,
        rows: kept,
        terms: terms.into_iter().map(String::from).collect(),
        matrix,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, tokens: &[&str]) -> TokenizedDocument {
        TokenizedDocument {
            id: id.into(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    fn config(min_doc_freq: usize) -> PreprocessConfig {
        PreprocessConfig {
            min_doc_freq,
            ..Default::default()
        }
    }

    #[test]
    fn shared_terms_make_a_degenerate_window() {
        let docs = [doc("a", &["x", "y"]), doc("b", &["y", "x"])];
        assert!(matches!(
            build_matrix(&docs, &config(1), 7),
            Err(Error::DegenerateWindow { window_id: 7 })
        ));
    }

    #[test]
    fn hand_computed_weights() {
        // doc a = {a,a,b}, doc b = {b,c}; idf(a)=idf(c)=ln 2, idf(b)=0
        let docs = [doc("d1", &["a", "a", "b"]), doc("d2", &["b", "c"])];
        let m = build_matrix(&docs, &config(1), 0).unwrap();
        assert_eq!(m.terms, vec!["a", "b", "c"]);
        let dense = m.matrix.to_dense();
        // d1: (2 ln2, 0, 0) normalised -> (1, 0, 0); d2: (0, 0, ln2) -> (0, 0, 1)
        assert_eq!(dense.row(0).to_vec(), vec![1.0, 0.0, 0.0]);
        assert_eq!(dense.row(1).to_vec(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn hand_computed_weights_uneven() {
        // three docs: {a,a,b}, {b,c}, {c}; df a=1 b=2 c=2, n=3
        let docs = [doc("1", &["a", "a", "b"]), doc("2", &["b", "c"]), doc("3", &["c"])];
        let m = build_matrix(&docs, &config(1), 0).unwrap();
        let l3 = 3f64.ln();
        let l32 = (1.5f64).ln();
        let (wa, wb) = (2.0 * l3, l32);
        let norm = (wa * wa + wb * wb).sqrt();
        let dense = m.matrix.to_dense();
        assert!((dense[[0, 0]] - wa / norm).abs() < 1e-15);
        assert!((dense[[0, 1]] - wb / norm).abs() < 1e-15);
        assert!((dense[[1, 1]] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((dense[[2, 2]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn df_filter_and_dropped_rows() {
        let docs = [
            doc("1", &["common", "rare"]),
            doc("2", &["common", "other"]),
            doc("3", &["other"]),
            doc("4", &[]),
        ];
        let m = build_matrix(&docs, &config(2), 3).unwrap();
        assert_eq!(m.terms, vec!["common", "other"]);
        assert_eq!(m.rows, vec!["1", "2", "3"]);
        assert_eq!(m.dropped, vec!["4"]);
        for r in 0..m.n_docs() {
            assert!((m.matrix.row_norm(r) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn save_and_load() {
        let docs = [doc("1", &["a", "a", "b"]), doc("2", &["b", "c"]), doc("3", &["c"])];
        let m = build_matrix(&docs, &config(1), 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path(), "w").unwrap();
        assert_eq!(DocTermMatrix::load(dir.path(), "w").unwrap(), m);
    }
}
