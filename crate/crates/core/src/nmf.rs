//! Deterministic non-negative matrix factorization `A ≈ W H`.
//!
//! Factors are initialised with NNDSVD and refined by alternating
//! least-squares sweeps. Each sweep solves the least-squares problem for one
//! column of `W` (then one row of `H`) with every other block held fixed and
//! clips negative entries, which is the exact minimiser of that block under
//! the non-negativity constraint. The reconstruction error therefore never
//! increases from one sweep to the next.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{dense_to_triplet_string, CsrMatrix};
use crate::svd::{leading_triplets, Triplets};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub max_iter: usize,
    /// Stop once `|e_prev - e| / e_prev` falls below this.
    pub rel_tol: f64,
    /// Floor applied to every updated entry.
    pub nonneg_clip: f64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        NmfConfig {
            max_iter: 200,
            rel_tol: 1e-6,
            nonneg_clip: 0.0,
        }
    }
}

impl NmfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig("rel_tol must be positive".into()));
        }
        if !(self.nonneg_clip >= 0.0) || !self.nonneg_clip.is_finite() {
            return Err(Error::InvalidConfig("nonneg_clip must be a finite value >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModelFactors {
    /// `n x k` document (or topic-document) weights.
    pub w: Array2<f64>,
    /// `k x m` topic-term weights.
    pub h: Array2<f64>,
    pub k: usize,
    /// Reconstruction error of the initial factors followed by one entry per sweep.
    pub error_trace: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FactorHeader {
    k: usize,
    iterations: usize,
    final_error: f64,
    error_trace: Vec<f64>,
}

impl TopicModelFactors {
    pub fn final_error(&self) -> f64 {
        *self.error_trace.last().expect("trace holds the initial error")
    }

    /// Writes `<stem>.W.triplets`, `<stem>.H.triplets` and `<stem>.factors.json`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let write = |name: String, body: String| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(path, e))
        };
        write(format!("{stem}.W.triplets"), dense_to_triplet_string(&self.w))?;
        write(format!("{stem}.H.triplets"), dense_to_triplet_string(&self.h))?;
        let header = FactorHeader {
            k: self.k,
            iterations: self.iterations,
            final_error: self.final_error(),
            error_trace: self.error_trace.clone(),
        };
        write(format!("{stem}.factors.json"), serde_json::to_string_pretty(&header)? + "\n")
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let path = dir.join(format!("{stem}.factors.json"));
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let header: FactorHeader = serde_json::from_str(&text)?;
        let w = CsrMatrix::load(&dir.join(format!("{stem}.W.triplets")))?.to_dense();
        let h = CsrMatrix::load(&dir.join(format!("{stem}.H.triplets")))?.to_dense();
        if w.ncols() != header.k || h.nrows() != header.k {
            return Err(Error::ShapeMismatch(format!(
                "{stem}: factors {:?} and {:?} disagree with k = {}",
                w.dim(),
                h.dim(),
                header.k
            )));
        }
        Ok(TopicModelFactors {
            w,
            h,
            k: header.k,
            error_trace: header.error_trace,
            iterations: header.iterations,
        })
    }
}

fn check_rank(a: &CsrMatrix, k: usize) -> Result<()> {
    let (rows, cols) = a.shape();
    let bound = rows.min(cols);
    if k == 0 || k > bound {
        return Err(Error::InvalidRank { k, bound, rows, cols });
    }
    Ok(())
}

/// NNDSVD initial factors from the leading `k` singular triplets of `a`.
///
/// The leading pair is taken in absolute value. Every later pair is split into
/// its positive and negative sections and the section pair with the larger
/// product of norms is kept, scaled by `sqrt(sigma * section_norm_product)`.
/// Zeros are left in place.
pub fn nndsvd_init(a: &CsrMatrix, k: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    check_rank(a, k)?;
    if a.values().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidConfig(
            "matrix must be finite and non-negative".into(),
        ));
    }
    let (n, m) = a.shape();
    let Triplets { sigma, u, v } = leading_triplets(a, k)?;
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(Error::Svd("non-finite singular values".into()));
    }
    if sigma[0] <= 0.0 {
        return Err(Error::Svd("matrix has no non-zero singular value".into()));
    }

    let mut w = Array2::zeros((n, k));
    let mut h = Array2::zeros((k, m));

    let lead = sigma[0].sqrt();
    for i in 0..n {
        w[[i, 0]] = lead * u[[i, 0]].abs();
    }
    for j in 0..m {
        h[[0, j]] = lead * v[[j, 0]].abs();
    }

    for c in 1..k {
        let x: Vec<f64> = u.column(c).to_vec();
        let y: Vec<f64> = v.column(c).to_vec();
        let (xp, xn) = split_sections(&x);
        let (yp, yn) = split_sections(&y);
        let (nxp, nxn, nyp, nyn) = (norm(&xp), norm(&xn), norm(&yp), norm(&yn));
        let (mp, mn) = (nxp * nyp, nxn * nyn);
        let (xs, ys, nx, ny, section) = if mp > mn {
            (xp, yp, nxp, nyp, mp)
        } else {
            (xn, yn, nxn, nyn, mn)
        };
        if section == 0.0 {
            continue;
        }
        let scale = (sigma[c] * section).sqrt();
        for (i, v) in xs.iter().enumerate() {
            w[[i, c]] = scale * v / nx;
        }
        for (j, v) in ys.iter().enumerate() {
            h[[c, j]] = scale * v / ny;
        }
    }
    Ok((w, h))
}

fn split_sections(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    x.iter().map(|&v| (v.max(0.0), (-v).max(0.0))).unzip()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Frobenius norm `||A - W H||_F`.
pub fn reconstruction_error(a: &CsrMatrix, w: &Array2<f64>, h: &Array2<f64>) -> Result<f64> {
    let (n, m) = a.shape();
    if w.nrows() != n || h.ncols() != m || w.ncols() != h.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "A is {n}x{m}, W is {:?}, H is {:?}",
            w.dim(),
            h.dim()
        )));
    }
    let per_row: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|r| {
            let mut approx = w.row(r).dot(h);
            let (cols, vals) = a.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                approx[c] -= v;
            }
            approx.iter().map(|d| d * d).sum::<f64>()
        })
        .collect();
    Ok(per_row.iter().sum::<f64>().sqrt())
}

/// Factorizes `a` into `k` non-negative components starting from NNDSVD.
pub fn factorize(a: &CsrMatrix, k: usize, config: &NmfConfig) -> Result<TopicModelFactors> {
    config.validate()?;
    let (w, h) = nndsvd_init(a, k)?;
    factorize_from(a, w, h, config)
}

/// Runs the alternating updates from given initial factors.
///
/// NNDSVD component `c` does not depend on `k`, so the first `k` columns of a
/// larger initialization are exactly the rank-`k` one.
pub fn factorize_from(
    a: &CsrMatrix,
    mut w: Array2<f64>,
    mut h: Array2<f64>,
    config: &NmfConfig,
) -> Result<TopicModelFactors> {
    config.validate()?;
    let k = w.ncols();
    if w.nrows() != a.n_rows() || h.ncols() != a.n_cols() || h.nrows() != k {
        return Err(Error::ShapeMismatch(format!(
            "A is {}x{}, W0 is {:?}, H0 is {:?}",
            a.n_rows(),
            a.n_cols(),
            w.dim(),
            h.dim()
        )));
    }
    check_rank(a, k)?;
    let clip = config.nonneg_clip;
    if clip > 0.0 {
        w.mapv_inplace(|v| v.max(clip));
        h.mapv_inplace(|v| v.max(clip));
    }
    let mut trace = vec![reconstruction_error(a, &w, &h)?];
    let mut iterations = 0;

    for iteration in 1..=config.max_iter {
        // W columns, with H fixed
        let aht = a.mul_dense(&h.t().to_owned());
        let hht = h.dot(&h.t());
        update_columns(&mut w, &aht, &hht, clip);

        // H rows, with W fixed
        let wta = a.t_mul_dense(&w);
        let wtw = w.t().dot(&w);
        let mut ht = h.t().to_owned();
        update_columns(&mut ht, &wta, &wtw, clip);
        h = ht.t().to_owned();

        let err = reconstruction_error(a, &w, &h)?;
        if !err.is_finite() || w.iter().chain(h.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup { iteration });
        }
        let prev = *trace.last().unwrap();
        trace.push(err);
        iterations = iteration;
        if prev == 0.0 || (prev - err).abs() / prev < config.rel_tol {
            break;
        }
    }
    debug_assert!(w.iter().chain(h.iter()).all(|&v| v >= 0.0));
    Ok(TopicModelFactors {
        w,
        h,
        k,
        error_trace: trace,
        iterations,
    })
}

/// One Gauss-Seidel pass over the columns of `x` minimising
/// `||B - X G||` column by column, where `cross = B G^T` and `gram = G G^T`.
fn update_columns(x: &mut Array2<f64>, cross: &Array2<f64>, gram: &Array2<f64>, clip: f64) {
    for j in 0..x.ncols() {
        let d = gram[[j, j]];
        if d <= 0.0 {
            continue;
        }
        let fitted: Array1<f64> = x.dot(&gram.column(j));
        let residual = &cross.column(j) - &fitted;
        x.index_axis_mut(Axis(1), j)
            .zip_mut_with(&residual, |v, r| *v = (*v + r / d).max(clip));
    }
}
