//! Leading singular triplets of a sparse matrix.
//!
//! Small matrices go through a dense SVD. Larger ones use Golub–Kahan–Lanczos
//! bidiagonalization with full reorthogonalization, which only touches `A`
//! through sparse products and stops once the requested triplets converge.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Below this smaller dimension the dense route is cheap enough.
const DENSE_LIMIT: usize = 200;
/// Residual bound, relative to the largest singular value, for a Ritz triplet
/// to count as converged.
const TOLERANCE: f64 = 1e-12;

/// `k` leading singular values (descending) with their left and right
/// singular vectors as the columns of `u` and `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplets {
    pub sigma: Array1<f64>,
    pub u: Array2<f64>,
    pub v: Array2<f64>,
}

pub fn leading_triplets(a: &CsrMatrix, k: usize) -> Result<Triplets> {
    if a.n_rows().min(a.n_cols()) <= DENSE_LIMIT.max(2 * k) {
        dense_triplets(a, k)
    } else {
        lanczos_triplets(a, k)
    }
}

pub fn dense_triplets(a: &CsrMatrix, k: usize) -> Result<Triplets> {
    let (n, m) = a.shape();
    let mut dense = DMatrix::<f64>::zeros(n, m);
    for (r, c, v) in a.iter() {
        dense[(r, c)] = v;
    }
    let svd = nalgebra::SVD::try_new(dense, true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Svd("no convergence".into()))?;
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::Svd("singular vectors missing".into()));
    };
    Ok(Triplets {
        sigma: Array1::from_iter(svd.singular_values.iter().take(k).copied()),
        u: Array2::from_shape_fn((n, k), |(i, c)| u[(i, c)]),
        v: Array2::from_shape_fn((m, k), |(j, c)| v_t[(c, j)]),
    })
}

fn mul(a: &CsrMatrix, x: &Array1<f64>) -> Array1<f64> {
    Array1::from_iter((0..a.n_rows()).map(|r| {
        let (cols, vals) = a.row(r);
        cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum::<f64>()
    }))
}

fn t_mul(a: &CsrMatrix, y: &Array1<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(a.n_cols());
    for r in 0..a.n_rows() {
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            out[c] += v * y[r];
        }
    }
    out
}

/// Removes the components of `x` along the first `used` columns of `basis`,
/// twice over for numerical safety.
fn reorthogonalize(x: &mut Array1<f64>, basis: &Array2<f64>, used: usize) {
    for _ in 0..2 {
        for j in 0..used {
            let b = basis.column(j);
            let d = b.dot(x);
            x.scaled_add(-d, &b);
        }
    }
}

/// A fresh unit vector orthogonal to the first `used` columns of `basis`, or
/// `None` once they span the space.
fn restart(rng: &mut ChaCha8Rng, basis: &Array2<f64>, used: usize) -> Option<Array1<f64>> {
    for _ in 0..3 {
        let mut x = Array1::from_shape_fn(basis.nrows(), |_| rng.gen_range(-1.0..1.0));
        reorthogonalize(&mut x, basis, used);
        let norm = x.dot(&x).sqrt();
        if norm > 1e-8 {
            return Some(x / norm);
        }
    }
    None
}

pub fn lanczos_triplets(a: &CsrMatrix, k: usize) -> Result<Triplets> {
    let (n, m) = a.shape();
    let full = n.min(m);
    if k == 0 || k > full {
        return Err(Error::InvalidRank { k, bound: full, rows: n, cols: m });
    }
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Err(Error::Svd("matrix has no non-zero singular value".into()));
    }
    let tiny = scale * 1e-14;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut us = Array2::<f64>::zeros((n, full));
    let mut vs = Array2::<f64>::zeros((m, full + 1));
    let mut alpha = Vec::with_capacity(full);
    let mut beta = Vec::with_capacity(full);
    let start = restart(&mut rng, &vs, 0).expect("non-empty space");
    vs.column_mut(0).assign(&start);

    let mut target = full.min(2 * k + 20);
    loop {
        while alpha.len() < target {
            let j = alpha.len();
            let mut u = mul(a, &vs.column(j).to_owned());
            reorthogonalize(&mut u, &us, j);
            let mut a_j = u.dot(&u).sqrt();
            if a_j <= tiny {
                // A v_j lies in the span already found
                a_j = 0.0;
                match restart(&mut rng, &us, j) {
                    Some(x) => u = x,
                    None => break,
                }
            } else {
                u /= a_j;
            }
            us.column_mut(j).assign(&u);
            alpha.push(a_j);

            let mut v = t_mul(a, &u);
            reorthogonalize(&mut v, &vs, j + 1);
            let mut b_j = v.dot(&v).sqrt();
            if b_j <= tiny {
                b_j = 0.0;
                match restart(&mut rng, &vs, j + 1) {
                    Some(x) => v = x,
                    None => {
                        beta.push(0.0);
                        break;
                    }
                }
            } else {
                v /= b_j;
            }
            vs.column_mut(j + 1).assign(&v);
            beta.push(b_j);
        }

        let s = alpha.len();
        let mut bidiag = DMatrix::<f64>::zeros(s, s);
        for j in 0..s {
            bidiag[(j, j)] = alpha[j];
            if j + 1 < s {
                bidiag[(j, j + 1)] = beta[j];
            }
        }
        let svd = nalgebra::SVD::try_new(bidiag, true, true, f64::EPSILON, 0)
            .ok_or_else(|| Error::Svd("no convergence".into()))?;
        let (Some(x), Some(y_t)) = (svd.u, svd.v_t) else {
            return Err(Error::Svd("singular vectors missing".into()));
        };
        let sigma = &svd.singular_values;
        let last = beta[s - 1];
        let converged = (0..k.min(s)).all(|i| (last * x[(s - 1, i)]).abs() <= TOLERANCE * sigma[0]);
        if s >= k && (converged || s == full) {
            let ub = Array2::from_shape_fn((s, k), |(r, c)| x[(r, c)]);
            let vb = Array2::from_shape_fn((s, k), |(r, c)| y_t[(c, r)]);
            return Ok(Triplets {
                sigma: Array1::from_iter(sigma.iter().take(k).copied()),
                u: us.slice_axis(Axis(1), (0..s).into()).dot(&ub),
                v: vs.slice_axis(Axis(1), (0..s).into()).dot(&vb),
            });
        }
        if s < target {
            return Err(Error::Svd(format!("Lanczos stalled after {s} of {k} triplets")));
        }
        target = full.min(target + k + 10);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sparse_fixture(n: usize, m: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dense = Array2::from_shape_fn((n, m), |(i, j)| {
            let block = if (i * 4 / n) == (j * 4 / m) { 1.0 } else { 0.0 };
            if rng.gen_bool(0.15) { block + rng.gen_range(0.0..0.5) } else { 0.0 }
        });
        CsrMatrix::from_dense(&dense)
    }

    fn assert_same_subspace(a: &Triplets, b: &Triplets, tol: f64) {
        for c in 0..a.sigma.len() {
            assert!((a.sigma[c] - b.sigma[c]).abs() <= tol * a.sigma[0], "sigma {c}");
            let sign = a.u.column(c).dot(&b.u.column(c)).signum();
            let du = (&a.u.column(c) - &(&b.u.column(c) * sign)).mapv(f64::abs).fold(0.0, |m: f64, &x| m.max(x));
            let dv = (&a.v.column(c) - &(&b.v.column(c) * sign)).mapv(f64::abs).fold(0.0, |m: f64, &x| m.max(x));
            assert!(du <= tol && dv <= tol, "triplet {c}: |du| = {du:e}, |dv| = {dv:e}");
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        for (n, m, seed) in [(60, 40, 1), (35, 90, 2), (120, 120, 3)] {
            let a = sparse_fixture(n, m, seed);
            let dense = dense_triplets(&a, 4).unwrap();
            let lanczos = lanczos_triplets(&a, 4).unwrap();
            assert_same_subspace(&dense, &lanczos, 1e-8);
        }
    }

    #[test]
    fn lanczos_handles_low_rank() {
        // rank 2, yet 4 triplets are requested
        let u = Array2::from_shape_fn((30, 2), |(i, j)| ((i + 3 * j) % 5) as f64);
        let v = Array2::from_shape_fn((2, 25), |(j, c)| ((c * (j + 1)) % 4) as f64);
        let a = CsrMatrix::from_dense(&u.dot(&v));
        let t = lanczos_triplets(&a, 4).unwrap();
        let d = dense_triplets(&a, 4).unwrap();
        for c in 0..2 {
            assert!((t.sigma[c] - d.sigma[c]).abs() < 1e-9 * d.sigma[0]);
        }
        assert!(t.sigma[2].abs() < 1e-9 * d.sigma[0]);
    }

    #[test]
    fn lanczos_is_repeatable() {
        let a = sparse_fixture(80, 50, 4);
        assert_eq!(lanczos_triplets(&a, 5).unwrap(), lanczos_triplets(&a, 5).unwrap());
    }
}
