//! Reference implementations used only by tests. Nothing here calls into the
//! library's numerical code.

#![allow(dead_code)]

use ndarray::{Array1, Array2, Axis};

/// Thin SVD by one-sided Jacobi rotations. Returns singular values in
/// descending order with matching left and right singular vectors as columns.
pub fn jacobi_svd(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>, Array2<f64>) {
    if a.nrows() < a.ncols() {
        let (s, u, v) = jacobi_svd(&a.t().to_owned());
        return (s, v, u);
    }
    let m = a.ncols();
    let mut u = a.clone();
    let mut v = Array2::<f64>::eye(m);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let alpha: f64 = u.column(p).iter().map(|x| x * x).sum();
                let beta: f64 = u.column(q).iter().map(|x| x * x).sum();
                let gamma: f64 = u.column(p).iter().zip(u.column(q)).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut u, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[[r, p]], mat[[r, q]]);
                        mat[[r, p]] = c * x - s * y;
                        mat[[r, q]] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..m).map(|j| u.column(j).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let sigma = Array1::from_iter(order.iter().map(|&j| norms[j]));
    let mut left = Array2::zeros((a.nrows(), m));
    let mut right = Array2::zeros((m, m));
    for (dst, &j) in order.iter().enumerate() {
        if norms[j] > 0.0 {
            left.column_mut(dst).assign(&(&u.column(j) / norms[j]));
        }
        right.column_mut(dst).assign(&v.column(j));
    }
    (sigma, left, right)
}

/// NNDSVD built directly from a dense SVD, following the textbook
/// positive/negative section rule.
pub fn nndsvd_oracle(a: &Array2<f64>, k: usize) -> (Array2<f64>, Array2<f64>) {
    let (sigma, u, v) = jacobi_svd(a);
    let mut w = Array2::zeros((a.nrows(), k));
    let mut h = Array2::zeros((k, a.ncols()));
    w.column_mut(0).assign(&(u.column(0).mapv(f64::abs) * sigma[0].sqrt()));
    h.row_mut(0).assign(&(v.column(0).mapv(f64::abs) * sigma[0].sqrt()));
    for j in 1..k {
        let x = u.column(j);
        let y = v.column(j);
        let xp = x.mapv(|e| e.max(0.0));
        let xn = x.mapv(|e| (-e).max(0.0));
        let yp = y.mapv(|e| e.max(0.0));
        let yn = y.mapv(|e| (-e).max(0.0));
        let l2 = |z: &Array1<f64>| z.dot(z).sqrt();
        let (mp, mn) = (l2(&xp) * l2(&yp), l2(&xn) * l2(&yn));
        let (uu, vv, mag) = if mp > mn {
            (&xp / l2(&xp), &yp / l2(&yp), mp)
        } else {
            (&xn / l2(&xn), &yn / l2(&yn), mn)
        };
        let scale = (sigma[j] * mag).sqrt();
        w.column_mut(j).assign(&(uu * scale));
        h.row_mut(j).assign(&(vv * scale));
    }
    (w, h)
}

/// Cosine similarity computed the long way.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    (a - b).iter().fold(0.0f64, |m, d| m.max(d.abs()))
}

/// For each row of `truth`, the best cosine against any row of `found`.
pub fn best_row_cosines(truth: &Array2<f64>, found: &Array2<f64>) -> Vec<f64> {
    truth
        .axis_iter(Axis(0))
        .map(|t| {
            found
                .axis_iter(Axis(0))
                .map(|f| cosine(t.as_slice().unwrap(), &f.to_vec()))
                .filter(|c| c.is_finite())
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Five fixed non-negative matrices of assorted shapes, with the rank used
/// for NNDSVD on each.
pub fn nndsvd_fixtures() -> Vec<(Array2<f64>, usize)> {
    use ndarray::array;
    vec![
        (
            array![
                [0.9, 0.1, 0.4, 0.0],
                [0.2, 0.8, 0.0, 0.3],
                [0.5, 0.5, 0.6, 0.1],
                [0.0, 0.3, 0.7, 0.9],
                [0.4, 0.0, 0.2, 0.6]
            ],
            2,
        ),
        (
            array![
                [1.0, 0.0, 2.0, 0.5, 0.0, 3.0],
                [0.0, 1.5, 0.0, 2.5, 1.0, 0.0],
                [2.0, 0.5, 1.0, 0.0, 0.0, 1.0],
                [0.3, 0.2, 0.0, 1.1, 2.2, 0.4]
            ],
            3,
        ),
        (
            array![
                [3.0, 1.0, 0.0],
                [0.0, 2.0, 1.0],
                [1.0, 0.0, 4.0],
                [2.0, 2.0, 2.5],
                [0.5, 0.0, 0.0],
                [0.0, 3.0, 0.2]
            ],
            3,
        ),
        (
            array![
                [0.0, 0.0, 1.0, 0.2, 0.0],
                [0.7, 0.0, 0.0, 0.0, 0.3],
                [0.0, 0.9, 0.1, 0.0, 0.0],
                [0.2, 0.1, 0.0, 0.8, 0.0],
                [0.0, 0.0, 0.0, 0.0, 0.0],
                [0.6, 0.4, 0.3, 0.0, 1.2],
                [0.1, 0.0, 0.9, 0.5, 0.0]
            ],
            4,
        ),
        (array![[2.0, 0.5, 0.1], [0.3, 1.7, 0.2], [0.4, 0.6, 1.1]], 2),
    ]
}
