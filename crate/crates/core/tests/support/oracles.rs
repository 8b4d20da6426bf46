//! Reference implementations used as test oracles.
#![allow(dead_code)]

use dgreedy_core::linalg::DenseMatrix;

pub type Cols = Vec<Vec<f64>>;

/// Moore-Penrose pseudo-inverse by Greville's column recursion. Input and
/// output are column lists: `cols` is l×n, the result is n×l stored as n rows.
pub fn greville_pinv(cols: &Cols, l: usize) -> Vec<Vec<f64>> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut pinv: Vec<Vec<f64>> = Vec::new();
    for (k, a) in cols.iter().enumerate() {
        let a_norm = dot(a, a).sqrt();
        if k == 0 {
            let row = if a_norm > 0.0 { a.iter().map(|x| x / (a_norm * a_norm)).collect() } else { vec![0.0; l] };
            pinv.push(row);
            continue;
        }
        let d: Vec<f64> = pinv.iter().map(|row| dot(row, a)).collect();
        let mut c = a.clone();
        for (j, dj) in d.iter().enumerate() {
            for i in 0..l {
                c[i] -= cols[j][i] * dj;
            }
        }
        let c_norm = dot(&c, &c).sqrt();
        let b: Vec<f64> = if c_norm > 1e-10 * a_norm.max(1e-300) {
            c.iter().map(|x| x / (c_norm * c_norm)).collect()
        } else {
            let scale = 1.0 / (1.0 + dot(&d, &d));
            (0..l).map(|i| scale * d.iter().zip(&pinv).map(|(dj, row)| dj * row[i]).sum::<f64>()).collect()
        };
        for (row, dj) in pinv.iter_mut().zip(&d) {
            for i in 0..l {
                row[i] -= dj * b[i];
            }
        }
        pinv.push(b);
    }
    pinv
}

pub fn centered(w: &DenseMatrix<f64>) -> DenseMatrix<f64> {
    let n = w.rows();
    let mut c = w.clone();
    for v in c.as_mut_slice() {
        *v -= 1.0 / n as f64;
    }
    c
}

/// Number of eigenvalues of the symmetric `m` above `t`: negative pivots of
/// `t I − m` by Sylvester's law of inertia.
fn eigenvalues_above(m: &DenseMatrix<f64>, t: f64) -> usize {
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { t } else { 0.0 } - m[(i, j)]).collect()).collect();
    let mut negative = 0;
    for k in 0..n {
        let mut pivot = a[k][k];
        if pivot == 0.0 {
            pivot = 1e-300;
        }
        if pivot < 0.0 {
            negative += 1;
        }
        let (head, tail) = a.split_at_mut(k + 1);
        let pivot_row = &head[k];
        for row in tail {
            let f = row[k] / pivot;
            for (x, &y) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                *x -= f * y;
            }
        }
    }
    negative
}

/// Spectral radius of the symmetric `W − 11ᵀ/N` by inertia bisection.
pub fn inertia_oracle(w: &DenseMatrix<f64>) -> f64 {
    let c = centered(w);
    let n = c.rows();
    let (mut lo, mut hi) = (-2.0, 2.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if eigenvalues_above(&c, mid) >= 1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let top = 0.5 * (lo + hi);
    let (mut lo, mut hi) = (-2.0, 2.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if eigenvalues_above(&c, mid) == n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let bottom = 0.5 * (lo + hi);
    top.abs().max(bottom.abs())
}
