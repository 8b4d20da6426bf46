//! Dense kernels shared by the batch and online estimators.

use std::cmp::Ordering;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::scalar::Scalar;

/// Maximum number of supports [`rip_constant_bruteforce`] will enumerate.
pub const RIP_ENUMERATION_LIMIT: u128 = 1_000_000;

/// Relative singular-value cutoff used by the minimum-norm solver.
pub const RANK_TOLERANCE: f64 = 1e-10;

const MAX_JACOBI_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector<T>(Vec<T>);

impl<T: Scalar> DenseVector<T> {
    pub fn zeros(len: usize) -> Self {
        Self(vec![T::zero(); len])
    }

    pub fn from_vec(values: Vec<T>) -> Self {
        Self(values)
    }

    /// Unit basis vector scaled by `value`.
    pub fn basis(len: usize, index: usize, value: T) -> Self {
        let mut v = Self::zeros(len);
        v.0[index] = value;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        if self.len() != other.len() {
            return Err(dim_err("dot", self.len(), other.len()));
        }
        Ok(dot(&self.0, &other.0))
    }

    pub fn norm_sq(&self) -> T {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// Squared distance `‖self − other‖²`.
    pub fn dist_sq(&self, other: &Self) -> T {
        debug_assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum()
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        axpy(alpha, &other.0, &mut self.0);
    }

    pub fn scale(&mut self, alpha: T) {
        self.0.iter_mut().for_each(|x| *x = *x * alpha);
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self(self.0.iter().map(|&x| x * alpha).collect())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(dim_err("sub", self.len(), other.len()));
        }
        Ok(Self(
            self.0.iter().zip(&other.0).map(|(&a, &b)| a - b).collect(),
        ))
    }

    pub fn nnz(&self) -> usize {
        self.0.iter().filter(|x| !x.is_zero()).count()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Exact nonzero index set.
    pub fn nonzero_support(&self) -> SupportSet {
        SupportSet(
            self.0
                .iter()
                .enumerate()
                .filter(|(_, x)| !x.is_zero())
                .map(|(i, _)| i)
                .collect(),
        )
    }

    /// Copy of `self` with every entry outside `support` set to zero.
    pub fn restricted_to(&self, support: &SupportSet) -> Self {
        let mut out = Self::zeros(self.len());
        for &i in support.iter() {
            out.0[i] = self.0[i];
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self(self.0.iter().map(|&x| f(x)).collect())
    }
}

impl<T> Index<usize> for DenseVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for DenseVector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T> AsRef<DenseVector<T>> for DenseVector<T> {
    fn as_ref(&self) -> &DenseVector<T> {
        self
    }
}

impl<T> From<Vec<T>> for DenseVector<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dim_err("from_row_major", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(dim_err("from_rows", cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Diagonal matrix with the given entries.
    pub fn diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> DenseVector<T> {
        DenseVector((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &DenseVector<T>) -> Result<DenseVector<T>> {
        if x.len() != self.cols {
            return Err(dim_err("matvec", self.cols, x.len()));
        }
        Ok(DenseVector(
            (0..self.rows).map(|i| dot(self.row(i), x.as_slice())).collect(),
        ))
    }

    /// `selfᵀ · x`
    pub fn transpose_matvec(&self, x: &DenseVector<T>) -> Result<DenseVector<T>> {
        if x.len() != self.rows {
            return Err(dim_err("transpose_matvec", self.rows, x.len()));
        }
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if !xi.is_zero() {
                axpy(xi, self.row(i), &mut out);
            }
        }
        Ok(DenseVector(out))
    }

    pub fn matmat(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(dim_err(
                "matmat",
                format!("{} rows", self.cols),
                format!("{} rows", other.rows),
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if !a.is_zero() {
                    let (src, dst) = (other.row(k), &mut out.data[i * other.cols..(i + 1) * other.cols]);
                    axpy(a, src, dst);
                }
            }
        }
        Ok(out)
    }

    /// Gram matrix `selfᵀ · self`.
    pub fn gram(&self) -> Self {
        let mut g = Self::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..self.cols {
                let a = row[i];
                if a.is_zero() {
                    continue;
                }
                axpy(a, row, g.row_mut(i));
            }
        }
        g
    }

    /// Sub-matrix made of the columns listed in `support`, in order.
    pub fn select_columns(&self, support: &SupportSet) -> Self {
        let k = support.len();
        let mut out = Self::zeros(self.rows, k);
        for i in 0..self.rows {
            for (c, &j) in support.iter().enumerate() {
                out.data[i * k + c] = self[(i, j)];
            }
        }
        out
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        axpy(alpha, &other.data, &mut self.data);
    }

    pub fn scale(&mut self, alpha: T) {
        self.data.iter_mut().for_each(|x| *x = *x * alpha);
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Ascending set of distinct coordinate indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Sorts and deduplicates `indices`; every index must be below `m`.
    pub fn new(mut indices: Vec<usize>, m: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&i| i >= m) {
            return Err(dim_err("support index", format!("< {m}"), bad));
        }
        Ok(Self(indices))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn intersection_len(&self, other: &Self) -> usize {
        self.0.iter().filter(|&&i| other.contains(i)).count()
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut v: Vec<usize> = self.0.iter().chain(other.0.iter()).copied().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }
}

impl<'a> IntoIterator for &'a SupportSet {
    type Item = &'a usize;
    type IntoIter = std::slice::Iter<'a, usize>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// Indices of the `s` largest-magnitude entries of `v`, ascending.
///
/// Ties are resolved towards the lower index, so a vector with fewer than `s`
/// nonzeros is padded with the lowest-index zeros.
pub fn supp_s<T: Scalar>(v: &DenseVector<T>, s: usize) -> Result<SupportSet> {
    let m = v.len();
    if s < 1 || s > m {
        return Err(Error::Sparsity { s, m });
    }
    let values = v.as_slice();
    let by_magnitude = |&a: &usize, &b: &usize| {
        values[b]
            .abs()
            .partial_cmp(&values[a].abs())
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    };
    let mut idx: Vec<usize> = (0..m).collect();
    if s < m {
        idx.select_nth_unstable_by(s - 1, by_magnitude);
        idx.truncate(s);
    }
    idx.sort_unstable();
    Ok(SupportSet(idx))
}

/// Keeps the `s` largest-magnitude entries of `v` and zeroes the rest.
pub fn hard_threshold<T: Scalar>(
    v: &DenseVector<T>,
    s: usize,
) -> Result<(SupportSet, DenseVector<T>)> {
    let support = supp_s(v, s)?;
    let pruned = v.restricted_to(&support);
    Ok((support, pruned))
}

/// Least-squares fit of `y ≈ A h` over vectors supported on `support`.
///
/// Rank-deficient column selections get the minimum-norm minimizer.
pub fn restricted_least_squares<T: Scalar>(
    a: &DenseMatrix<T>,
    y: &DenseVector<T>,
    support: &SupportSet,
) -> Result<DenseVector<T>> {
    if y.len() != a.rows() {
        return Err(dim_err("restricted_least_squares", a.rows(), y.len()));
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= a.cols()) {
        return Err(dim_err(
            "restricted_least_squares support",
            format!("< {}", a.cols()),
            bad,
        ));
    }
    let sub = a.select_columns(support);
    let coef = min_norm_solve(&sub, y);
    let mut h = DenseVector::zeros(a.cols());
    for (c, &j) in support.iter().enumerate() {
        h[j] = coef[c];
    }
    Ok(h)
}

/// Minimum-norm least-squares solution of `b x ≈ y` via one-sided Jacobi SVD.
pub(crate) fn min_norm_solve<T: Scalar>(b: &DenseMatrix<T>, y: &DenseVector<T>) -> Vec<T> {
    let (rows, k) = b.shape();
    if k == 0 {
        return Vec::new();
    }
    // column-major working copy; each column is rotated towards mutual orthogonality
    let mut cols: Vec<Vec<T>> = (0..k).map(|j| b.column(j).into_vec()).collect();
    let mut v: Vec<Vec<T>> = (0..k)
        .map(|j| {
            let mut e = vec![T::zero(); k];
            e[j] = T::one();
            e
        })
        .collect();
    let eps = T::epsilon() * T::lit(rows.max(k) as f64);
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if alpha.is_zero() || beta.is_zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<T> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let sigma_max = sigma.iter().fold(T::zero(), |m, &x| m.max(x));
    let cutoff = sigma_max * T::lit(RANK_TOLERANCE);
    let mut x = vec![T::zero(); k];
    if sigma_max.is_zero() {
        return x;
    }
    for j in 0..k {
        if sigma[j] <= cutoff {
            continue;
        }
        // u_j = cols[j] / σ_j, coefficient (u_jᵀ y) / σ_j
        let coef = dot(&cols[j], y.as_slice()) / (sigma[j] * sigma[j]);
        axpy(coef, &v[j], &mut x);
    }
    x
}

fn rotate_pair<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
pub fn symmetric_eigenvalues<T: Scalar>(m: &DenseMatrix<T>) -> Result<Vec<T>> {
    let n = m.rows();
    if m.cols() != n {
        return Err(dim_err("symmetric_eigenvalues", "square", format!("{:?}", m.shape())));
    }
    let mut a = m.clone();
    let total: T = a.as_slice().iter().map(|&x| x * x).sum();
    let tiny = T::epsilon() * T::epsilon() * total;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off <= tiny {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.is_zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    Ok(eig)
}

/// Largest singular value.
pub fn spectral_norm<T: Scalar>(m: &DenseMatrix<T>) -> Result<T> {
    let eig = symmetric_eigenvalues(&m.gram())?;
    Ok(eig.last().copied().unwrap_or_else(T::zero).max(T::zero()).sqrt())
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Lexicographic enumeration of all `k`-subsets of `0..n`.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().expect("checked above");
        let k = cur.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if cur[i] < self.n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Restricted isometry constant of the given order, by exhaustive enumeration.
///
/// For every support `T` with `|T| = order` the deviation of the eigenvalues of
/// `A_Tᵀ A_T` from one is measured; the constant is the largest deviation.
pub fn rip_constant_bruteforce<T: Scalar>(a: &DenseMatrix<T>, order: usize) -> Result<T> {
    let m = a.cols();
    if order < 1 || order > m {
        return Err(Error::Sparsity { s: order, m });
    }
    let count = binomial(m, order);
    if count > RIP_ENUMERATION_LIMIT {
        return Err(Error::Budget {
            count,
            limit: RIP_ENUMERATION_LIMIT,
        });
    }
    let gram = a.gram();
    let mut delta = T::zero();
    let mut block = DenseMatrix::zeros(order, order);
    for subset in Combinations::new(m, order) {
        for (r, &i) in subset.iter().enumerate() {
            for (c, &j) in subset.iter().enumerate() {
                block[(r, c)] = gram[(i, j)];
            }
        }
        let eig = symmetric_eigenvalues(&block)?;
        let lo = T::one() - eig[0];
        let hi = eig[order - 1] - T::one();
        delta = delta.max(lo).max(hi);
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DenseVector<f64> {
        DenseVector::from_vec(x.to_vec())
    }

    fn mat(rows: &[&[f64]]) -> DenseMatrix<f64> {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn sorted_magnitude_oracle(x: &[f64], s: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        // stable sort keeps lower index first among equal magnitudes
        idx.sort_by(|&a, &b| x[b].abs().partial_cmp(&x[a].abs()).unwrap());
        let mut top = idx[..s].to_vec();
        top.sort();
        top
    }

    #[test]
    fn threshold_picks_largest_magnitudes() {
        let (s, h) = hard_threshold(&v(&[3.0, -5.0, 1.0, 0.0]), 2).unwrap();
        assert_eq!(s.as_slice(), &[0, 1]);
        assert_eq!(h, v(&[3.0, -5.0, 0.0, 0.0]));
    }

    #[test]
    fn threshold_of_zero_vector_takes_lowest_indices() {
        let (s, h) = hard_threshold(&v(&[0.0, 0.0, 0.0]), 2).unwrap();
        assert_eq!(s.as_slice(), &[0, 1]);
        assert_eq!(h, v(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn threshold_ties_match_sort_oracle() {
        let x = [1.0, -1.0, 2.0, -2.0, 3.0];
        assert_eq!(sorted_magnitude_oracle(&x, 3), vec![2, 3, 4]);
        let (s, h) = hard_threshold(&v(&x), 3).unwrap();
        assert_eq!(s.as_slice(), &[2, 3, 4]);
        assert_eq!(h, v(&[0.0, 0.0, 2.0, -2.0, 3.0]));
        // equal magnitudes resolve to the lower index
        let (s, _) = hard_threshold(&v(&[1.0, -1.0, 1.0]), 2).unwrap();
        assert_eq!(s.as_slice(), &[0, 1]);
    }

    #[test]
    fn threshold_rejects_bad_sparsity() {
        assert!(matches!(
            hard_threshold(&v(&[1.0, 2.0]), 3),
            Err(Error::Sparsity { s: 3, m: 2 })
        ));
        assert!(hard_threshold(&v(&[1.0, 2.0]), 0).is_err());
    }

    #[test]
    fn least_squares_identity_sensing() {
        let s = SupportSet::new(vec![1], 2).unwrap();
        let h = restricted_least_squares(&DenseMatrix::identity(2), &v(&[1.0, 2.0]), &s).unwrap();
        assert_eq!(h, v(&[0.0, 2.0]));
    }

    #[test]
    fn least_squares_diagonal_system() {
        let a = mat(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let s = SupportSet::new(vec![0, 1], 2).unwrap();
        let h = restricted_least_squares(&a, &v(&[3.0, 4.0]), &s).unwrap();
        assert!((h[0] - 3.0).abs() < 1e-14 && (h[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn least_squares_underdetermined_is_min_norm() {
        let a = mat(&[&[1.0, 1.0]]);
        let s = SupportSet::new(vec![0, 1], 2).unwrap();
        let h = restricted_least_squares(&a, &v(&[2.0]), &s).unwrap();
        assert!((h[0] - 1.0).abs() < 1e-14 && (h[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn least_squares_duplicate_columns_split_evenly() {
        // rank one: columns 0 and 2 identical
        let a = mat(&[&[1.0, 0.0, 1.0], &[2.0, 1.0, 2.0], &[0.0, 3.0, 0.0]]);
        let s = SupportSet::new(vec![0, 2], 3).unwrap();
        let h = restricted_least_squares(&a, &v(&[2.0, 4.0, 0.0]), &s).unwrap();
        assert!((h[0] - 1.0).abs() < 1e-12 && (h[2] - 1.0).abs() < 1e-12);
        assert_eq!(h[1], 0.0);
    }

    #[test]
    fn least_squares_dimension_errors() {
        let s = SupportSet::new(vec![0], 2).unwrap();
        assert!(restricted_least_squares(&DenseMatrix::identity(2), &v(&[1.0]), &s).is_err());
        let wide = SupportSet::new(vec![4], 5).unwrap();
        assert!(restricted_least_squares(&DenseMatrix::identity(2), &v(&[1.0, 1.0]), &wide).is_err());
    }

    #[test]
    fn rip_of_orthonormal_columns_is_zero() {
        let a = DenseMatrix::<f64>::identity(4);
        assert!(rip_constant_bruteforce(&a, 1).unwrap().abs() < 1e-15);
        assert!(rip_constant_bruteforce(&a, 3).unwrap().abs() < 1e-15);
    }

    #[test]
    fn rip_of_scaled_column() {
        let a = mat(&[&[1.0, 0.0], &[0.0, 2.0]]);
        assert!((rip_constant_bruteforce(&a, 1).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rip_budget_guard() {
        let a = DenseMatrix::<f64>::zeros(2, 60);
        assert!(matches!(
            rip_constant_bruteforce(&a, 10),
            Err(Error::Budget { .. })
        ));
        assert!(rip_constant_bruteforce(&a, 0).is_err());
    }

    #[test]
    fn products_by_hand() {
        let i2 = DenseMatrix::<f64>::identity(2);
        assert_eq!(i2.matvec(&v(&[5.0, 7.0])).unwrap(), v(&[5.0, 7.0]));
        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(a.matvec(&v(&[1.0, 1.0])).unwrap(), v(&[3.0, 7.0]));
        assert_eq!(a.transpose_matvec(&v(&[1.0, 1.0])).unwrap(), v(&[4.0, 6.0]));
        assert_eq!(a.matmat(&i2).unwrap(), a);
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.gram(), a.transpose().matmat(&a).unwrap());
        // residual of an exact fit vanishes
        let h = v(&[0.3, -1.2]);
        let r = h.sub(&i2.matvec(&h).unwrap()).unwrap();
        assert_eq!(i2.transpose_matvec(&r).unwrap(), v(&[0.0, 0.0]));
        assert!(a.matvec(&v(&[1.0])).is_err());
        assert!(a.matmat(&DenseMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        // eigenvalues 1 and 3
        let eig = symmetric_eigenvalues(&mat(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        assert!((eig[0] - 1.0).abs() < 1e-14 && (eig[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn combinations_count() {
        assert_eq!(Combinations::new(6, 3).count() as u128, binomial(6, 3));
        assert_eq!(Combinations::new(4, 0).count(), 1);
        assert_eq!(Combinations::new(3, 4).count(), 0);
        assert_eq!(
            Combinations::new(4, 2).collect::<Vec<_>>(),
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
    }

    #[test]
    fn generic_over_f32() {
        let a = DenseMatrix::<f32>::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let s = SupportSet::new(vec![0, 1], 2).unwrap();
        let h = restricted_least_squares(&a, &DenseVector::from_vec(vec![3.0f32, 4.0]), &s).unwrap();
        assert!((h[1] - 2.0).abs() < 1e-6);
    }
}
