//! Topologies, combination weights and the synchronous exchange engine.
//!
//! Weight matrices are stored column-wise: entry `(r, k)` is the weight node
//! `k` assigns to the value it receives from node `r`, so every column of a
//! valid combination matrix sums to one.

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{spectral_norm, symmetric_eigenvalues, DenseMatrix, DenseVector};
use crate::scalar::Scalar;

/// Tolerance for the stochasticity checks on combination matrices.
pub const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    n_nodes: usize,
    /// Sorted neighborhoods, each including the node itself.
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Undirected topology from an edge list; must be connected.
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let t = Self::from_edges_unchecked(n_nodes, edges)?;
        if !t.is_connected() {
            return Err(Error::Topology(format!(
                "graph on {n_nodes} nodes is not connected"
            )));
        }
        Ok(t)
    }

    /// Like [`Topology::from_edges`] but accepts disconnected graphs.
    pub fn from_edges_unchecked(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Topology("network needs at least one node".into()));
        }
        let mut neighbors: Vec<Vec<usize>> = (0..n_nodes).map(|k| vec![k]).collect();
        for &(u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::Topology(format!(
                    "edge ({u}, {v}) references a node outside 0..{n_nodes}"
                )));
            }
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
            nb.dedup();
        }
        Ok(Self { n_nodes, neighbors })
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        Self::from_edges(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn ring(n: usize) -> Result<Self> {
        let mut edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
        if n > 2 {
            edges.push((n - 1, 0));
        }
        Self::from_edges(n, &edges)
    }

    /// Node 0 linked to every other node.
    pub fn star(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|v| (0, v)).collect();
        Self::from_edges(n, &edges)
    }

    /// Random geometric graph on the unit square, redrawn until connected.
    pub fn random_geometric<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Result<Self> {
        const MAX_ATTEMPTS: usize = 1000;
        if radius.is_nan() || radius <= 0.0 {
            return Err(Error::Topology(format!("radius {radius} must be positive")));
        }
        for _ in 0..MAX_ATTEMPTS {
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    let (dx, dy) = (pts[u].0 - pts[v].0, pts[u].1 - pts[v].1);
                    if dx * dx + dy * dy <= radius * radius {
                        edges.push((u, v));
                    }
                }
            }
            let t = Self::from_edges_unchecked(n, &edges)?;
            if t.is_connected() {
                return Ok(t);
            }
        }
        Err(Error::Topology(format!(
            "no connected geometric graph with n={n}, radius={radius} after {MAX_ATTEMPTS} draws"
        )))
    }

    /// Parses one `u v` pair per line (0-indexed). Blank lines and `#`
    /// comments are skipped; the node count is the largest index plus one
    /// unless `n_nodes` is given.
    pub fn parse_edge_list(text: &str, n_nodes: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(u)), Some(Ok(v)), None) => edges.push((u, v)),
                _ => {
                    return Err(Error::Topology(format!(
                        "line {}: expected `u v`, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        let inferred = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(1);
        Self::from_edges_unchecked(n_nodes.unwrap_or(inferred), &edges)
    }

    pub fn load_edge_list(path: &Path, n_nodes: Option<usize>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Topology(format!("{}: {e}", path.display())))?;
        Self::parse_edge_list(&text, n_nodes)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (u, nb) in self.neighbors.iter().enumerate() {
            for &v in nb.iter().filter(|&&v| v > u) {
                out.push_str(&format!("{u} {v}\n"));
            }
        }
        out
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Neighborhood `N_k`, including `k`.
    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    /// `|N_k|`, counting the node itself.
    pub fn degree(&self, k: usize) -> usize {
        self.neighbors[k].len()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_nodes];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Same graph with node `k` renamed to `perm[k]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let edges: Vec<_> = self
            .neighbors
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| nb.iter().map(move |&v| (perm[u], perm[v])))
            .collect();
        Self::from_edges_unchecked(self.n_nodes, &edges)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    Metropolis,
    Uniform,
}

/// Column-stochastic `N×N` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix<T> {
    weights: DenseMatrix<T>,
    /// Nonzero `(r, weight)` pairs feeding each node `k`.
    inbound: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> CombinationMatrix<T> {
    /// Validates that `weights` is square, nonnegative and column-stochastic.
    pub fn new(weights: DenseMatrix<T>) -> Result<Self> {
        let n = weights.rows();
        if weights.cols() != n || n == 0 {
            return Err(dim_err("combination matrix", "square", format!("{:?}", weights.shape())));
        }
        if !weights.is_finite() {
            return Err(Error::NonFinite("combination matrix"));
        }
        for k in 0..n {
            let col: Vec<T> = (0..n).map(|r| weights[(r, k)]).collect();
            if col.iter().any(|&w| w < T::zero()) {
                return Err(Error::Config(format!("column {k} has a negative weight")));
            }
            let sum: T = col.iter().copied().sum();
            if (sum - T::one()).abs() > T::lit(STOCHASTIC_TOL) {
                return Err(Error::Config(format!("column {k} sums to {sum}, not 1")));
            }
        }
        Ok(Self::new_unchecked(weights))
    }

    fn new_unchecked(weights: DenseMatrix<T>) -> Self {
        let n = weights.rows();
        let inbound = (0..n)
            .map(|k| {
                (0..n)
                    .filter(|&r| !weights[(r, k)].is_zero())
                    .map(|r| (r, weights[(r, k)]))
                    .collect()
            })
            .collect();
        Self { weights, inbound }
    }

    pub fn from_rule(topology: &Topology, rule: WeightRule) -> Self {
        match rule {
            WeightRule::Metropolis => build_metropolis(topology),
            WeightRule::Uniform => build_uniform(topology),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::new_unchecked(DenseMatrix::identity(n))
    }

    /// `11ᵀ/N`: one-step averaging.
    pub fn averaging(n: usize) -> Self {
        let w = T::one() / T::lit(n as f64);
        Self::new_unchecked(
            DenseMatrix::from_row_major(n, n, vec![w; n * n]).expect("n*n entries"),
        )
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.rows()
    }

    pub fn weight(&self, r: usize, k: usize) -> T {
        self.weights[(r, k)]
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.weights
    }

    /// Nonzero `(r, weight)` pairs that node `k` combines.
    pub fn inbound(&self, k: usize) -> &[(usize, T)] {
        &self.inbound[k]
    }

    pub fn verify(&self) -> ConsensusReport {
        verify_consensus_conditions(&self.weights)
    }
}

/// Metropolis weights: `1/max(|N_k|, |N_r|)` between distinct neighbors, the
/// remainder on the diagonal.
pub fn build_metropolis<T: Scalar>(t: &Topology) -> CombinationMatrix<T> {
    let n = t.n_nodes();
    let mut w = DenseMatrix::zeros(n, n);
    for k in 0..n {
        let mut off = T::zero();
        for &r in t.neighbors(k).iter().filter(|&&r| r != k) {
            let a = T::one() / T::lit(t.degree(k).max(t.degree(r)) as f64);
            w[(r, k)] = a;
            off = off + a;
        }
        w[(k, k)] = T::one() - off;
    }
    CombinationMatrix::new_unchecked(w)
}

/// Uniform weights: `1/|N_k|` on every neighbor of `k`.
pub fn build_uniform<T: Scalar>(t: &Topology) -> CombinationMatrix<T> {
    let n = t.n_nodes();
    let mut w = DenseMatrix::zeros(n, n);
    for k in 0..n {
        let a = T::one() / T::lit(t.degree(k) as f64);
        for &r in t.neighbors(k) {
            w[(r, k)] = a;
        }
    }
    CombinationMatrix::new_unchecked(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusReport {
    /// `1ᵀW = 1ᵀ`
    pub columns_sum_to_one: bool,
    /// `W1 = 1`
    pub rows_sum_to_one: bool,
    /// Spectral radius of `W − 11ᵀ/N` (spectral norm when `W` is not symmetric).
    pub spectral_value: f64,
    pub spectral_below_one: bool,
}

impl ConsensusReport {
    pub fn all_hold(&self) -> bool {
        self.columns_sum_to_one && self.rows_sum_to_one && self.spectral_below_one
    }

    /// Names of the conditions that fail.
    pub fn violations(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if !self.columns_sum_to_one {
            v.push("column sums (1ᵀW = 1ᵀ)");
        }
        if !self.rows_sum_to_one {
            v.push("row sums (W1 = 1)");
        }
        if !self.spectral_below_one {
            v.push("mixing (λ(W − 11ᵀ/N) < 1)");
        }
        v
    }
}

/// Checks the three consensus conditions on a square weight matrix.
pub fn verify_consensus_conditions<T: Scalar>(w: &DenseMatrix<T>) -> ConsensusReport {
    let n = w.rows();
    let tol = T::lit(STOCHASTIC_TOL);
    let columns_sum_to_one = (0..n).all(|k| {
        let s: T = (0..n).map(|r| w[(r, k)]).sum();
        (s - T::one()).abs() <= tol
    });
    let rows_sum_to_one = (0..n).all(|r| {
        let s: T = w.row(r).iter().copied().sum();
        (s - T::one()).abs() <= tol
    });
    let mut centered = w.clone();
    let avg = T::one() / T::lit(n as f64);
    centered.as_mut_slice().iter_mut().for_each(|x| *x = *x - avg);
    let spectral = if centered.is_symmetric(T::lit(1e-12)) {
        symmetric_eigenvalues(&centered)
            .map(|e| e.iter().fold(T::zero(), |m, x| m.max(x.abs())))
            .unwrap_or_else(|_| T::infinity())
    } else {
        spectral_norm(&centered).unwrap_or_else(|_| T::infinity())
    };
    let spectral_value = spectral.as_f64();
    ConsensusReport {
        columns_sum_to_one,
        rows_sum_to_one,
        spectral_value,
        spectral_below_one: spectral_value < 1.0 - STOCHASTIC_TOL,
    }
}

/// Values that can be mixed by a combination matrix.
pub trait Combinable<T>: Clone {
    fn zeroed_like(&self) -> Self;
    fn add_scaled(&mut self, weight: T, other: &Self);
    fn shape(&self) -> (usize, usize);
}

impl<T: Scalar> Combinable<T> for DenseVector<T> {
    fn zeroed_like(&self) -> Self {
        DenseVector::zeros(self.len())
    }
    fn add_scaled(&mut self, weight: T, other: &Self) {
        self.axpy(weight, other);
    }
    fn shape(&self) -> (usize, usize) {
        (self.len(), 1)
    }
}

impl<T: Scalar> Combinable<T> for DenseMatrix<T> {
    fn zeroed_like(&self) -> Self {
        DenseMatrix::zeros(self.rows(), self.cols())
    }
    fn add_scaled(&mut self, weight: T, other: &Self) {
        self.axpy(weight, other);
    }
    fn shape(&self) -> (usize, usize) {
        DenseMatrix::shape(self)
    }
}

macro_rules! impl_combinable_scalar {
    ($t:ty) => {
        impl Combinable<$t> for $t {
            fn zeroed_like(&self) -> Self {
                0.0
            }
            fn add_scaled(&mut self, weight: $t, other: &Self) {
                *self += weight * other;
            }
            fn shape(&self) -> (usize, usize) {
                (1, 1)
            }
        }
    };
}
impl_combinable_scalar!(f32);
impl_combinable_scalar!(f64);

/// One synchronous round: node `k` receives `Σ_{r∈N_k} w_{r,k} · values[r]`.
///
/// Every output is computed from the input snapshot, so the result does not
/// depend on the order in which nodes are processed.
pub fn synchronous_combine<T: Scalar, M: Combinable<T>>(
    values: &[M],
    w: &CombinationMatrix<T>,
) -> Result<Vec<M>> {
    let n = w.n_nodes();
    if values.len() != n {
        return Err(dim_err("synchronous_combine", format!("{n} nodes"), values.len()));
    }
    let shape = values[0].shape();
    if let Some(bad) = values.iter().find(|v| v.shape() != shape) {
        return Err(dim_err(
            "synchronous_combine",
            format!("{shape:?}"),
            format!("{:?}", bad.shape()),
        ));
    }
    Ok((0..n)
        .map(|k| {
            let mut acc = values[k].zeroed_like();
            for &(r, weight) in w.inbound(k) {
                acc.add_scaled(weight, &values[r]);
            }
            acc
        })
        .collect())
}

/// Per-node outboxes for one synchronous round.
///
/// Nodes post their round output; [`RoundBuffer::close_round`] acts as the
/// barrier and hands back the complete snapshot, after which the next round
/// starts empty.
#[derive(Debug, Clone)]
pub struct RoundBuffer<M> {
    outbox: Vec<Option<M>>,
    round: usize,
}

impl<M: Clone> RoundBuffer<M> {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            outbox: vec![None; n_nodes],
            round: 0,
        }
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Posts node `k`'s message for the current round; a second post in the
    /// same round is rejected.
    pub fn post(&mut self, k: usize, msg: M) -> Result<()> {
        let slot = self
            .outbox
            .get_mut(k)
            .ok_or_else(|| dim_err("RoundBuffer::post", "node index", k))?;
        if slot.is_some() {
            return Err(Error::Config(format!(
                "node {k} posted twice in round {}",
                self.round
            )));
        }
        *slot = Some(msg);
        Ok(())
    }

    /// Barrier: returns every node's message once all have posted.
    pub fn close_round(&mut self) -> Result<Vec<M>> {
        if let Some(k) = self.outbox.iter().position(Option::is_none) {
            return Err(Error::Config(format!(
                "round {} closed before node {k} posted",
                self.round
            )));
        }
        self.round += 1;
        Ok(self.outbox.iter_mut().map(|m| m.take().expect("checked")).collect())
    }

    /// Closes the round and mixes the snapshot with `w`.
    pub fn exchange<T: Scalar>(&mut self, w: &CombinationMatrix<T>) -> Result<Vec<M>>
    where
        M: Combinable<T>,
    {
        let snapshot = self.close_round()?;
        synchronous_combine(&snapshot, w)
    }

    /// Node `k`'s inbox from a closed-round snapshot.
    pub fn inbox<'a>(snapshot: &'a [M], topology: &Topology, k: usize) -> Vec<(usize, &'a M)> {
        topology.neighbors(k).iter().map(|&r| (r, &snapshot[r])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn metropolis_on_path() {
        let t = Topology::path(3).unwrap();
        let w: CombinationMatrix<f64> = build_metropolis(&t);
        assert!(close(w.weight(1, 0), 1.0 / 3.0));
        assert!(close(w.weight(0, 0), 2.0 / 3.0));
        assert!(close(w.weight(1, 1), 1.0 / 3.0));
        assert_eq!(w.weight(2, 0), 0.0);
        assert!(w.matrix().is_symmetric(1e-15));
    }

    #[test]
    fn metropolis_degenerate_cases() {
        let w: CombinationMatrix<f64> = build_metropolis(&Topology::complete(2).unwrap());
        assert!(w.matrix().as_slice().iter().all(|&x| close(x, 0.5)));
        let w: CombinationMatrix<f64> = build_metropolis(&Topology::complete(1).unwrap());
        assert_eq!(w.matrix().as_slice(), &[1.0]);
    }

    #[test]
    fn uniform_rule() {
        let w: CombinationMatrix<f64> = build_uniform(&Topology::complete(2).unwrap());
        assert!(w.matrix().as_slice().iter().all(|&x| close(x, 0.5)));
        let w: CombinationMatrix<f64> = build_uniform(&Topology::path(3).unwrap());
        for r in 0..3 {
            assert!(close(w.weight(r, 1), 1.0 / 3.0));
        }
        let w: CombinationMatrix<f64> = build_uniform(&Topology::star(5).unwrap());
        for r in 0..5 {
            assert!(close(w.weight(r, 0), 0.2));
        }
        assert!(close(w.weight(0, 1), 0.5));
    }

    #[test]
    fn consensus_checks() {
        let t = Topology::ring(6).unwrap();
        let rep = build_metropolis::<f64>(&t).verify();
        assert!(rep.all_hold(), "{rep:?}");
        let rep = CombinationMatrix::<f64>::identity(2).verify();
        assert!(rep.columns_sum_to_one && rep.rows_sum_to_one);
        assert!(!rep.spectral_below_one);
        assert!(close(rep.spectral_value, 1.0));
        assert_eq!(rep.violations().len(), 1);
        let rep = CombinationMatrix::<f64>::averaging(5).verify();
        assert!(rep.spectral_value.abs() < 1e-12);
    }

    #[test]
    fn uniform_on_star_is_not_doubly_stochastic() {
        let rep = build_uniform::<f64>(&Topology::star(4).unwrap()).verify();
        assert!(rep.columns_sum_to_one);
        assert!(!rep.rows_sum_to_one);
    }

    #[test]
    fn combine_by_hand() {
        let w: CombinationMatrix<f64> = build_uniform(&Topology::complete(2).unwrap());
        let out = synchronous_combine(&[DenseVector::from_vec(vec![2.0]), DenseVector::from_vec(vec![4.0])], &w).unwrap();
        assert_eq!(out[0][0], 3.0);
        assert_eq!(out[1][0], 3.0);

        let vals = vec![1.5f64, -2.0, 7.0];
        assert_eq!(synchronous_combine(&vals, &CombinationMatrix::identity(3)).unwrap(), vals);

        let w: CombinationMatrix<f64> = build_metropolis(&Topology::path(3).unwrap());
        let out = synchronous_combine(&[3.0f64, 0.0, 3.0], &w).unwrap();
        assert!(close(out[1], 2.0));
    }

    #[test]
    fn combine_shape_errors() {
        let w = CombinationMatrix::<f64>::identity(2);
        assert!(synchronous_combine(&[1.0f64], &w).is_err());
        let bad = [DenseVector::<f64>::zeros(2), DenseVector::zeros(3)];
        assert!(synchronous_combine(&bad, &w).is_err());
    }

    #[test]
    fn new_rejects_non_stochastic() {
        let m = DenseMatrix::from_rows(&[vec![0.5, 0.5], vec![0.6, 0.5]]).unwrap();
        assert!(CombinationMatrix::new(m).is_err());
        let m = DenseMatrix::from_rows(&[vec![1.5, 0.5], vec![-0.5, 0.5]]).unwrap();
        assert!(CombinationMatrix::new(m).is_err());
        let ok = build_metropolis::<f64>(&Topology::ring(5).unwrap());
        assert!(CombinationMatrix::new(ok.matrix().clone()).is_ok());
    }

    #[test]
    fn topology_validation() {
        assert!(Topology::from_edges(3, &[(0, 1)]).is_err());
        assert!(Topology::from_edges(2, &[(0, 2)]).is_err());
        let t = Topology::from_edges_unchecked(3, &[(0, 1)]).unwrap();
        assert!(!t.is_connected());
        assert_eq!(t.neighbors(0), &[0, 1]);
        assert_eq!(t.degree(2), 1);
    }

    #[test]
    fn edge_list_round_trip() {
        let t = Topology::parse_edge_list("# ring\n0 1\n1 2\n\n2 3 # tail\n3 0\n", None).unwrap();
        assert_eq!(t, Topology::ring(4).unwrap());
        assert_eq!(Topology::parse_edge_list(&t.to_edge_list(), None).unwrap(), t);
        assert!(Topology::parse_edge_list("0 x\n", None).is_err());
        assert!(Topology::parse_edge_list("0 1 2\n", None).is_err());
    }

    #[test]
    fn geometric_graph_is_connected_and_seeded() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let t = Topology::random_geometric(20, 0.35, &mut rng).unwrap();
        assert!(t.is_connected());
        let mut rng2 = ChaCha20Rng::seed_from_u64(3);
        assert_eq!(Topology::random_geometric(20, 0.35, &mut rng2).unwrap(), t);
    }

    #[test]
    fn round_buffer_barrier() {
        let mut buf = RoundBuffer::<f64>::new(3);
        buf.post(0, 3.0).unwrap();
        buf.post(2, 3.0).unwrap();
        assert!(buf.post(2, 1.0).is_err());
        assert!(buf.close_round().is_err());
        buf.post(1, 0.0).unwrap();
        let w: CombinationMatrix<f64> = build_metropolis(&Topology::path(3).unwrap());
        let out = buf.exchange(&w).unwrap();
        assert!(close(out[1], 2.0));
        assert_eq!(buf.round(), 1);
        // next round starts empty
        assert!(buf.close_round().is_err());
        let snap = [1.0, 2.0, 3.0];
        let inbox = RoundBuffer::inbox(&snap, &Topology::path(3).unwrap(), 0);
        assert_eq!(inbox, vec![(0, &1.0), (1, &2.0)]);
    }
}
