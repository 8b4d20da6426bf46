//! Reproducible ground truth, sensing data and regressor streams.
//!
//! Every random quantity is drawn from a ChaCha20 stream whose seed is
//! derived from `(master_seed, run, node, role)` with a SplitMix64 mixing
//! chain, so generation is independent of the order in which nodes or runs
//! are produced.

use std::io::{self, Write};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DenseVector, SupportSet};
use crate::scalar::Scalar;

/// Identifier of the random-number pipeline, recorded in run metadata.
pub const RNG_ALGORITHM: &str = "chacha20-splitmix64-v1";

pub type ScenarioRng = ChaCha20Rng;

/// Stream roles mixed into derived seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Role {
    Run = 1,
    Truth = 2,
    Batch = 3,
    Stream = 4,
    Topology = 5,
    Switch = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `seed` one word at a time.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from_seed(seed: u64) -> ScenarioRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Generator for one `(seed, role, ids...)` stream.
pub fn derived_rng(seed: u64, role: Role, ids: &[u64]) -> ScenarioRng {
    let mut parts = vec![role as u64];
    parts.extend_from_slice(ids);
    rng_from_seed(derive_seed(seed, &parts))
}

fn gaussian<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    let z: f64 = StandardNormal.sample(rng);
    T::lit(z)
}

/// The sparse unknown vector and its support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth<T> {
    pub h_star: DenseVector<T>,
    pub support: SupportSet,
    pub s: usize,
}

impl<T: Scalar> GroundTruth<T> {
    /// Uniformly random support of size `s`, standard normal nonzeros.
    pub fn generate<R: Rng + ?Sized>(m: usize, s: usize, rng: &mut R) -> Result<Self> {
        if s < 1 || s > m {
            return Err(Error::Sparsity { s, m });
        }
        let mut idx = sample(rng, m, s).into_vec();
        idx.sort_unstable();
        let mut h = DenseVector::zeros(m);
        for &i in &idx {
            // a zero draw would break ‖h*‖₀ = s
            let mut z: T = gaussian(rng);
            while z.is_zero() {
                z = gaussian(rng);
            }
            h[i] = z;
        }
        Self::from_vector(h)
    }

    pub fn from_vector(h_star: DenseVector<T>) -> Result<Self> {
        if !h_star.is_finite() {
            return Err(Error::NonFinite("ground truth"));
        }
        let support = h_star.nonzero_support();
        Ok(Self {
            s: support.len(),
            support,
            h_star,
        })
    }

    pub fn m(&self) -> usize {
        self.h_star.len()
    }
}

/// One node's batch of measurements `y = A h* + η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeBatch<T> {
    pub a: DenseMatrix<T>,
    pub y: DenseVector<T>,
    /// The realized noise draw; `y` equals `A h* + noise` exactly.
    pub noise: DenseVector<T>,
    pub noise_var: T,
}

impl<T: Scalar> NodeBatch<T> {
    /// `10·log10(‖A h*‖² / ‖η‖²)`; infinite when noiseless.
    pub fn empirical_snr_db(&self, truth: &GroundTruth<T>) -> f64 {
        let signal = self.a.matvec(&truth.h_star).expect("shapes checked").norm_sq().as_f64();
        let noise = self.noise.norm_sq().as_f64();
        10.0 * (signal / noise).log10()
    }
}

/// Per-node batches with i.i.d. `N(0, 1)` sensing matrices.
///
/// The noise variance of node `k` is `P_k / 10^(snr_db/10)` where `P_k` is the
/// realized per-sample signal power `‖A_k h*‖²/l`. The Gaussian noise draw is
/// rescaled so its empirical power equals that variance exactly. An infinite
/// `snr_db` yields noiseless data.
pub fn gen_batch_data<T: Scalar>(
    truth: &GroundTruth<T>,
    n_nodes: usize,
    l: usize,
    snr_db: f64,
    seed: u64,
) -> Result<Vec<NodeBatch<T>>> {
    if l == 0 || n_nodes == 0 {
        return Err(Error::Config("batch data needs l ≥ 1 and N ≥ 1".into()));
    }
    if snr_db.is_nan() {
        return Err(Error::Config("snr_db is NaN".into()));
    }
    let m = truth.m();
    (0..n_nodes)
        .map(|k| {
            let mut rng = derived_rng(seed, Role::Batch, &[k as u64]);
            let data: Vec<T> = (0..l * m).map(|_| gaussian(&mut rng)).collect();
            let a = DenseMatrix::from_row_major(l, m, data)?;
            let clean = a.matvec(&truth.h_star)?;
            let (noise, noise_var) = if snr_db == f64::INFINITY {
                (DenseVector::zeros(l), T::zero())
            } else {
                let power = clean.norm_sq() / T::lit(l as f64);
                let var = power / T::lit(10f64.powf(snr_db / 10.0));
                let mut z = DenseVector::from_vec((0..l).map(|_| gaussian::<T, _>(&mut rng)).collect());
                let realized = z.norm_sq() / T::lit(l as f64);
                if realized > T::zero() {
                    z.scale((var / realized).sqrt());
                }
                (z, var)
            };
            let mut y = clean;
            y.axpy(T::one(), &noise);
            Ok(NodeBatch {
                a,
                y,
                noise,
                noise_var,
            })
        })
        .collect()
}

/// Writes batches as CSV rows `node,row,y,a_0,…,a_{m-1}`.
pub fn write_batch_csv<T: Scalar, W: Write>(data: &[NodeBatch<T>], mut out: W) -> io::Result<()> {
    let m = data.first().map_or(0, |b| b.a.cols());
    write!(out, "node,row,y")?;
    for j in 0..m {
        write!(out, ",a_{j}")?;
    }
    writeln!(out)?;
    for (k, b) in data.iter().enumerate() {
        for i in 0..b.a.rows() {
            write!(out, "{k},{i},{:e}", b.y[i].as_f64())?;
            for &x in b.a.row(i) {
                write!(out, ",{:e}", x.as_f64())?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Ground truth that switches at given times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule<T> {
    /// `(first time index, truth)` pairs with strictly increasing times.
    events: Vec<(usize, GroundTruth<T>)>,
}

impl<T: Scalar> Schedule<T> {
    pub fn constant(truth: GroundTruth<T>) -> Self {
        Self {
            events: vec![(1, truth)],
        }
    }

    /// Adds a truth that is active for `n ≥ start`.
    pub fn then_from(mut self, start: usize, truth: GroundTruth<T>) -> Result<Self> {
        let last = self.events.last().map_or(0, |e| e.0);
        if start <= last {
            return Err(Error::Config(format!(
                "schedule times must increase: {start} after {last}"
            )));
        }
        if truth.m() != self.events[0].1.m() {
            return Err(Error::Config("schedule truths differ in dimension".into()));
        }
        self.events.push((start, truth));
        Ok(self)
    }

    /// Truth generating sample `n` (1-based).
    pub fn active(&self, n: usize) -> &GroundTruth<T> {
        let pos = self.events.partition_point(|(t, _)| *t <= n);
        &self.events[pos.saturating_sub(1)].1
    }

    pub fn events(&self) -> &[(usize, GroundTruth<T>)] {
        &self.events
    }

    pub fn m(&self) -> usize {
        self.events[0].1.m()
    }
}

/// How per-node observation noise variances are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Noiseless,
    /// Same variance at every node.
    Fixed { variance: f64 },
    /// `σ_k² = scale · η_k` with `η_k ~ U[lo, hi]`, drawn once per node.
    ScaledUniform { scale: f64, lo: f64, hi: f64 },
}

impl NoiseModel {
    /// `σ_k² = 0.01 η_k`, `η_k ∈ [0.5, 1]`.
    pub const HETEROGENEOUS: NoiseModel = NoiseModel::ScaledUniform {
        scale: 0.01,
        lo: 0.5,
        hi: 1.0,
    };

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::Noiseless => 0.0,
            NoiseModel::Fixed { variance } => variance,
            NoiseModel::ScaledUniform { scale, lo, hi } => scale * rng.random_range(lo..=hi),
        }
    }
}

/// One online observation `y = aᵀ h* + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSample<T> {
    pub y: T,
    pub a: DenseVector<T>,
}

/// Lazily generated white Gaussian regressor stream for one node.
#[derive(Debug, Clone)]
pub struct NodeStream<T> {
    rng: ScenarioRng,
    noise_std: T,
    noise_var: T,
    m: usize,
}

impl<T: Scalar> NodeStream<T> {
    pub fn noise_var(&self) -> T {
        self.noise_var
    }

    pub fn next_sample(&mut self, h_star: &DenseVector<T>) -> StreamSample<T> {
        let a = DenseVector::from_vec((0..self.m).map(|_| gaussian(&mut self.rng)).collect());
        let mut y = a.dot(h_star).expect("regressor length equals m");
        if !self.noise_std.is_zero() {
            y = y + self.noise_std * gaussian::<T, _>(&mut self.rng);
        }
        StreamSample { y, a }
    }
}

/// The network's streams plus the truth schedule driving them.
#[derive(Debug, Clone)]
pub struct OnlineStreams<T> {
    schedule: Schedule<T>,
    nodes: Vec<NodeStream<T>>,
    n: usize,
}

impl<T: Scalar> OnlineStreams<T> {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn m(&self) -> usize {
        self.schedule.m()
    }

    pub fn schedule(&self) -> &Schedule<T> {
        &self.schedule
    }

    pub fn noise_vars(&self) -> Vec<T> {
        self.nodes.iter().map(|s| s.noise_var).collect()
    }

    /// Time index of the last produced round (0 before the first).
    pub fn time(&self) -> usize {
        self.n
    }

    /// Draws the samples of time `n + 1` for every node.
    pub fn next_round(&mut self) -> Vec<StreamSample<T>> {
        self.n += 1;
        let h = &self.schedule.active(self.n).h_star;
        self.nodes.iter_mut().map(|s| s.next_sample(h)).collect()
    }

    /// Truth generating the samples of the latest round.
    pub fn current_truth(&self) -> &GroundTruth<T> {
        self.schedule.active(self.n.max(1))
    }
}

pub fn gen_online_streams<T: Scalar>(
    schedule: Schedule<T>,
    n_nodes: usize,
    noise: NoiseModel,
    seed: u64,
) -> Result<OnlineStreams<T>> {
    if n_nodes == 0 {
        return Err(Error::Config("streams need N ≥ 1".into()));
    }
    let m = schedule.m();
    let nodes = (0..n_nodes)
        .map(|k| {
            let mut rng = derived_rng(seed, Role::Stream, &[k as u64]);
            let var = noise.draw(&mut rng);
            if var < 0.0 || !var.is_finite() {
                return Err(Error::Config(format!("noise variance {var} invalid")));
            }
            Ok(NodeStream {
                rng,
                noise_std: T::lit(var.sqrt()),
                noise_var: T::lit(var),
                m,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OnlineStreams {
        schedule,
        nodes,
        n: 0,
    })
}
