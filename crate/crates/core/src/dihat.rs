//! Distributed hard thresholding pursuit (DiHaT) for batch measurements.
//!
//! Each iteration, per node:
//! 1. mix the measurement vectors and sensing matrices with `W1`,
//! 2. select the support as the `s` largest entries of the proxy
//!    `h + μ Āᵀ(ȳ − Ā h)`,
//! 3. solve least squares restricted to that support,
//! 4. mix the estimates with `W2`,
//! 5. prune the fused estimate back to `s` entries.
//!
//! The estimate-only variant skips the measurement mixing and the
//! non-cooperative variant skips both mixing steps.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hard_threshold, restricted_least_squares, supp_s, DenseMatrix, DenseVector, SupportSet};
use crate::network::{synchronous_combine, CombinationMatrix};
use crate::scalar::Scalar;
use crate::scenario::{GroundTruth, NodeBatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DihatVariant {
    /// Measurement and estimate exchange.
    Full,
    /// Only estimates are exchanged.
    EstimateOnly,
    /// No exchange at all.
    NonCooperative,
}

impl DihatVariant {
    pub fn name(self) -> &'static str {
        match self {
            DihatVariant::Full => "full",
            DihatVariant::EstimateOnly => "estimate_only",
            DihatVariant::NonCooperative => "non_cooperative",
        }
    }

    fn mixes_measurements(self) -> bool {
        self == DihatVariant::Full
    }

    fn mixes_estimates(self) -> bool {
        self != DihatVariant::NonCooperative
    }
}

impl std::str::FromStr for DihatVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "estimate_only" | "estimate-only" => Ok(Self::EstimateOnly),
            "non_cooperative" | "non-cooperative" | "noncoop" => Ok(Self::NonCooperative),
            other => Err(Error::Config(format!("unknown DiHaT variant {other:?}"))),
        }
    }
}

/// Step `μ` of the gradient proxy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyStep {
    /// `μ = 1`, for sensing matrices with unit-norm columns.
    Unit,
    /// `μ = m / ‖Ā‖_F²`, the inverse mean squared column norm of the current `Ā`.
    ColumnNormalized,
}

impl std::str::FromStr for ProxyStep {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(Self::Unit),
            "column_normalized" => Ok(Self::ColumnNormalized),
            other => Err(Error::Config(format!("unknown proxy step {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DihatConfig {
    pub s: usize,
    pub proxy_step: ProxyStep,
    pub max_iters: usize,
    /// Halt once the relative network-wide estimate change drops below this.
    pub rel_change_tol: f64,
    pub variant: DihatVariant,
}

impl DihatConfig {
    pub const DEFAULT_MAX_ITERS: usize = 300;
    pub const DEFAULT_REL_CHANGE_TOL: f64 = 1e-8;

    pub fn new(s: usize) -> Self {
        Self {
            s,
            proxy_step: ProxyStep::Unit,
            max_iters: Self::DEFAULT_MAX_ITERS,
            rel_change_tol: Self::DEFAULT_REL_CHANGE_TOL,
            variant: DihatVariant::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s < 1 {
            return Err(Error::Config("DiHaT sparsity s must be ≥ 1".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be ≥ 1".into()));
        }
        if self.rel_change_tol.is_nan() || self.rel_change_tol < 0.0 {
            return Err(Error::Config("rel_change_tol must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// Per-node DiHaT state.
#[derive(Debug, Clone, PartialEq)]
pub struct DihatNodeState<T> {
    pub h: DenseVector<T>,
    pub y_bar: DenseVector<T>,
    pub a_bar: DenseMatrix<T>,
    pub support: SupportSet,
}

impl<T: Scalar> DihatNodeState<T> {
    /// `h = 0`, averaged data initialized to the local data.
    pub fn init(batch: &NodeBatch<T>) -> Self {
        Self {
            h: DenseVector::zeros(batch.a.cols()),
            y_bar: batch.y.clone(),
            a_bar: batch.a.clone(),
            support: SupportSet::empty(),
        }
    }
}

/// Gradient-step proxy `h + μ Āᵀ(ȳ − Ā h)`.
pub fn dihat_proxy<T: Scalar>(state: &DihatNodeState<T>, step: ProxyStep) -> Result<DenseVector<T>> {
    let residual = state.y_bar.sub(&state.a_bar.matvec(&state.h)?)?;
    let mut proxy = state.a_bar.transpose_matvec(&residual)?;
    let mu = match step {
        ProxyStep::Unit => T::one(),
        ProxyStep::ColumnNormalized => {
            let energy: T = state.a_bar.as_slice().iter().map(|&x| x * x).sum();
            if energy > T::zero() {
                T::lit(state.a_bar.cols() as f64) / energy
            } else {
                T::one()
            }
        }
    };
    proxy.scale(mu);
    proxy.axpy(T::one(), &state.h);
    Ok(proxy)
}

/// Intermediate quantities of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationInfo<T> {
    /// Restricted least-squares estimates before estimate mixing.
    pub local: Vec<DenseVector<T>>,
    /// Fused estimates before pruning.
    pub fused: Vec<DenseVector<T>>,
}

/// Advances every node by one DiHaT iteration.
pub fn dihat_iteration<T: Scalar>(
    states: &mut [DihatNodeState<T>],
    w1: &CombinationMatrix<T>,
    w2: &CombinationMatrix<T>,
    cfg: &DihatConfig,
) -> Result<IterationInfo<T>> {
    if cfg.variant.mixes_measurements() {
        let ys: Vec<_> = states.iter().map(|st| st.y_bar.clone()).collect();
        let mixed_y = synchronous_combine(&ys, w1)?;
        let as_: Vec<_> = states.iter().map(|st| st.a_bar.clone()).collect();
        let mixed_a = synchronous_combine(&as_, w1)?;
        for ((st, y), a) in states.iter_mut().zip(mixed_y).zip(mixed_a) {
            st.y_bar = y;
            st.a_bar = a;
        }
    }

    let mut local = Vec::with_capacity(states.len());
    for st in states.iter_mut() {
        let proxy = dihat_proxy(st, cfg.proxy_step)?;
        st.support = supp_s(&proxy, cfg.s)?;
        local.push(restricted_least_squares(&st.a_bar, &st.y_bar, &st.support)?);
    }

    let fused = if cfg.variant.mixes_estimates() {
        synchronous_combine(&local, w2)?
    } else {
        local.clone()
    };

    for (st, f) in states.iter_mut().zip(&fused) {
        let (_, pruned) = hard_threshold(f, cfg.s)?;
        if !pruned.is_finite() {
            return Err(Error::NonFinite("DiHaT estimate"));
        }
        st.h = pruned;
    }
    Ok(IterationInfo { local, fused })
}

/// Network-average normalized squared deviation `(1/N) Σ ‖h_k − h*‖² / ‖h*‖²`.
pub fn normalized_msd<T: Scalar>(estimates: impl IntoIterator<Item = impl AsRef<DenseVector<T>>>, truth: &DenseVector<T>) -> f64 {
    let denom = truth.norm_sq().as_f64();
    let (sum, n) = estimates
        .into_iter()
        .fold((0.0, 0usize), |(acc, n), h| (acc + h.as_ref().dist_sq(truth).as_f64(), n + 1));
    let avg = sum / n.max(1) as f64;
    if denom > 0.0 {
        avg / denom
    } else {
        avg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DihatRecord {
    pub iter: usize,
    pub msd: f64,
    /// Per node: did the selected support equal `supp(h*)`?
    pub support_recovered: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DihatRun<T> {
    pub estimates: Vec<DenseVector<T>>,
    pub trace: Vec<DihatRecord>,
    /// True when the relative-change criterion stopped the loop.
    pub converged: bool,
}

impl<T> DihatRun<T> {
    pub fn msd(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.msd).collect()
    }
}

/// Runs DiHaT to `max_iters` or until the relative change falls below tolerance.
pub fn run_dihat<T: Scalar>(
    data: &[NodeBatch<T>],
    truth: &GroundTruth<T>,
    w1: &CombinationMatrix<T>,
    w2: &CombinationMatrix<T>,
    cfg: &DihatConfig,
) -> Result<DihatRun<T>> {
    run_dihat_observed(data, truth, w1, w2, cfg, |_, _, _| {})
}

/// [`run_dihat`] with a callback invoked after every iteration.
pub fn run_dihat_observed<T: Scalar, F>(
    data: &[NodeBatch<T>],
    truth: &GroundTruth<T>,
    w1: &CombinationMatrix<T>,
    w2: &CombinationMatrix<T>,
    cfg: &DihatConfig,
    mut observe: F,
) -> Result<DihatRun<T>>
where
    F: FnMut(usize, &[DihatNodeState<T>], &IterationInfo<T>),
{
    cfg.validate()?;
    if data.len() != w1.n_nodes() || data.len() != w2.n_nodes() {
        return Err(Error::Config(format!(
            "{} data sets for a {}-node network",
            data.len(),
            w1.n_nodes()
        )));
    }
    let m = truth.m();
    if data.iter().any(|b| b.a.cols() != m || b.a.rows() != data[0].a.rows() || b.y.len() != b.a.rows()) {
        return Err(Error::Config("nodes disagree on l or m".into()));
    }
    if cfg.s > m {
        return Err(Error::Sparsity { s: cfg.s, m });
    }

    let mut states: Vec<_> = data.iter().map(DihatNodeState::init).collect();
    let mut trace = Vec::with_capacity(cfg.max_iters + 1);
    trace.push(DihatRecord {
        iter: 0,
        msd: normalized_msd(states.iter().map(|s| &s.h), &truth.h_star),
        support_recovered: vec![false; states.len()],
    });
    let mut converged = false;
    for iter in 1..=cfg.max_iters {
        let previous: Vec<_> = states.iter().map(|s| s.h.clone()).collect();
        let info = dihat_iteration(&mut states, w1, w2, cfg)?;
        observe(iter, &states, &info);
        trace.push(DihatRecord {
            iter,
            msd: normalized_msd(states.iter().map(|s| &s.h), &truth.h_star),
            support_recovered: states.iter().map(|s| s.support == truth.support).collect(),
        });
        let diff: f64 = states.iter().zip(&previous).map(|(s, p)| s.h.dist_sq(p).as_f64()).sum::<f64>().sqrt();
        let base: f64 = previous.iter().map(|p| p.norm_sq().as_f64()).sum::<f64>().sqrt();
        let rel = if base > 0.0 {
            diff / base
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if rel < cfg.rel_change_tol {
            converged = true;
            break;
        }
    }
    Ok(DihatRun {
        estimates: states.into_iter().map(|s| s.h).collect(),
        trace,
        converged,
    })
}

/// CSV rows `iter,msd,node_0,…` with 1/0 support-recovery flags.
pub fn write_trace_csv<W: Write>(trace: &[DihatRecord], mut out: W) -> io::Result<()> {
    let n = trace.first().map_or(0, |r| r.support_recovered.len());
    write!(out, "iter,msd")?;
    for k in 0..n {
        write!(out, ",node_{k}")?;
    }
    writeln!(out)?;
    for r in trace {
        write!(out, "{},{:e}", r.iter, r.msd)?;
        for &f in &r.support_recovered {
            write!(out, ",{}", u8::from(f))?;
        }
        writeln!(out)?;
    }
    Ok(())
}
