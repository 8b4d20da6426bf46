//! Greedy diffusion LMS (GreeDi-LMS) for streaming measurements.
//!
//! At every time instant each node
//! 1. folds its new sample into the cross-correlation `p` and
//!    autocorrelation `R` accumulators,
//! 2. mixes them with its neighbors' (`p̄`, `R̄`),
//! 3. selects the support as the `s` largest entries of the proxy
//!    `x + μ̃ (p̄ − R̄ x)` where `x` is the previous estimate, rescaled to unit
//!    norm when its norm exceeds the threshold `D`,
//! 4. runs one LMS step restricted to that support,
//! 5. mixes the intermediate estimates (adapt-then-combine) and prunes the
//!    result back to `s` entries.
//!
//! The light proxy replaces `p̄ − R̄x` by a mixed, exponentially weighted
//! running sum of the innovations `a (y − aᵀ h)`, which costs `O(m)` per step.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, hard_threshold, supp_s, DenseMatrix, DenseVector, SupportSet};
use crate::network::{synchronous_combine, CombinationMatrix};
use crate::scalar::Scalar;
use crate::scenario::{OnlineStreams, StreamSample};

/// Below this averaged input power the adaptive proxy step falls back to 1.
pub const COLD_START_POWER: f64 = 1e-12;

/// Default proxy-normalization threshold `D`.
pub const DEFAULT_THRESHOLD_D: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyMode {
    /// Proxy from the mixed correlation accumulators.
    Full,
    /// Proxy from the recursively accumulated gradient.
    Light,
}

impl std::str::FromStr for ProxyMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "light" => Ok(Self::Light),
            other => Err(Error::Config(format!("unknown proxy mode {other:?}"))),
        }
    }
}

/// How the proxy step `μ̃` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Fixed { mu_tilde: f64 },
    /// `μ̃_k(n) = 1/ν̃_k(n)` with `ν̃_k(n)` the mixed mean diagonal of `R_l(n)`.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreediConfig {
    pub s: usize,
    /// Per-node LMS step sizes `μ_k`.
    pub mu: Vec<f64>,
    /// Forgetting factor `ζ ∈ (0, 1]`.
    pub zeta: f64,
    /// Proxy normalization threshold `D > 0`.
    pub threshold_d: f64,
    pub proxy_mode: ProxyMode,
    pub step_schedule: StepSchedule,
    /// Record the computable terms of the steady-state error bound.
    pub diagnostics: bool,
}

impl GreediConfig {
    /// Uniform step `mu` at all `n_nodes`, `ζ = 1`, adaptive proxy step.
    pub fn new(s: usize, mu: f64, n_nodes: usize) -> Self {
        Self {
            s,
            mu: vec![mu; n_nodes],
            zeta: 1.0,
            threshold_d: DEFAULT_THRESHOLD_D,
            proxy_mode: ProxyMode::Full,
            step_schedule: StepSchedule::Adaptive,
            diagnostics: false,
        }
    }

    /// Half the mean-square stability limit `2/((s+2)σ²)` of an `s`-tap LMS
    /// filter driven by white Gaussian input of variance `input_var`.
    pub fn default_mu(s: usize, input_var: f64) -> f64 {
        1.0 / ((s as f64 + 2.0) * input_var)
    }

    pub fn validate(&self, n_nodes: usize, m: usize) -> Result<()> {
        if self.s < 1 || self.s > m {
            return Err(Error::Sparsity { s: self.s, m });
        }
        if self.mu.len() != n_nodes {
            return Err(Error::Config(format!(
                "{} step sizes for {n_nodes} nodes",
                self.mu.len()
            )));
        }
        if self.mu.iter().any(|&mu| mu < 0.0 || !mu.is_finite()) {
            return Err(Error::Config("step sizes must be finite and ≥ 0".into()));
        }
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::Config(format!("forgetting factor {} not in (0, 1]", self.zeta)));
        }
        if self.threshold_d.is_nan() || self.threshold_d <= 0.0 {
            return Err(Error::Config("threshold D must be > 0".into()));
        }
        if let StepSchedule::Fixed { mu_tilde } = self.step_schedule {
            if mu_tilde <= 0.0 || !mu_tilde.is_finite() {
                return Err(Error::Config("fixed proxy step must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Per-node GreeDi-LMS state.
///
/// `r_bar` is filled by [`combine_correlations`]; the network step evaluates
/// `R̄ x` directly from the neighbors' accumulators and leaves it untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct GreediNodeState<T> {
    pub h: DenseVector<T>,
    pub p: DenseVector<T>,
    pub r: DenseMatrix<T>,
    pub p_bar: DenseVector<T>,
    pub r_bar: DenseMatrix<T>,
    /// Running trace of `r`, maintained in both proxy modes.
    pub r_trace: T,
    /// Light-mode gradient accumulator.
    pub g: DenseVector<T>,
    pub support: SupportSet,
}

impl<T: Scalar> GreediNodeState<T> {
    pub fn new(m: usize, mode: ProxyMode) -> Self {
        let dense = if mode == ProxyMode::Full { m } else { 0 };
        Self {
            h: DenseVector::zeros(m),
            p: DenseVector::zeros(m),
            r: DenseMatrix::zeros(dense, dense),
            p_bar: DenseVector::zeros(m),
            r_bar: DenseMatrix::zeros(dense, dense),
            r_trace: T::zero(),
            g: DenseVector::zeros(m),
            support: SupportSet::empty(),
        }
    }

    pub fn m(&self) -> usize {
        self.h.len()
    }
}

fn forgetting_weights<T: Scalar>(zeta: f64, n: usize) -> (T, T) {
    let n1 = T::lit(n as f64 + 1.0);
    (T::lit(n as f64) / n1 * T::lit(zeta), T::one() / n1)
}

/// `p(n) = (n/(n+1)) ζ p(n−1) + a y/(n+1)`; the trace accumulator follows the
/// same recursion.
pub fn update_cross_correlation<T: Scalar>(state: &mut GreediNodeState<T>, sample: &StreamSample<T>, zeta: f64, n: usize) {
    let (keep, new) = forgetting_weights::<T>(zeta, n);
    let gain = new * sample.y;
    for (p, &a) in state.p.as_mut_slice().iter_mut().zip(sample.a.iter()) {
        *p = keep * *p + gain * a;
    }
    state.r_trace = keep * state.r_trace + new * sample.a.norm_sq();
}

/// `R(n) = (n/(n+1)) ζ R(n−1) + a aᵀ/(n+1)`
pub fn update_autocorrelation<T: Scalar>(state: &mut GreediNodeState<T>, sample: &StreamSample<T>, zeta: f64, n: usize) {
    let (keep, new) = forgetting_weights::<T>(zeta, n);
    let a = sample.a.as_slice();
    let r = &mut state.r;
    for (i, &ai) in a.iter().enumerate() {
        let b = new * ai;
        for (x, &aj) in r.row_mut(i).iter_mut().zip(a) {
            *x = keep * *x + b * aj;
        }
    }
}

/// Applies both correlation recursions for time `n ≥ 1`.
pub fn update_correlations<T: Scalar>(state: &mut GreediNodeState<T>, sample: &StreamSample<T>, zeta: f64, n: usize) {
    update_cross_correlation(state, sample, zeta, n);
    update_autocorrelation(state, sample, zeta, n);
}

/// Mixes every node's `p` and `R` into `p̄` and `R̄`.
pub fn combine_correlations<T: Scalar>(states: &mut [GreediNodeState<T>], w: &CombinationMatrix<T>) -> Result<()> {
    let ps: Vec<_> = states.iter().map(|s| s.p.clone()).collect();
    let rs: Vec<_> = states.iter().map(|s| s.r.clone()).collect();
    let p_bar = synchronous_combine(&ps, w)?;
    let r_bar = synchronous_combine(&rs, w)?;
    for ((st, p), r) in states.iter_mut().zip(p_bar).zip(r_bar) {
        st.p_bar = p;
        st.r_bar = r;
    }
    Ok(())
}

/// Adaptive proxy steps `μ̃_k(n) = 1/ν̃_k(n)` with
/// `ν̃_k(n) = Σ_l w_{l,k} trace(R_l(n))/m`; 1 at cold start.
pub fn adaptive_proxy_step<T: Scalar>(states: &[GreediNodeState<T>], w: &CombinationMatrix<T>, n: usize) -> Vec<T> {
    let m = T::lit(states.first().map_or(1, GreediNodeState::m) as f64);
    (0..states.len())
        .map(|k| {
            if n == 0 {
                return T::one();
            }
            let nu: T = w.inbound(k).iter().map(|&(l, b)| b * states[l].r_trace / m).sum();
            if nu < T::lit(COLD_START_POWER) {
                T::one()
            } else {
                T::one() / nu
            }
        })
        .collect()
}

/// Outcome of the support-selection step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxySelection<T> {
    pub support: SupportSet,
    /// The estimate was rescaled to unit norm before entering the proxy.
    pub normalized: bool,
    /// Norm of the vector that entered the proxy.
    pub input_norm: T,
}

fn proxy_input<T: Scalar>(h: &DenseVector<T>, threshold_d: T) -> (DenseVector<T>, bool, T) {
    let norm = h.norm();
    if norm <= threshold_d {
        (h.clone(), false, norm)
    } else {
        (h.scaled(T::one() / norm), true, T::one())
    }
}

/// Support of `x + μ̃ (p̄ − R̄ x)` using the node's materialized `p̄` and `R̄`.
pub fn greedi_proxy_support<T: Scalar>(
    state: &GreediNodeState<T>,
    mu_tilde: T,
    threshold_d: T,
    s: usize,
) -> Result<ProxySelection<T>> {
    let (x, normalized, input_norm) = proxy_input(&state.h, threshold_d);
    let rx = state.r_bar.matvec(&x)?;
    let mut proxy = x;
    for ((q, &p), &r) in proxy.as_mut_slice().iter_mut().zip(state.p_bar.iter()).zip(rx.iter()) {
        *q = *q + mu_tilde * (p - r);
    }
    Ok(ProxySelection {
        support: supp_s(&proxy, s)?,
        normalized,
        input_norm,
    })
}

/// One LMS step on the coordinates in `support`; the result is zero elsewhere.
pub fn restricted_lms_adapt<T: Scalar>(
    h: &DenseVector<T>,
    sample: &StreamSample<T>,
    support: &SupportSet,
    mu: T,
) -> DenseVector<T> {
    let prediction: T = support.iter().map(|&i| sample.a[i] * h[i]).sum();
    let gain = mu * (sample.y - prediction);
    let mut psi = DenseVector::zeros(h.len());
    for &i in support {
        psi[i] = h[i] + gain * sample.a[i];
    }
    psi
}

/// Mixes the intermediate estimates and prunes each result to `s` entries.
pub fn combine_and_prune<T: Scalar>(
    psi: &[DenseVector<T>],
    w: &CombinationMatrix<T>,
    s: usize,
) -> Result<Vec<(SupportSet, DenseVector<T>)>> {
    synchronous_combine(psi, w)?
        .iter()
        .map(|fused| hard_threshold(fused, s))
        .collect()
}

/// `g(n) = ζ g(n−1) + a (y − aᵀ h)`, evaluated with the current estimate.
pub fn light_proxy_update<T: Scalar>(state: &mut GreediNodeState<T>, sample: &StreamSample<T>, zeta: f64) {
    let innovation = sample.y - sample.a.dot(&state.h).expect("regressor length equals m");
    let zeta = T::lit(zeta);
    for (g, &a) in state.g.as_mut_slice().iter_mut().zip(sample.a.iter()) {
        *g = zeta * *g + innovation * a;
    }
}

/// Per-node quantities of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo<T> {
    pub selections: Vec<ProxySelection<T>>,
    pub mu_tilde: Vec<T>,
    /// Intermediate LMS estimates `ψ_k(n)`.
    pub psi: Vec<DenseVector<T>>,
}

/// `Σ_l w_{l,k} R_l x`, touching only the rows of `R_l` indexed by nonzeros of `x`.
fn mixed_r_times<T: Scalar>(states: &[GreediNodeState<T>], w: &CombinationMatrix<T>, k: usize, x: &DenseVector<T>) -> DenseVector<T> {
    let mut out = vec![T::zero(); x.len()];
    for (j, &xj) in x.iter().enumerate() {
        if xj.is_zero() {
            continue;
        }
        for &(l, b) in w.inbound(k) {
            // R_l is symmetric, so row j equals column j
            axpy(b * xj, states[l].r.row(j), &mut out);
        }
    }
    DenseVector::from_vec(out)
}

fn mixed_vector<T: Scalar>(values: impl Fn(usize) -> DenseVector<T>, w: &CombinationMatrix<T>, k: usize, m: usize) -> DenseVector<T> {
    let mut out = DenseVector::zeros(m);
    for &(l, b) in w.inbound(k) {
        out.axpy(b, &values(l));
    }
    out
}

/// A network of GreeDi-LMS nodes advancing in lock-step.
#[derive(Debug, Clone)]
pub struct GreediNetwork<T> {
    states: Vec<GreediNodeState<T>>,
    /// Weights for the correlation statistics.
    w_stats: CombinationMatrix<T>,
    /// Weights for the estimates.
    w_est: CombinationMatrix<T>,
    cfg: GreediConfig,
    n: usize,
}

impl<T: Scalar> GreediNetwork<T> {
    pub fn new(m: usize, w_stats: CombinationMatrix<T>, w_est: CombinationMatrix<T>, cfg: GreediConfig) -> Result<Self> {
        let n_nodes = w_stats.n_nodes();
        if w_est.n_nodes() != n_nodes {
            return Err(Error::Config("weight matrices differ in size".into()));
        }
        cfg.validate(n_nodes, m)?;
        Ok(Self {
            states: (0..n_nodes).map(|_| GreediNodeState::new(m, cfg.proxy_mode)).collect(),
            w_stats,
            w_est,
            cfg,
            n: 0,
        })
    }

    pub fn states(&self) -> &[GreediNodeState<T>] {
        &self.states
    }

    pub fn config(&self) -> &GreediConfig {
        &self.cfg
    }

    pub fn time(&self) -> usize {
        self.n
    }

    fn proxy_steps(&self) -> Vec<T> {
        match self.cfg.step_schedule {
            StepSchedule::Fixed { mu_tilde } => vec![T::lit(mu_tilde); self.states.len()],
            StepSchedule::Adaptive => adaptive_proxy_step(&self.states, &self.w_stats, self.n),
        }
    }

    fn check_samples(&self, samples: &[StreamSample<T>]) -> Result<()> {
        let m = self.states[0].m();
        if samples.len() != self.states.len() || samples.iter().any(|s| s.a.len() != m) {
            return Err(Error::Config(format!(
                "expected {} samples of length {m}",
                self.states.len()
            )));
        }
        Ok(())
    }

    fn accumulate(&mut self, samples: &[StreamSample<T>]) {
        let (zeta, n, mode) = (self.cfg.zeta, self.n, self.cfg.proxy_mode);
        for (st, sample) in self.states.iter_mut().zip(samples) {
            match mode {
                ProxyMode::Full => update_correlations(st, sample, zeta, n),
                ProxyMode::Light => {
                    update_cross_correlation(st, sample, zeta, n);
                    light_proxy_update(st, sample, zeta);
                }
            }
        }
    }

    /// Adapts, combines and prunes, given the support selections of this step.
    fn finish(&mut self, samples: &[StreamSample<T>], selections: Vec<ProxySelection<T>>, mu_tilde: Vec<T>) -> Result<StepInfo<T>> {
        let psi: Vec<_> = self
            .states
            .iter()
            .zip(samples)
            .zip(&selections)
            .zip(&self.cfg.mu)
            .map(|(((st, sample), sel), &mu)| restricted_lms_adapt(&st.h, sample, &sel.support, T::lit(mu)))
            .collect();
        let pruned = combine_and_prune(&psi, &self.w_est, self.cfg.s)?;
        for ((st, (_, h)), sel) in self.states.iter_mut().zip(pruned).zip(&selections) {
            if !h.is_finite() {
                return Err(Error::NonFinite("GreeDi-LMS estimate"));
            }
            st.h = h;
            st.support = sel.support.clone();
        }
        Ok(StepInfo {
            selections,
            mu_tilde,
            psi,
        })
    }

    /// Processes the samples of the next time instant, one per node.
    pub fn step(&mut self, samples: &[StreamSample<T>]) -> Result<StepInfo<T>> {
        self.check_samples(samples)?;
        self.n += 1;
        self.accumulate(samples);
        let mu_tilde = self.proxy_steps();
        let m = self.states[0].m();
        let d = T::lit(self.cfg.threshold_d);

        let mut selections = Vec::with_capacity(self.states.len());
        let mut p_bars = Vec::with_capacity(self.states.len());
        for (k, &step) in mu_tilde.iter().enumerate() {
            let (x, normalized, input_norm) = proxy_input(&self.states[k].h, d);
            let mut proxy = x.clone();
            match self.cfg.proxy_mode {
                ProxyMode::Full => {
                    let p_bar = mixed_vector(|l| self.states[l].p.clone(), &self.w_stats, k, m);
                    let rx = mixed_r_times(&self.states, &self.w_stats, k, &x);
                    for ((q, &p), &r) in proxy.as_mut_slice().iter_mut().zip(p_bar.iter()).zip(rx.iter()) {
                        *q = *q + step * (p - r);
                    }
                    p_bars.push(p_bar);
                }
                ProxyMode::Light => {
                    let g_bar = mixed_vector(|l| self.states[l].g.clone(), &self.w_stats, k, m);
                    proxy.axpy(step, &g_bar);
                    p_bars.push(mixed_vector(|l| self.states[l].p.clone(), &self.w_stats, k, m));
                }
            }
            selections.push(ProxySelection {
                support: supp_s(&proxy, self.cfg.s)?,
                normalized,
                input_norm,
            });
        }
        for (st, p) in self.states.iter_mut().zip(p_bars) {
            st.p_bar = p;
        }
        self.finish(samples, selections, mu_tilde)
    }

    /// Same as [`GreediNetwork::step`] (full proxy only) but materializes
    /// `p̄` and `R̄` with [`combine_correlations`] and selects supports with
    /// [`greedi_proxy_support`].
    pub fn step_materialized(&mut self, samples: &[StreamSample<T>]) -> Result<StepInfo<T>> {
        if self.cfg.proxy_mode != ProxyMode::Full {
            return Err(Error::Config("materialized step needs the full proxy".into()));
        }
        self.check_samples(samples)?;
        self.n += 1;
        self.accumulate(samples);
        combine_correlations(&mut self.states, &self.w_stats)?;
        let mu_tilde = self.proxy_steps();
        let d = T::lit(self.cfg.threshold_d);
        let selections = self
            .states
            .iter()
            .zip(&mu_tilde)
            .map(|(st, &mt)| greedi_proxy_support(st, mt, d, self.cfg.s))
            .collect::<Result<Vec<_>>>()?;
        self.finish(samples, selections, mu_tilde)
    }

    /// `‖p̄_k − R̄_k h*‖` per node: the part of the proxy driven by noise.
    pub fn proxy_noise(&self, h_star: &DenseVector<T>) -> Vec<T> {
        (0..self.states.len())
            .map(|k| {
                let rh = mixed_r_times(&self.states, &self.w_stats, k, h_star);
                self.states[k].p_bar.sub(&rh).expect("same length").norm()
            })
            .collect()
    }
}

/// The terms of the steady-state error bound that can be evaluated exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    /// `Σ_k ‖η̄_k(n)‖` with `η̄_k = p̄_k − R̄_k h*`.
    pub proxy_noise: f64,
    /// `Σ_k |y_k(n) − a_kᵀ(n) h*|`.
    pub wiener_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreediRecord {
    pub n: usize,
    /// `(1/N) Σ_k ‖h_k(n) − h*(n)‖²`
    pub msd: f64,
    /// Mean over nodes of `|Ŝ_k ∩ S| / |S|`.
    pub support_overlap: f64,
    /// Every node selected exactly `supp(h*)`.
    pub supports_exact: bool,
    /// Nodes that used the normalized proxy branch.
    pub normalized_count: usize,
    pub bound_terms: Option<BoundTerms>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreediRun<T> {
    pub estimates: Vec<DenseVector<T>>,
    pub trace: Vec<GreediRecord>,
}

impl<T> GreediRun<T> {
    pub fn msd(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.msd).collect()
    }
}

/// Runs the network for `horizon` time instants on the given streams.
pub fn run_greedi<T: Scalar>(
    streams: &mut OnlineStreams<T>,
    w_stats: &CombinationMatrix<T>,
    w_est: &CombinationMatrix<T>,
    cfg: &GreediConfig,
    horizon: usize,
) -> Result<GreediRun<T>> {
    run_greedi_observed(streams, w_stats, w_est, cfg, horizon, |_, _, _| {})
}

/// [`run_greedi`] with a callback after every time step.
pub fn run_greedi_observed<T: Scalar, F>(
    streams: &mut OnlineStreams<T>,
    w_stats: &CombinationMatrix<T>,
    w_est: &CombinationMatrix<T>,
    cfg: &GreediConfig,
    horizon: usize,
    mut observe: F,
) -> Result<GreediRun<T>>
where
    F: FnMut(usize, &GreediNetwork<T>, &StepInfo<T>),
{
    if horizon < 1 {
        return Err(Error::Config("horizon must be ≥ 1".into()));
    }
    if streams.n_nodes() != w_stats.n_nodes() {
        return Err(Error::Config(format!(
            "{} streams for a {}-node network",
            streams.n_nodes(),
            w_stats.n_nodes()
        )));
    }
    let mut net = GreediNetwork::new(streams.m(), w_stats.clone(), w_est.clone(), cfg.clone())?;
    let mut trace = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let samples = streams.next_round();
        let info = net.step(&samples)?;
        let n = net.time();
        let truth = streams.current_truth();
        let bound_terms = cfg.diagnostics.then(|| BoundTerms {
            proxy_noise: net.proxy_noise(&truth.h_star).iter().map(|x| x.as_f64()).sum(),
            wiener_error: samples
                .iter()
                .map(|s| (s.y - s.a.dot(&truth.h_star).expect("length m")).abs().as_f64())
                .sum(),
        });
        trace.push(record(n, net.states().iter().map(|s| &s.h), &info.selections, truth, bound_terms));
        observe(n, &net, &info);
    }
    Ok(GreediRun {
        estimates: net.states.into_iter().map(|s| s.h).collect(),
        trace,
    })
}

fn record<'a, T: Scalar>(
    n: usize,
    estimates: impl Iterator<Item = &'a DenseVector<T>>,
    selections: &[ProxySelection<T>],
    truth: &crate::scenario::GroundTruth<T>,
    bound_terms: Option<BoundTerms>,
) -> GreediRecord {
    let (sum, count) = estimates.fold((0.0, 0usize), |(acc, c), h| (acc + h.dist_sq(&truth.h_star).as_f64(), c + 1));
    let denom = truth.support.len().max(1) as f64;
    GreediRecord {
        n,
        msd: sum / count.max(1) as f64,
        support_overlap: selections
            .iter()
            .map(|sel| sel.support.intersection_len(&truth.support) as f64 / denom)
            .sum::<f64>()
            / selections.len().max(1) as f64,
        supports_exact: selections.iter().all(|sel| sel.support == truth.support),
        normalized_count: selections.iter().filter(|sel| sel.normalized).count(),
        bound_terms,
    }
}

/// Fusion-center reference: one estimator that sees every node's sample.
///
/// The statistics are network means of the per-node outer products, and the
/// LMS step applies `μ` to the network-mean gradient.
#[derive(Debug, Clone)]
pub struct CentralizedGreedi<T> {
    state: GreediNodeState<T>,
    cfg: GreediConfig,
    n: usize,
}

impl<T: Scalar> CentralizedGreedi<T> {
    /// Uses `cfg.mu[0]` as the step size.
    pub fn new(m: usize, cfg: GreediConfig) -> Result<Self> {
        if cfg.proxy_mode != ProxyMode::Full {
            return Err(Error::Config("centralized mode uses the full proxy".into()));
        }
        cfg.validate(cfg.mu.len(), m)?;
        if cfg.mu.is_empty() {
            return Err(Error::Config("centralized mode needs a step size".into()));
        }
        Ok(Self {
            state: GreediNodeState::new(m, ProxyMode::Full),
            cfg,
            n: 0,
        })
    }

    pub fn estimate(&self) -> &DenseVector<T> {
        &self.state.h
    }

    pub fn step(&mut self, samples: &[StreamSample<T>]) -> Result<ProxySelection<T>> {
        let m = self.state.m();
        if samples.is_empty() || samples.iter().any(|s| s.a.len() != m) {
            return Err(Error::Config(format!("expected samples of length {m}")));
        }
        self.n += 1;
        let (keep, new) = forgetting_weights::<T>(self.cfg.zeta, self.n);
        let inv_n = T::one() / T::lit(samples.len() as f64);
        let st = &mut self.state;
        st.p.scale(keep);
        st.r.scale(keep);
        st.r_trace = keep * st.r_trace;
        for sample in samples {
            let w = new * inv_n;
            st.p.axpy(w * sample.y, &sample.a);
            let a = sample.a.as_slice();
            for (i, &ai) in a.iter().enumerate() {
                axpy(w * ai, a, st.r.row_mut(i));
            }
            st.r_trace = st.r_trace + w * sample.a.norm_sq();
        }
        st.p_bar = st.p.clone();
        st.r_bar = st.r.clone();
        let mu_tilde = match self.cfg.step_schedule {
            StepSchedule::Fixed { mu_tilde } => T::lit(mu_tilde),
            StepSchedule::Adaptive => {
                let nu = st.r_trace / T::lit(m as f64);
                if nu < T::lit(COLD_START_POWER) {
                    T::one()
                } else {
                    T::one() / nu
                }
            }
        };
        let sel = greedi_proxy_support(st, mu_tilde, T::lit(self.cfg.threshold_d), self.cfg.s)?;
        let prev = st.h.restricted_to(&sel.support);
        let mut h = prev.clone();
        let mu = T::lit(self.cfg.mu[0]) * inv_n;
        for sample in samples {
            let err = sample.y - sel.support.iter().map(|&i| sample.a[i] * prev[i]).sum::<T>();
            for &i in &sel.support {
                h[i] = h[i] + mu * err * sample.a[i];
            }
        }
        if !h.is_finite() {
            return Err(Error::NonFinite("centralized GreeDi-LMS estimate"));
        }
        st.h = h;
        st.support = sel.support.clone();
        Ok(sel)
    }
}

/// Runs the fusion-center reference for `horizon` time instants.
pub fn run_greedi_centralized<T: Scalar>(
    streams: &mut OnlineStreams<T>,
    cfg: &GreediConfig,
    horizon: usize,
) -> Result<GreediRun<T>> {
    if horizon < 1 {
        return Err(Error::Config("horizon must be ≥ 1".into()));
    }
    let mut center = CentralizedGreedi::new(streams.m(), cfg.clone())?;
    let mut trace = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let samples = streams.next_round();
        let sel = center.step(&samples)?;
        trace.push(record(center.n, std::iter::once(center.estimate()), &[sel], streams.current_truth(), None));
    }
    Ok(GreediRun {
        estimates: vec![center.state.h],
        trace,
    })
}

/// CSV rows `n,msd,support_overlap,normalized_count`.
pub fn write_trace_csv<W: Write>(trace: &[GreediRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "n,msd,support_overlap,normalized_count")?;
    for r in trace {
        writeln!(out, "{},{:e},{},{}", r.n, r.msd, r.support_overlap, r.normalized_count)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_metropolis, build_uniform, Topology};
    use crate::scenario::{gen_online_streams, rng_from_seed, GroundTruth, NoiseModel, Schedule};

    fn v(x: &[f64]) -> DenseVector<f64> {
        DenseVector::from_vec(x.to_vec())
    }

    fn sample(y: f64, a: &[f64]) -> StreamSample<f64> {
        StreamSample { y, a: v(a) }
    }

    #[test]
    fn correlation_recursion_by_hand() {
        let mut st = GreediNodeState::<f64>::new(2, ProxyMode::Full);
        update_correlations(&mut st, &sample(2.0, &[1.0, 0.0]), 1.0, 1);
        assert_eq!(st.p, v(&[1.0, 0.0]));
        assert_eq!(st.r[(0, 0)], 0.5);

        let mut st = GreediNodeState::<f64>::new(2, ProxyMode::Full);
        st.p = v(&[1.0, 0.0]);
        update_correlations(&mut st, &sample(3.0, &[0.0, 1.0]), 0.5, 2);
        assert!((st.p[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((st.p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_samples_approach_their_product() {
        let mut st = GreediNodeState::<f64>::new(2, ProxyMode::Full);
        let smp = sample(2.0, &[1.5, -1.0]);
        for n in 1..=999 {
            update_correlations(&mut st, &smp, 1.0, n);
            let scale = n as f64 / (n as f64 + 1.0);
            assert!((st.p[0] - 3.0 * scale).abs() < 1e-12);
            assert!((st.r[(0, 1)] + 1.5 * scale).abs() < 1e-12);
            assert!((st.r_trace - st.r.trace()).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_step_examples() {
        let w: CombinationMatrix<f64> = build_metropolis(&Topology::complete(3).unwrap());
        let mut states: Vec<_> = (0..3).map(|_| GreediNodeState::<f64>::new(4, ProxyMode::Full)).collect();
        for st in &mut states {
            st.r = DenseMatrix::diagonal(&[4.0; 4]);
            st.r_trace = 16.0;
        }
        assert!(adaptive_proxy_step(&states, &w, 5).iter().all(|&mt| (mt - 0.25).abs() < 1e-15));
        assert_eq!(adaptive_proxy_step(&states, &w, 0), vec![1.0; 3]);

        let w: CombinationMatrix<f64> = build_uniform(&Topology::complete(2).unwrap());
        let mut states: Vec<_> = (0..2).map(|_| GreediNodeState::<f64>::new(3, ProxyMode::Full)).collect();
        states[0].r_trace = 3.0;
        states[1].r_trace = 9.0;
        assert!(adaptive_proxy_step(&states, &w, 7).iter().all(|&mt| (mt - 0.5).abs() < 1e-15));
        let cold: Vec<_> = (0..2).map(|_| GreediNodeState::<f64>::new(3, ProxyMode::Full)).collect();
        assert_eq!(adaptive_proxy_step(&cold, &w, 7), vec![1.0; 2]);
    }

    #[test]
    fn proxy_support_examples() {
        let mut st = GreediNodeState::<f64>::new(4, ProxyMode::Full);
        st.p_bar = DenseVector::basis(4, 0, 5.0);
        st.r_bar = DenseMatrix::from_rows(&[
            vec![3.0, 1.0, 0.0, 2.0],
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 7.0, 0.0],
            vec![2.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let sel = greedi_proxy_support(&st, 0.3, 100.0, 1).unwrap();
        assert_eq!(sel.support.as_slice(), &[0]);
        assert!(!sel.normalized);

        st.h = v(&[3.0, 4.0, 0.0, 0.0]); // norm 5 = D + 1
        let sel = greedi_proxy_support(&st, 0.3, 4.0, 1).unwrap();
        assert!(sel.normalized);
        assert!((sel.input_norm - 1.0).abs() < 1e-15);
        let sel = greedi_proxy_support(&st, 0.3, 5.0, 1).unwrap();
        assert!(!sel.normalized);
    }

    #[test]
    fn converged_statistics_reveal_true_support() {
        let h_star = v(&[0.0, 0.7, 0.0, -0.2, 0.0, 1.3]);
        let diag = [2.0, 0.5, 1.0, 3.0, 1.5, 0.8];
        let mut st = GreediNodeState::<f64>::new(6, ProxyMode::Full);
        st.r_bar = DenseMatrix::diagonal(&diag);
        st.p_bar = st.r_bar.matvec(&h_star).unwrap();
        let sel = greedi_proxy_support(&st, 1.0 / 1.4666, 100.0, 3).unwrap();
        assert_eq!(sel.support, h_star.nonzero_support());
    }

    #[test]
    fn restricted_lms_examples() {
        let h = v(&[0.5, 0.0, 0.0]);
        let sup = SupportSet::new(vec![0], 3).unwrap();
        let psi = restricted_lms_adapt(&h, &sample(2.0, &[2.0, 0.0, 0.0]), &sup, 0.1);
        assert!((psi[0] - 0.7).abs() < 1e-15);

        let psi = restricted_lms_adapt(&DenseVector::zeros(3), &sample(1.0, &[1.0, 0.0, 0.0]), &sup, 1.0);
        assert_eq!(psi, v(&[1.0, 0.0, 0.0]));

        let exact = v(&[0.0, 2.0, -1.0]);
        let sup = SupportSet::new(vec![1, 2], 3).unwrap();
        let a = [0.3, -1.1, 0.4];
        let y = -1.1 * 2.0 - 0.4;
        assert_eq!(restricted_lms_adapt(&exact, &sample(y, &a), &sup, 0.2), exact);

        // entries off the support are dropped
        let psi = restricted_lms_adapt(&v(&[1.0, 1.0, 1.0]), &sample(0.0, &a), &SupportSet::new(vec![2], 3).unwrap(), 0.0);
        assert_eq!(psi, v(&[0.0, 0.0, 1.0]));
    }

    #[test]
    fn combine_and_prune_examples() {
        let w: CombinationMatrix<f64> = build_uniform(&Topology::complete(2).unwrap());
        let same = vec![v(&[0.0, 1.0, 0.0, -2.0]); 2];
        for (_, h) in combine_and_prune(&same, &w, 2).unwrap() {
            assert_eq!(h, same[0]);
        }
        let psi = vec![v(&[3.0, 0.0, 1.0, 0.0]), v(&[0.0, 0.5, 0.0, 2.0])];
        let own = combine_and_prune(&psi, &CombinationMatrix::identity(2), 1).unwrap();
        assert_eq!(own[0].1, v(&[3.0, 0.0, 0.0, 0.0]));
        assert_eq!(own[1].1, v(&[0.0, 0.0, 0.0, 2.0]));

        // disjoint supports, magnitudes 2 vs 1: fused has 2s nonzeros
        let psi = vec![v(&[4.0, -4.0, 0.0, 0.0, 0.0, 0.0]), v(&[0.0, 0.0, 2.0, 2.0, 0.0, 0.0])];
        let fused = synchronous_combine(&psi, &w).unwrap();
        assert_eq!(fused[0].nnz(), 4);
        for (sup, h) in combine_and_prune(&psi, &w, 2).unwrap() {
            assert_eq!(sup.as_slice(), &[0, 1]);
            assert_eq!(h, v(&[2.0, -2.0, 0.0, 0.0, 0.0, 0.0]));
        }
    }

    #[test]
    fn light_recursion_examples() {
        let mut st = GreediNodeState::<f64>::new(3, ProxyMode::Light);
        light_proxy_update(&mut st, &sample(1.0, &[1.0, 0.0, 0.0]), 0.5);
        assert_eq!(st.g, v(&[1.0, 0.0, 0.0]));
        light_proxy_update(&mut st, &sample(2.0, &[0.0, 1.0, 0.0]), 0.5);
        assert_eq!(st.g, v(&[0.5, 2.0, 0.0]));

        let mut st = GreediNodeState::<f64>::new(3, ProxyMode::Light);
        st.h = v(&[1.0, -1.0, 0.0]);
        for a in [[0.3, 1.0, 2.0], [-1.0, 0.5, 0.1]] {
            light_proxy_update(&mut st, &sample(a[0] - a[1], &a), 1.0);
        }
        assert_eq!(st.g, DenseVector::zeros(3));
    }

    fn small_streams(seed: u64, noise: NoiseModel) -> (OnlineStreams<f64>, GroundTruth<f64>) {
        let truth = GroundTruth::generate(12, 3, &mut rng_from_seed(seed)).unwrap();
        (gen_online_streams(Schedule::constant(truth.clone()), 4, noise, seed).unwrap(), truth)
    }

    #[test]
    fn zero_step_freezes_estimates() {
        let (mut streams, truth) = small_streams(1, NoiseModel::HETEROGENEOUS);
        let w: CombinationMatrix<f64> = build_metropolis(&Topology::ring(4).unwrap());
        let cfg = GreediConfig::new(3, 0.0, 4);
        let run = run_greedi(&mut streams, &w, &w, &cfg, 50).unwrap();
        for r in &run.trace {
            assert!((r.msd - truth.h_star.norm_sq()).abs() < 1e-12);
        }
    }

    #[test]
    fn fast_step_matches_materialized_step() {
        let w: CombinationMatrix<f64> = build_metropolis(&Topology::ring(4).unwrap());
        let mut cfg = GreediConfig::new(3, 0.1, 4);
        cfg.threshold_d = 1.0; // exercise the normalized branch as well
        let (mut streams, _) = small_streams(2, NoiseModel::HETEROGENEOUS);
        let mut fast = GreediNetwork::new(12, w.clone(), w.clone(), cfg.clone()).unwrap();
        let mut slow = GreediNetwork::new(12, w.clone(), w, cfg).unwrap();
        let mut normalized_seen = false;
        for _ in 0..300 {
            let samples = streams.next_round();
            let a = fast.step(&samples).unwrap();
            let b = slow.step_materialized(&samples).unwrap();
            normalized_seen |= a.selections.iter().any(|s| s.normalized);
            for (x, y) in a.selections.iter().zip(&b.selections) {
                assert_eq!(x.support, y.support);
            }
            for (x, y) in fast.states().iter().zip(slow.states()) {
                assert!(x.h.dist_sq(&y.h).sqrt() < 1e-10);
            }
        }
        assert!(normalized_seen);
    }

    #[test]
    fn config_validation() {
        let mut cfg = GreediConfig::new(3, 0.1, 2);
        assert!(cfg.validate(2, 10).is_ok());
        assert!(cfg.validate(3, 10).is_err());
        assert!(cfg.validate(2, 2).is_err());
        cfg.zeta = 0.0;
        assert!(cfg.validate(2, 10).is_err());
        cfg.zeta = 1.0;
        cfg.threshold_d = 0.0;
        assert!(cfg.validate(2, 10).is_err());
        cfg.threshold_d = 1.0;
        cfg.mu[1] = -0.1;
        assert!(cfg.validate(2, 10).is_err());
    }

    #[test]
    fn diagnostics_are_recorded() {
        let (mut streams, _) = small_streams(5, NoiseModel::Noiseless);
        let w: CombinationMatrix<f64> = build_metropolis(&Topology::ring(4).unwrap());
        let mut cfg = GreediConfig::new(3, 0.1, 4);
        cfg.diagnostics = true;
        let run = run_greedi(&mut streams, &w, &w, &cfg, 20).unwrap();
        for r in &run.trace {
            let terms = r.bound_terms.unwrap();
            assert!(terms.wiener_error.abs() < 1e-12);
            assert!(terms.proxy_noise < 1e-10);
        }
        let mut buf = Vec::new();
        write_trace_csv(&run.trace, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 21);
    }
}
