//! Small-scale checks of the convergence theory.

use std::fmt;

use dgreedy_core::dihat::{run_dihat_observed, DihatConfig, ProxyStep};
use dgreedy_core::greedi::{run_greedi, GreediConfig};
use dgreedy_core::linalg::{rip_constant_bruteforce, DenseMatrix, DenseVector};
use dgreedy_core::network::{build_metropolis, verify_consensus_conditions, CombinationMatrix, Topology};
use dgreedy_core::scenario::{derive_seed, derived_rng, gen_online_streams, GroundTruth, NodeBatch, NoiseModel, Role, Schedule};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::HarnessError;

/// Entry-wise distance to the network mean that counts as consensus.
pub const CONSENSUS_TOL: f64 = 1e-6;
/// Slack on the contraction bound.
pub const CONTRACTION_SLACK: f64 = 1e-6;
/// Errors below this fraction of the initial error are roundoff and give no ratio.
pub const ERROR_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TheoryReport {
    pub checks: Vec<Check>,
}

impl TheoryReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for TheoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<22} measured={:<12.6} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Sizes of the small instance used by [`verify_theory`].
#[derive(Debug, Clone)]
pub struct TheoryScenario {
    pub seed: u64,
    pub n_nodes: usize,
    pub m: usize,
    pub l: usize,
    pub s: usize,
    /// Candidate matrices tried when looking for `δ_{3s} < 1/3`.
    pub candidates: usize,
    /// Defaults to a ring.
    pub topology: Option<Topology>,
}

impl Default for TheoryScenario {
    fn default() -> Self {
        Self {
            seed: 1,
            n_nodes: 4,
            m: 16,
            l: 15,
            s: 1,
            candidates: 256,
            topology: None,
        }
    }
}

impl TheoryScenario {
    pub fn topology(&self) -> Result<Topology, HarnessError> {
        match &self.topology {
            Some(t) => Ok(t.clone()),
            None => Topology::ring(self.n_nodes).map_err(|e| HarnessError::Config(e.to_string())),
        }
    }
}

/// `ρ = sqrt(8 δ_{3s}² / (1 − δ_{2s}²))`
pub fn contraction_factor(delta_3s: f64, delta_2s: f64) -> f64 {
    (8.0 * delta_3s * delta_3s / (1.0 - delta_2s * delta_2s)).sqrt()
}

/// A noiseless batch problem whose network-mean sensing matrix is known.
#[derive(Debug, Clone)]
pub struct ContractionInstance {
    pub a_bar: DenseMatrix<f64>,
    pub delta_3s: f64,
    pub delta_2s: f64,
    pub rho: f64,
    pub truth: GroundTruth<f64>,
    pub data: Vec<NodeBatch<f64>>,
    /// Index of the candidate matrix that was kept.
    pub candidate: usize,
}

/// Orthonormal rows of a Gaussian matrix, first `l` of them, with columns
/// rescaled to unit norm.
fn frame_candidate<R: Rng>(l: usize, m: usize, rng: &mut R) -> DenseMatrix<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(l);
    while rows.len() < l {
        let mut v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for r in &rows {
                let c: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(r).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            rows.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let mut a = DenseMatrix::from_rows(&rows).expect("rows have equal length");
    for j in 0..m {
        let norm = (0..l).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt();
        for i in 0..l {
            a.row_mut(i)[j] /= norm;
        }
    }
    a
}

/// Tries up to `candidates` seeded matrices and keeps the first with
/// `δ_{3s} < 1/3`, or the best one seen. Node matrices are the mean plus
/// perturbations that sum to zero over the network.
pub fn build_contraction_instance(sc: &TheoryScenario) -> Result<ContractionInstance, HarnessError> {
    let (m, l, s, n) = (sc.m, sc.l, sc.s, sc.n_nodes);
    if 3 * s > m || l < 1 || n < 1 || sc.candidates < 1 {
        return Err(HarnessError::Config(format!("no contraction instance for m={m}, l={l}, s={s}, N={n}")));
    }
    let core = |e: dgreedy_core::Error| HarnessError::Config(e.to_string());
    let mut best: Option<(f64, usize, DenseMatrix<f64>)> = None;
    for c in 0..sc.candidates {
        let a = frame_candidate(l, m, &mut derived_rng(sc.seed, Role::Batch, &[u64::MAX, c as u64]));
        let d = rip_constant_bruteforce(&a, 3 * s).map_err(core)?;
        if best.as_ref().is_none_or(|(bd, _, _)| d < *bd) {
            best = Some((d, c, a));
        }
        if d < 1.0 / 3.0 {
            break;
        }
    }
    let (delta_3s, candidate, a_bar) = best.expect("at least one candidate");
    let delta_2s = rip_constant_bruteforce(&a_bar, 2 * s).map_err(core)?;

    let truth = GroundTruth::generate(m, s, &mut derived_rng(sc.seed, Role::Truth, &[])).map_err(core)?;
    let mut rng = derived_rng(sc.seed, Role::Batch, &[]);
    let noise: Vec<Vec<f64>> = (0..n).map(|_| (0..l * m).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect()).collect();
    let mean: Vec<f64> = (0..l * m).map(|i| noise.iter().map(|z| z[i]).sum::<f64>() / n as f64).collect();
    let data = noise
        .iter()
        .map(|z| {
            let values: Vec<f64> = a_bar.as_slice().iter().zip(z).zip(&mean).map(|((a, z), mu)| a + z - mu).collect();
            let a = DenseMatrix::from_row_major(l, m, values).map_err(core)?;
            let y = a.matvec(&truth.h_star).map_err(core)?;
            Ok(NodeBatch {
                noise: DenseVector::zeros(l),
                noise_var: 0.0,
                a,
                y,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    Ok(ContractionInstance {
        rho: contraction_factor(delta_3s, delta_2s),
        a_bar,
        delta_3s,
        delta_2s,
        truth,
        data,
        candidate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionOutcome {
    /// First iteration whose mixed measurements are within
    /// [`CONSENSUS_TOL`] of the network means.
    pub burn_in: Option<usize>,
    /// `(n, ‖h_n − h*‖ / ‖h_{n−1} − h*‖)` for `n ≥ burn_in` whose previous
    /// error is above [`ERROR_FLOOR`].
    pub ratios: Vec<(usize, f64)>,
    /// Network-wide error `sqrt(Σ_k ‖h_k,n − h*‖²)` for `n = 0, 1, …`.
    pub errors: Vec<f64>,
    pub rho: f64,
}

impl ContractionOutcome {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().map(|&(_, r)| r).fold(0.0, f64::max)
    }

    pub fn holds(&self) -> bool {
        self.burn_in.is_some() && self.ratios.iter().all(|&(_, r)| r <= self.rho + CONTRACTION_SLACK)
    }
}

/// Runs full DiHaT with a unit proxy step on the instance.
pub fn check_contraction(
    inst: &ContractionInstance,
    w: &CombinationMatrix<f64>,
    iterations: usize,
) -> Result<ContractionOutcome, HarnessError> {
    let mut cfg = DihatConfig::new(inst.truth.s);
    cfg.max_iters = iterations;
    cfg.rel_change_tol = 0.0;
    cfg.proxy_step = ProxyStep::Unit;
    let n = inst.data.len() as f64;
    let l = inst.a_bar.rows();
    let y_mean: Vec<f64> = (0..l).map(|i| inst.data.iter().map(|b| b.y[i]).sum::<f64>() / n).collect();
    let h_star = &inst.truth.h_star;
    let mut errors = vec![h_star.norm() * n.sqrt()];
    let mut burn_in = None;
    run_dihat_observed(&inst.data, &inst.truth, w, w, &cfg, |iter, states, _| {
        errors.push(states.iter().map(|s| s.h.dist_sq(h_star)).sum::<f64>().sqrt());
        if burn_in.is_none() {
            let dev = states
                .iter()
                .flat_map(|s| {
                    let a = s.a_bar.as_slice().iter().zip(inst.a_bar.as_slice()).map(|(x, y)| (x - y).abs());
                    let y = s.y_bar.iter().zip(&y_mean).map(|(x, y)| (x - y).abs());
                    a.chain(y).collect::<Vec<_>>()
                })
                .fold(0.0, f64::max);
            if dev <= CONSENSUS_TOL {
                burn_in = Some(iter);
            }
        }
    })
    .map_err(|e| HarnessError::Run {
        index: 0,
        seed: 0,
        source: e,
    })?;

    let ratios = match burn_in {
        Some(n0) => (n0.max(1)..errors.len())
            .filter(|&k| errors[k - 1] > ERROR_FLOOR * errors[0])
            .map(|k| (k, errors[k] / errors[k - 1]))
            .collect(),
        None => Vec::new(),
    };
    Ok(ContractionOutcome {
        burn_in,
        ratios,
        errors,
        rho: inst.rho,
    })
}

/// Per (node, coordinate) test of `|mean − h*| < 3 SE` over Monte-Carlo
/// replicates; a coordinate that never moves from the truth passes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unbiasedness {
    pub pairs: usize,
    pub within: usize,
}

impl Unbiasedness {
    pub fn fraction(&self) -> f64 {
        self.within as f64 / self.pairs.max(1) as f64
    }
}

/// `estimates[run][node][coordinate]`
pub fn unbiasedness(estimates: &[Vec<Vec<f64>>], truth: &[f64]) -> Unbiasedness {
    let runs = estimates.len() as f64;
    let nodes = estimates.first().map_or(0, Vec::len);
    let mut within = 0;
    for k in 0..nodes {
        for (i, &t) in truth.iter().enumerate() {
            let xs = estimates.iter().map(|run| run[k][i]);
            let mean = xs.clone().sum::<f64>() / runs;
            let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (runs - 1.0).max(1.0);
            let se = (var / runs).sqrt();
            let dev = (mean - t).abs();
            if dev < 3.0 * se || (se == 0.0 && dev == 0.0) {
                within += 1;
            }
        }
    }
    Unbiasedness {
        pairs: nodes * truth.len(),
        within,
    }
}

fn core_err(e: dgreedy_core::Error) -> HarnessError {
    HarnessError::Run {
        index: 0,
        seed: 0,
        source: e,
    }
}

/// Consensus conditions, RIP precondition, DiHaT contraction, GreeDi-LMS
/// support identification and unbiasedness on one small instance.
pub fn verify_theory(sc: &TheoryScenario) -> Result<TheoryReport, HarnessError> {
    let mut report = TheoryReport::default();
    let topology = sc.topology()?;
    let w: CombinationMatrix<f64> = build_metropolis(&topology);

    let consensus = verify_consensus_conditions(w.matrix());
    let mut violated = consensus.violations();
    if !topology.is_connected() {
        violated.insert(0, "connected");
    }
    report.checks.push(Check {
        name: "consensus_conditions",
        passed: violated.is_empty(),
        measured: consensus.spectral_value,
        detail: if violated.is_empty() {
            "connected; 1ᵀW = 1ᵀ; W1 = 1; λ(W − 11ᵀ/N) < 1".into()
        } else {
            format!("violated: {}", violated.join(", "))
        },
    });

    let inst = build_contraction_instance(sc)?;
    let rip_ok = inst.delta_3s < 1.0 / 3.0;
    report.checks.push(Check {
        name: "rip_precondition",
        passed: rip_ok,
        measured: inst.delta_3s,
        detail: format!(
            "δ_{}(Ā) = {:.4} (candidate {}), δ_{} = {:.4}, ρ = {:.4}",
            3 * sc.s,
            inst.delta_3s,
            inst.candidate,
            2 * sc.s,
            inst.delta_2s,
            inst.rho
        ),
    });

    let outcome = check_contraction(&inst, &w, 60)?;
    report.checks.push(Check {
        name: "contraction",
        passed: rip_ok && outcome.holds(),
        measured: outcome.max_ratio(),
        detail: match outcome.burn_in {
            None => "measurement averages never reached consensus".into(),
            Some(n0) if !rip_ok => format!("burn-in n0 = {n0}; precondition δ_3s < 1/3 not met"),
            Some(n0) => format!(
                "burn-in n0 = {n0}; error at n0 {:.2e}; {} ratios above roundoff, max {:.4} vs ρ = {:.4}",
                outcome.errors[n0],
                outcome.ratios.len(),
                outcome.max_ratio(),
                outcome.rho
            ),
        },
    });

    let horizon = 3000;
    let deadline = 2000;
    let cfg = GreediConfig::new(sc.s, GreediConfig::default_mu(sc.s, 1.0), sc.n_nodes);
    let mut streams = gen_online_streams(Schedule::constant(inst.truth.clone()), sc.n_nodes, NoiseModel::Noiseless, sc.seed)
        .map_err(core_err)?;
    let run = run_greedi(&mut streams, &w, &w, &cfg, horizon).map_err(core_err)?;
    let settled = run.trace.iter().rposition(|r| !r.supports_exact).map_or(1, |i| i + 2);
    report.checks.push(Check {
        name: "support_identification",
        passed: settled <= deadline,
        measured: settled as f64,
        detail: format!("noiseless GreeDi-LMS supports equal supp(h*) from n = {settled} (deadline {deadline})"),
    });

    let runs = 200;
    let mut finals = Vec::with_capacity(runs);
    for r in 0..runs {
        let seed = derive_seed(sc.seed, &[Role::Run as u64, r as u64]);
        let mut streams = gen_online_streams(
            Schedule::constant(inst.truth.clone()),
            sc.n_nodes,
            NoiseModel::Fixed { variance: 0.01 },
            seed,
        )
        .map_err(core_err)?;
        let run = run_greedi(&mut streams, &w, &w, &cfg, 1000).map_err(core_err)?;
        finals.push(run.estimates.into_iter().map(|h| h.into_vec()).collect::<Vec<_>>());
    }
    let unbiased = unbiasedness(&finals, inst.truth.h_star.as_slice());
    report.checks.push(Check {
        name: "mean_convergence",
        passed: unbiased.fraction() >= 0.99,
        measured: unbiased.fraction(),
        detail: format!(
            "{}/{} (node, coordinate) means within 3 SE of h* over {runs} runs",
            unbiased.within, unbiased.pairs
        ),
    });
    Ok(report)
}
