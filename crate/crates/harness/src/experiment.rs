//! Monte-Carlo execution and trace aggregation.

use dgreedy_core::dihat::run_dihat;
use dgreedy_core::greedi::{run_greedi, run_greedi_centralized, GreediRecord};
use dgreedy_core::network::CombinationMatrix;
use dgreedy_core::scenario::{
    derive_seed, derived_rng, gen_batch_data, gen_online_streams, GroundTruth, Role, Schedule, RNG_ALGORITHM,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, ExperimentConfig, GreediVariant};
use crate::error::HarnessError;

pub const VERSION: &str = concat!("dgreedy ", env!("CARGO_PKG_VERSION"));

/// Seed of Monte-Carlo run `index`.
pub fn run_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, &[Role::Run as u64, index as u64])
}

/// Everything one Monte-Carlo run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub index: usize,
    pub seed: u64,
    pub msd: Vec<f64>,
    /// GreeDi-LMS only: mean `|Ŝ_k ∩ S| / |S|` per time step.
    pub support_overlap: Option<Vec<f64>>,
    /// First trace index from which every node selects `supp(h*)` up to the
    /// end of the run.
    pub support_settled_at: Option<usize>,
    pub final_estimates: Vec<Vec<f64>>,
    /// Ground truth active at the end of the run.
    pub final_truth: Vec<f64>,
}

/// Pointwise Monte-Carlo mean and its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsdTrace {
    pub name: String,
    pub variant: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub version: String,
    pub rng: String,
    /// Iteration or time index of `msd[0]`.
    pub first_index: usize,
    pub msd: Vec<f64>,
    pub support_overlap: Option<Vec<f64>>,
    pub run_seeds: Vec<u64>,
}

impl MsdTrace {
    pub fn len(&self) -> usize {
        self.msd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.msd.is_empty()
    }

    /// Mean over the last 10% of the trace.
    pub fn final_window_mean(&self) -> f64 {
        final_window_mean(&self.msd)
    }

    /// First index (in trace units) at which the MSD is at or below `level`.
    pub fn first_reach(&self, level: f64) -> Option<usize> {
        self.msd.iter().position(|&x| x <= level).map(|i| i + self.first_index)
    }

    /// Mean of the entries whose index lies in `[from, to]`.
    pub fn window_mean(&self, from: usize, to: usize) -> f64 {
        let lo = from.saturating_sub(self.first_index);
        let hi = (to + 1).saturating_sub(self.first_index).min(self.msd.len());
        let slice = &self.msd[lo.min(hi)..hi];
        slice.iter().sum::<f64>() / slice.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub trace: MsdTrace,
    pub runs: Vec<RunOutcome>,
}

/// Mean over the last `max(1, ⌈len/10⌉)` entries.
pub fn final_window_mean(trace: &[f64]) -> f64 {
    if trace.is_empty() {
        return f64::NAN;
    }
    let w = trace.len().div_ceil(10).max(1);
    trace[trace.len() - w..].iter().sum::<f64>() / w as f64
}

/// Pointwise arithmetic mean of equally long traces, summed in slice order.
pub fn average_traces<S: AsRef<[f64]>>(traces: &[S]) -> Result<Vec<f64>, HarnessError> {
    let Some(first) = traces.first() else {
        return Ok(Vec::new());
    };
    let len = first.as_ref().len();
    if let Some(bad) = traces.iter().find(|t| t.as_ref().len() != len) {
        return Err(HarnessError::Mismatch(format!("{} vs {len}", bad.as_ref().len())));
    }
    let mut acc = vec![0.0; len];
    for t in traces {
        for (a, &x) in acc.iter_mut().zip(t.as_ref()) {
            *a += x;
        }
    }
    let n = traces.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

fn truth_for(cfg: &ExperimentConfig, seed: u64, event: u64, s: usize) -> Result<GroundTruth<f64>, dgreedy_core::Error> {
    let base = if cfg.fixed_truth { cfg.master_seed } else { seed };
    GroundTruth::generate(cfg.m, s, &mut derived_rng(base, Role::Truth, &[event]))
}

fn settled_at(exact: impl DoubleEndedIterator<Item = bool> + ExactSizeIterator, first_index: usize) -> Option<usize> {
    let len = exact.len();
    let trailing = exact.rev().take_while(|&e| e).count();
    (trailing > 0).then(|| first_index + len - trailing)
}

struct Shared {
    w: CombinationMatrix<f64>,
}

fn run_dihat_once(cfg: &ExperimentConfig, shared: &Shared, index: usize, seed: u64) -> Result<RunOutcome, dgreedy_core::Error> {
    let truth = truth_for(cfg, seed, 0, cfg.s_true)?;
    let data = gen_batch_data(&truth, cfg.n_nodes, cfg.l, cfg.snr_db, seed)?;
    let dcfg = cfg.dihat_config().map_err(|e| dgreedy_core::Error::Config(e.to_string()))?;
    let run = run_dihat(&data, &truth, &shared.w, &shared.w, &dcfg)?;
    Ok(RunOutcome {
        index,
        seed,
        msd: run.msd(),
        support_overlap: None,
        support_settled_at: settled_at(run.trace.iter().map(|r| r.support_recovered.iter().all(|&b| b)), 0),
        final_estimates: run.estimates.into_iter().map(|h| h.into_vec()).collect(),
        final_truth: truth.h_star.into_vec(),
    })
}

fn run_greedi_once(cfg: &ExperimentConfig, shared: &Shared, index: usize, seed: u64) -> Result<RunOutcome, dgreedy_core::Error> {
    let mut schedule = Schedule::constant(truth_for(cfg, seed, 0, cfg.s_true)?);
    if let (Some(at), Some(s_after)) = (cfg.switch_at, cfg.s_true_after) {
        schedule = schedule.then_from(at, truth_for(cfg, seed, 1, s_after)?)?;
    }
    let mut streams = gen_online_streams(schedule, cfg.n_nodes, cfg.noise_model(), seed)?;
    let gcfg = cfg.greedi_config();
    let run = match cfg.greedi_variant() {
        Ok(GreediVariant::Centralized) => run_greedi_centralized(&mut streams, &gcfg, cfg.horizon)?,
        _ => run_greedi(&mut streams, &shared.w, &shared.w, &gcfg, cfg.horizon)?,
    };
    let trace: &[GreediRecord] = &run.trace;
    Ok(RunOutcome {
        index,
        seed,
        msd: run.msd(),
        support_overlap: Some(trace.iter().map(|r| r.support_overlap).collect()),
        support_settled_at: settled_at(trace.iter().map(|r| r.supports_exact), 1),
        final_estimates: run.estimates.into_iter().map(|h| h.into_vec()).collect(),
        final_truth: streams.current_truth().h_star.clone().into_vec(),
    })
}

/// Runs one Monte-Carlo replicate.
pub fn run_single(cfg: &ExperimentConfig, index: usize) -> Result<RunOutcome, HarnessError> {
    let shared = prepare(cfg)?;
    run_indexed(cfg, &shared, index)
}

fn prepare(cfg: &ExperimentConfig) -> Result<Shared, HarnessError> {
    cfg.validate()?;
    let topology = cfg.build_topology()?;
    Ok(Shared {
        w: CombinationMatrix::from_rule(&topology, cfg.weights),
    })
}

fn run_indexed(cfg: &ExperimentConfig, shared: &Shared, index: usize) -> Result<RunOutcome, HarnessError> {
    let seed = run_seed(cfg.master_seed, index);
    let outcome = match cfg.algorithm {
        Algorithm::Dihat => run_dihat_once(cfg, shared, index, seed),
        Algorithm::Greedi => run_greedi_once(cfg, shared, index, seed),
    };
    outcome.map_err(|source| HarnessError::Run { index, seed, source })
}

/// Runs all replicates, in parallel, and keeps every per-run outcome.
pub fn run_experiment_detailed(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    let shared = prepare(cfg)?;
    let results: Vec<_> = (0..cfg.mc_runs)
        .into_par_iter()
        .map(|index| run_indexed(cfg, &shared, index))
        .collect();
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let msd = average_traces(&runs.iter().map(|r| r.msd.as_slice()).collect::<Vec<_>>())?;
    let support_overlap = runs
        .iter()
        .map(|r| r.support_overlap.as_deref())
        .collect::<Option<Vec<_>>>()
        .map(|t| average_traces(&t))
        .transpose()?;
    let trace = MsdTrace {
        name: cfg.name.clone(),
        variant: cfg.variant.clone(),
        config_hash: cfg.hash(),
        master_seed: cfg.master_seed,
        version: VERSION.into(),
        rng: RNG_ALGORITHM.into(),
        first_index: cfg.first_index(),
        msd,
        support_overlap,
        run_seeds: runs.iter().map(|r| r.seed).collect(),
    };
    Ok(ExperimentResult { trace, runs })
}

/// Runs all replicates and returns the averaged trace.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MsdTrace, HarnessError> {
    run_experiment_detailed(cfg).map(|r| r.trace)
}

/// Aligned traces of several configurations over the same scenario seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub traces: Vec<MsdTrace>,
    pub final_means: Vec<f64>,
}

impl Comparison {
    pub fn labels(&self) -> Vec<String> {
        self.traces.iter().map(|t| t.variant.clone()).collect()
    }

    pub fn final_mean(&self, variant: &str) -> Option<f64> {
        self.traces.iter().position(|t| t.variant == variant).map(|i| self.final_means[i])
    }

    pub fn trace(&self, variant: &str) -> Option<&MsdTrace> {
        self.traces.iter().find(|t| t.variant == variant)
    }
}

pub fn compare_variants(cfgs: &[ExperimentConfig]) -> Result<Comparison, HarnessError> {
    let Some(first) = cfgs.first() else {
        return Err(HarnessError::Config("nothing to compare".into()));
    };
    for cfg in cfgs {
        if cfg.master_seed != first.master_seed {
            return Err(HarnessError::Config(format!(
                "{} uses seed {} but {} uses {}",
                cfg.name, cfg.master_seed, first.name, first.master_seed
            )));
        }
        if cfg.trace_len() != first.trace_len() || cfg.first_index() != first.first_index() {
            return Err(HarnessError::Mismatch(format!(
                "{} has {} points, {} has {}",
                cfg.name,
                cfg.trace_len(),
                first.name,
                first.trace_len()
            )));
        }
    }
    let traces = cfgs.iter().map(run_experiment).collect::<Result<Vec<_>, _>>()?;
    let final_means = traces.iter().map(MsdTrace::final_window_mean).collect();
    Ok(Comparison { traces, final_means })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn final_window_examples() {
        assert_eq!(final_window_mean(&[5.0]), 5.0);
        let t: Vec<f64> = (0..20).map(f64::from).collect();
        assert_eq!(final_window_mean(&t), 18.5);
        let t: Vec<f64> = (0..51).map(f64::from).collect();
        assert_eq!(final_window_mean(&t), 47.5);
    }

    #[test]
    fn average_rejects_ragged_input() {
        assert!(matches!(average_traces(&[vec![1.0], vec![1.0, 2.0]]), Err(HarnessError::Mismatch(_))));
        assert_eq!(average_traces(&[vec![1.0, 4.0], vec![3.0, 0.0]]).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn settled_index() {
        assert_eq!(settled_at([false, true, true].into_iter(), 1), Some(2));
        assert_eq!(settled_at([true, false, true].into_iter(), 0), Some(2));
        assert_eq!(settled_at([true, true].into_iter(), 0), Some(0));
        assert_eq!(settled_at([true, false].into_iter(), 0), None);
    }

    #[test]
    fn window_mean_uses_trace_indices() {
        let t = MsdTrace {
            name: String::new(),
            variant: String::new(),
            config_hash: String::new(),
            master_seed: 0,
            version: String::new(),
            rng: String::new(),
            first_index: 1,
            msd: vec![4.0, 3.0, 2.0, 1.0],
            support_overlap: None,
            run_seeds: vec![],
        };
        assert_eq!(t.window_mean(2, 3), 2.5);
        assert_eq!(t.first_reach(2.5), Some(3));
        assert_eq!(t.first_reach(0.5), None);
    }
}
