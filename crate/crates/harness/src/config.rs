//! Flat TOML experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dgreedy_core::dihat::{DihatConfig, DihatVariant, ProxyStep};
use dgreedy_core::greedi::{GreediConfig, ProxyMode, StepSchedule, DEFAULT_THRESHOLD_D};
use dgreedy_core::network::{Topology, WeightRule};
use dgreedy_core::scenario::{derived_rng, NoiseModel, Role};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Dihat,
    Greedi,
}

/// GreeDi-LMS flavours selectable by `variant`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreediVariant {
    Full,
    Light,
    Centralized,
}

impl FromStr for GreediVariant {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "full" => Ok(Self::Full),
            "light" => Ok(Self::Light),
            "centralized" => Ok(Self::Centralized),
            other => Err(HarnessError::Config(format!("unknown GreeDi variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    /// Seeded random geometric graph in the unit square.
    Geometric,
    Ring,
    Path,
    Complete,
    Star,
    /// `u v` pairs read from `edge_list`.
    EdgeList,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `σ_k² = 0.01 η_k`, `η_k ~ U[0.5, 1]`.
    Heterogeneous,
    Noiseless,
    /// `σ_k² = noise_var` at every node.
    Fixed,
}

/// One Monte-Carlo experiment. Every key is top-level; omitted keys take the
/// defaults of [`ExperimentConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub algorithm: Algorithm,
    /// DiHaT: `full`, `estimate_only`, `non_cooperative`.
    /// GreeDi-LMS: `full`, `light`, `centralized`.
    pub variant: String,
    pub mc_runs: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,

    pub n_nodes: usize,
    pub m: usize,
    /// Nonzeros of the ground truth.
    pub s_true: usize,
    /// Sparsity level given to the algorithm.
    pub s: usize,
    /// Draw one ground truth for all runs instead of one per run.
    pub fixed_truth: bool,

    pub topology: TopologyKind,
    /// Geometric graphs only; defaults to `sqrt(2 ln N / N)`.
    pub radius: Option<f64>,
    pub edge_list: Option<PathBuf>,
    pub weights: WeightRule,

    // batch
    pub l: usize,
    /// `inf` for noiseless measurements.
    pub snr_db: f64,
    pub iterations: usize,
    pub proxy_step: ProxyStep,

    // online
    pub horizon: usize,
    pub noise: NoiseKind,
    pub noise_var: f64,
    /// Per-node LMS step; defaults to `1/(s + 2)`.
    pub mu: Option<f64>,
    pub zeta: f64,
    pub threshold_d: f64,
    /// Fixed proxy step; the adaptive schedule is used when absent.
    pub mu_tilde: Option<f64>,
    /// Time of an abrupt change of the ground truth.
    pub switch_at: Option<usize>,
    /// Nonzeros of the ground truth after the change.
    pub s_true_after: Option<usize>,
    pub diagnostics: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            algorithm: Algorithm::Dihat,
            variant: "full".into(),
            mc_runs: 100,
            master_seed: 1,
            output_dir: PathBuf::from("out"),
            n_nodes: 20,
            m: 70,
            s_true: 10,
            s: 10,
            fixed_truth: false,
            topology: TopologyKind::Geometric,
            radius: None,
            edge_list: None,
            weights: WeightRule::Metropolis,
            l: 55,
            snr_db: 20.0,
            iterations: 50,
            proxy_step: ProxyStep::Unit,
            horizon: 10_000,
            noise: NoiseKind::Heterogeneous,
            noise_var: 0.01,
            mu: None,
            zeta: 1.0,
            threshold_d: DEFAULT_THRESHOLD_D,
            mu_tilde: None,
            switch_at: None,
            s_true_after: None,
            diagnostics: false,
        }
    }
}

/// Radius at which a random geometric graph on `n` points is connected with
/// high probability.
pub fn connectivity_radius(n: usize) -> f64 {
    let n = n.max(2) as f64;
    (2.0 * n.ln() / n).sqrt()
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical TOML form without `output_dir`, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = Self {
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        Sha256::digest(canonical.to_toml_string().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.mc_runs < 1 {
            return bad("mc_runs must be ≥ 1".into());
        }
        if i64::try_from(self.master_seed).is_err() {
            return bad("master_seed must be below 2^63".into());
        }
        if self.n_nodes < 1 || self.m < 1 {
            return bad("n_nodes and m must be ≥ 1".into());
        }
        for (key, s) in [("s_true", self.s_true), ("s", self.s)] {
            if s < 1 || s > self.m {
                return bad(format!("{key} = {s} must lie in [1, m = {}]", self.m));
            }
        }
        if self.topology == TopologyKind::EdgeList && self.edge_list.is_none() {
            return bad("topology = \"edge_list\" needs edge_list".into());
        }
        if matches!(self.radius, Some(r) if r.is_nan() || r <= 0.0) {
            return bad("radius must be > 0".into());
        }
        match self.algorithm {
            Algorithm::Dihat => {
                self.dihat_variant()?;
                if self.l < 1 || self.iterations < 1 {
                    return bad("l and iterations must be ≥ 1".into());
                }
                if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
                    return bad(format!("snr_db = {} is not a usable SNR", self.snr_db));
                }
            }
            Algorithm::Greedi => {
                self.greedi_variant()?;
                if self.horizon < 1 {
                    return bad("horizon must be ≥ 1".into());
                }
                if self.noise == NoiseKind::Fixed && !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
                    return bad("noise_var must be finite and ≥ 0".into());
                }
                match (self.switch_at, self.s_true_after) {
                    (Some(t), Some(s)) => {
                        if t < 2 || t > self.horizon {
                            return bad(format!("switch_at = {t} must lie in [2, horizon]"));
                        }
                        if s < 1 || s > self.m {
                            return bad(format!("s_true_after = {s} must lie in [1, m]"));
                        }
                    }
                    (None, None) => {}
                    _ => return bad("switch_at and s_true_after go together".into()),
                }
                self.greedi_config()
                    .validate(self.n_nodes, self.m)
                    .map_err(|e| HarnessError::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn dihat_variant(&self) -> Result<DihatVariant, HarnessError> {
        self.variant.parse().map_err(|e: dgreedy_core::Error| HarnessError::Config(e.to_string()))
    }

    pub fn greedi_variant(&self) -> Result<GreediVariant, HarnessError> {
        self.variant.parse()
    }

    pub fn dihat_config(&self) -> Result<DihatConfig, HarnessError> {
        let mut cfg = DihatConfig::new(self.s);
        cfg.variant = self.dihat_variant()?;
        cfg.max_iters = self.iterations;
        cfg.rel_change_tol = 0.0;
        cfg.proxy_step = self.proxy_step;
        Ok(cfg)
    }

    pub fn greedi_config(&self) -> GreediConfig {
        let mu = self.mu.unwrap_or_else(|| GreediConfig::default_mu(self.s, 1.0));
        let mut cfg = GreediConfig::new(self.s, mu, self.n_nodes);
        cfg.zeta = self.zeta;
        cfg.threshold_d = self.threshold_d;
        cfg.step_schedule = match self.mu_tilde {
            Some(mu_tilde) => StepSchedule::Fixed { mu_tilde },
            None => StepSchedule::Adaptive,
        };
        cfg.proxy_mode = match self.greedi_variant() {
            Ok(GreediVariant::Light) => ProxyMode::Light,
            _ => ProxyMode::Full,
        };
        cfg.diagnostics = self.diagnostics;
        cfg
    }

    pub fn noise_model(&self) -> NoiseModel {
        match self.noise {
            NoiseKind::Heterogeneous => NoiseModel::HETEROGENEOUS,
            NoiseKind::Noiseless => NoiseModel::Noiseless,
            NoiseKind::Fixed => NoiseModel::Fixed {
                variance: self.noise_var,
            },
        }
    }

    /// The network, fixed by the master seed.
    pub fn build_topology(&self) -> Result<Topology, HarnessError> {
        let n = self.n_nodes;
        let t = match self.topology {
            TopologyKind::Geometric => {
                let radius = self.radius.unwrap_or_else(|| connectivity_radius(n));
                Topology::random_geometric(n, radius, &mut derived_rng(self.master_seed, Role::Topology, &[]))
            }
            TopologyKind::Ring => Topology::ring(n),
            TopologyKind::Path => Topology::path(n),
            TopologyKind::Complete => Topology::complete(n),
            TopologyKind::Star => Topology::star(n),
            TopologyKind::EdgeList => {
                let path = self.edge_list.as_deref().expect("validated");
                Topology::load_edge_list(path, Some(n))
            }
        };
        t.map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Length of every trace this configuration produces.
    pub fn trace_len(&self) -> usize {
        match self.algorithm {
            Algorithm::Dihat => self.iterations + 1,
            Algorithm::Greedi => self.horizon,
        }
    }

    /// Index of the first trace entry.
    pub fn first_index(&self) -> usize {
        match self.algorithm {
            Algorithm::Dihat => 0,
            Algorithm::Greedi => 1,
        }
    }

    pub fn with_variant(&self, variant: &str) -> Self {
        let mut cfg = self.clone();
        cfg.variant = variant.to_string();
        cfg
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({:?}/{}, N={}, m={}, s={}, {} runs, seed {})",
            self.name, self.algorithm, self.variant, self.n_nodes, self.m, self.s, self.mc_runs, self.master_seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn infinite_snr_parses_and_roundtrips() {
        let cfg = ExperimentConfig::from_toml_str("snr_db = inf\nl = 30").unwrap();
        assert!(cfg.snr_db.is_infinite());
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "mc_runs = 0",
            "s = 71",
            "variant = \"light\"",
            "algorithm = \"greedi\"\nvariant = \"estimate_only\"",
            "algorithm = \"greedi\"\nzeta = 1.5",
            "algorithm = \"greedi\"\nswitch_at = 100",
            "topology = \"edge_list\"",
            "unknown_key = 3",
        ] {
            assert!(matches!(ExperimentConfig::from_toml_str(text), Err(HarnessError::Config(_))), "{text}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.master_seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn connectivity_radius_values() {
        assert!((connectivity_radius(20) - 0.5473).abs() < 1e-4);
        assert!((connectivity_radius(10) - 0.6786).abs() < 1e-4);
    }
}
