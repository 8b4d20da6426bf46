//! Built-in experiment configurations.

use crate::config::{Algorithm, ExperimentConfig, NoiseKind};

/// Name and one-line description of every preset.
pub const PRESETS: &[(&str, &str)] = &[
    ("exp1", "DiHaT, N=20, m=70, l=55, s=10, 20 dB"),
    ("exp2", "DiHaT, as exp1 with s=20"),
    ("exp5", "DiHaT, as exp1 with l=15"),
    ("exp6", "GreeDi-LMS, N=10, m=100, s=10, stationary, zeta=1"),
    ("exp7", "GreeDi-LMS tracking, zeta=0.99, 10 -> 15 nonzeros at n=1451"),
    ("exp8-light", "GreeDi-LMS light proxy, exp6 scenario"),
    ("exp8-full", "GreeDi-LMS full proxy, exp6 scenario"),
    ("exp8-centralized", "GreeDi-LMS fusion-center reference, exp6 scenario"),
];

/// LMS step of the online presets.
pub const ONLINE_MU: f64 = 0.02;

fn batch(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        algorithm: Algorithm::Dihat,
        variant: "full".into(),
        mc_runs: 100,
        n_nodes: 20,
        m: 70,
        s_true: 10,
        s: 10,
        l: 55,
        snr_db: 20.0,
        iterations: 50,
        output_dir: format!("out/{name}").into(),
        ..ExperimentConfig::default()
    }
}

fn online(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        algorithm: Algorithm::Greedi,
        variant: "full".into(),
        mc_runs: 100,
        n_nodes: 10,
        m: 100,
        s_true: 10,
        s: 10,
        horizon: 10_000,
        noise: NoiseKind::Heterogeneous,
        mu: Some(ONLINE_MU),
        zeta: 1.0,
        output_dir: format!("out/{name}").into(),
        ..ExperimentConfig::default()
    }
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let cfg = match name {
        "exp1" => batch(name),
        "exp2" => ExperimentConfig {
            s_true: 20,
            s: 20,
            ..batch(name)
        },
        "exp5" => ExperimentConfig { l: 15, ..batch(name) },
        "exp6" => online(name),
        "exp7" => ExperimentConfig {
            s: 15,
            zeta: 0.99,
            horizon: 3000,
            switch_at: Some(1451),
            s_true_after: Some(15),
            ..online(name)
        },
        "exp8-light" | "exp8-full" | "exp8-centralized" => ExperimentConfig {
            name: "exp8".into(),
            variant: name.trim_start_matches("exp8-").into(),
            horizon: 3000,
            output_dir: "out/exp8".into(),
            ..online(name)
        },
        _ => return None,
    };
    Some(cfg)
}

/// Variants overlaid by `compare` for a preset's algorithm.
pub fn default_variants(cfg: &ExperimentConfig) -> &'static [&'static str] {
    match cfg.algorithm {
        Algorithm::Dihat => &["full", "estimate_only", "non_cooperative"],
        Algorithm::Greedi => &["full", "light", "centralized"],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_preset_is_valid() {
        for (name, _) in PRESETS {
            let cfg = preset(name).unwrap_or_else(|| panic!("{name}"));
            cfg.validate().unwrap();
        }
        assert!(preset("exp3").is_none());
    }

    #[test]
    fn exp8_presets_share_scenario() {
        let a = preset("exp8-light").unwrap();
        let b = preset("exp8-centralized").unwrap();
        assert_eq!(a.with_variant("full"), b.with_variant("full"));
    }
}
