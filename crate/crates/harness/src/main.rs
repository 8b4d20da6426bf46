use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dgreedy::config::ExperimentConfig;
use dgreedy::error::HarnessError;
use dgreedy::experiment::{compare_variants, run_experiment};
use dgreedy::output::emit_outputs;
use dgreedy::presets::{default_variants, preset, PRESETS};
use dgreedy::verify::{verify_theory, TheoryScenario};
use dgreedy_core::network::Topology;

#[derive(Parser)]
#[command(name = "dgreedy", version, about = "Distributed greedy sparse estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its averaged trace.
    Run(ExperimentArgs),
    /// Run several variants of one scenario and tabulate their final MSD.
    Compare(ExperimentArgs),
    /// Check the theoretical conditions on a small instance.
    Verify(VerifyArgs),
    /// List the built-in configurations.
    Presets,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration name.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mc_runs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Algorithm variant; `compare` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    variant: Vec<String>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    nodes: usize,
    #[arg(long, default_value_t = 16)]
    m: usize,
    #[arg(long, default_value_t = 15)]
    l: usize,
    #[arg(long, default_value_t = 1)]
    s: usize,
    /// Network as `u v` lines instead of a ring.
    #[arg(long)]
    edge_list: Option<PathBuf>,
    /// Also write the report to this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn base_config(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => preset(name).ok_or_else(|| HarnessError::Config(format!("unknown preset {name:?}")))?,
            (None, None) => return Err(HarnessError::Config("give --config or --preset".into())),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(runs) = self.mc_runs {
            cfg.mc_runs = runs;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

fn run(args: ExperimentArgs) -> Result<(), HarnessError> {
    let mut cfg = args.base_config()?;
    match args.variant.as_slice() {
        [] => {}
        [v] => cfg.variant = v.clone(),
        _ => return Err(HarnessError::Config("run takes a single --variant".into())),
    }
    cfg.validate()?;
    eprintln!("running {cfg}");
    let trace = run_experiment(&cfg)?;
    let files = emit_outputs(std::slice::from_ref(&trace), &cfg, &cfg.output_dir)?;
    println!("final-window MSD {:.6e} ({:.2} dB)", trace.final_window_mean(), 10.0 * trace.final_window_mean().log10());
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn compare(args: ExperimentArgs) -> Result<(), HarnessError> {
    let cfg = args.base_config()?;
    let variants: Vec<String> = if args.variant.is_empty() {
        default_variants(&cfg).iter().map(|v| v.to_string()).collect()
    } else {
        args.variant.clone()
    };
    let cfgs: Vec<_> = variants.iter().map(|v| cfg.with_variant(v)).collect();
    for c in &cfgs {
        c.validate()?;
    }
    eprintln!("comparing {} on {cfg}", variants.join(", "));
    let cmp = compare_variants(&cfgs)?;
    println!("{:<18} {:>14} {:>10}", "variant", "final MSD", "dB");
    for (t, &fm) in cmp.traces.iter().zip(&cmp.final_means) {
        println!("{:<18} {:>14.6e} {:>10.2}", t.variant, fm, 10.0 * fm.log10());
    }
    let files = emit_outputs(&cmp.traces, &cfg, &cfg.output_dir)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), HarnessError> {
    let topology = match &args.edge_list {
        Some(path) => Some(Topology::load_edge_list(path, Some(args.nodes)).map_err(|e| HarnessError::Config(e.to_string()))?),
        None => None,
    };
    let sc = TheoryScenario {
        seed: args.seed,
        n_nodes: args.nodes,
        m: args.m,
        l: args.l,
        s: args.s,
        topology,
        ..TheoryScenario::default()
    };
    if sc.m > 20 {
        return Err(HarnessError::Config("verify enumerates supports; keep m ≤ 20".into()));
    }
    let report = verify_theory(&sc)?;
    print!("{report}");
    if let Some(dir) = args.out {
        std::fs::create_dir_all(&dir).map_err(|source| HarnessError::Io { path: dir.clone(), source })?;
        let path = dir.join("verify.txt");
        std::fs::write(&path, report.to_string()).map_err(|source| HarnessError::Io { path, source })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Compare(args) => compare(args),
        Command::Verify(args) => verify(args),
        Command::Presets => {
            for (name, about) in PRESETS {
                println!("{name:<18} {about}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
