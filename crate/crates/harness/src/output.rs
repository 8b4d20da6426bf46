//! CSV, metadata and plot-script emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::experiment::MsdTrace;

/// `10 log10(msd)`, with an exact zero written as `-inf`.
pub fn format_db(msd: f64) -> String {
    if msd == 0.0 {
        "-inf".into()
    } else {
        format!("{}", 10.0 * msd.log10())
    }
}

/// Rows `iter,msd,msd_db[,support_overlap]`.
pub fn trace_csv(trace: &MsdTrace) -> String {
    let mut out = String::from("iter,msd,msd_db");
    if trace.support_overlap.is_some() {
        out.push_str(",support_overlap");
    }
    out.push('\n');
    for (i, &msd) in trace.msd.iter().enumerate() {
        write!(out, "{},{},{}", i + trace.first_index, msd, format_db(msd)).unwrap();
        if let Some(ov) = &trace.support_overlap {
            write!(out, ",{}", ov[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn trace_file_name(trace: &MsdTrace) -> String {
    format!("{}_{}.csv", trace.name, trace.variant)
}

#[derive(Serialize)]
struct TraceMeta<'a> {
    variant: &'a str,
    file: String,
    config_hash: &'a str,
    final_window_mean: f64,
    /// Hex, since TOML integers are signed.
    run_seeds: Vec<String>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    version: &'a str,
    rng: &'a str,
    master_seed: u64,
    traces: Vec<TraceMeta<'a>>,
    config: &'a ExperimentConfig,
}

fn write_file(path: PathBuf, contents: &str) -> Result<PathBuf, HarnessError> {
    fs::write(&path, contents).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Writes one CSV per trace, `metadata.toml` and `plot.py` into `dir`.
pub fn emit_outputs(traces: &[MsdTrace], cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for t in traces {
        written.push(write_file(dir.join(trace_file_name(t)), &trace_csv(t))?);
    }
    let meta = Metadata {
        version: traces.first().map_or(crate::experiment::VERSION, |t| &t.version),
        rng: dgreedy_core::scenario::RNG_ALGORITHM,
        master_seed: cfg.master_seed,
        traces: traces
            .iter()
            .map(|t| TraceMeta {
                variant: &t.variant,
                file: trace_file_name(t),
                config_hash: &t.config_hash,
                final_window_mean: t.final_window_mean(),
                run_seeds: t.run_seeds.iter().map(|s| format!("{s:016x}")).collect(),
            })
            .collect(),
        config: cfg,
    };
    let text = toml::to_string(&meta).map_err(|e| HarnessError::Config(e.to_string()))?;
    written.push(write_file(dir.join("metadata.toml"), &text)?);
    written.push(write_file(dir.join("plot.py"), &plot_script(traces, &cfg.name))?);
    Ok(written)
}

/// A matplotlib script that overlays the traces in dB.
pub fn plot_script(traces: &[MsdTrace], title: &str) -> String {
    let files: Vec<String> = traces
        .iter()
        .map(|t| format!("    ({:?}, {:?}),", t.variant, trace_file_name(t)))
        .collect();
    format!(
        r#"#!/usr/bin/env python3
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
TRACES = [
{files}
]

fig, ax = plt.subplots(figsize=(7, 4.5))
for label, name in TRACES:
    with open(os.path.join(HERE, name)) as fh:
        rows = list(csv.DictReader(fh))
    x = [int(r["iter"]) for r in rows]
    y = [float(r["msd_db"]) for r in rows]
    ax.plot(x, y, label=label)
ax.set_xlabel("iteration")
ax.set_ylabel("MSD (dB)")
ax.set_title({title:?})
ax.grid(True, alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(HERE, "msd.png"), dpi=150)
"#,
        files = files.join("\n"),
        title = title
    )
}
