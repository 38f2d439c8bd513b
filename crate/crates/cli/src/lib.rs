// Copyright 2026 The hfcalc authors
//
// Licensed under the Apache license, version 2.0 (the "license");
// you may not use this file except in compliance with the license.
// You may obtain a copy of the license at
//
//     http://www.apache.org/licenses/license-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the license is distributed on an "as is" basis,
// without warranties or conditions of any kind, either express or implied.
// See the license for the specific language governing permissions and
// limitations under the license.

//! Command-line pipeline for dipolar hyperfine tensors: compute, field, compare,
//! position, synth and convert.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hfcalc_core::volgrid::DensityBlock;
use toml::Value;

use crate::commands::synth::SynthSource;
use crate::config::{ConfigMap, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "hfcalc", version, about = "Dipolar hyperfine tensors from volumetric spin densities")]
pub struct Cli {
    /// Configuration file (TOML); defaults to $HFCALC_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for output files.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Volumetric spin-density file.
    #[arg(long)]
    pub density: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Tensor table from `compute`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Experimental data set as TAG=PATH with TAG one of I, II, III, user.
    #[arg(long = "dataset", value_name = "TAG=PATH")]
    pub datasets: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hyperfine tensors at every site within the cutoff sphere.
    Compute {
        #[command(flatten)]
        density: DensityArgs,
        /// Contact and one-center table.
        #[arg(long)]
        contact: Option<PathBuf>,
        /// Cutoff radius in Å.
        #[arg(long)]
        cutoff: Option<f64>,
        /// isolated_direct or periodic_recip.
        #[arg(long)]
        backend: Option<String>,
    },
    /// Six dipolar field components on a sub-grid of the density grid.
    Field {
        #[command(flatten)]
        density: DensityArgs,
        /// Probe spacing in Å; at least the source grid spacing.
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Error metrics of the tensor table against experimental data sets.
    Compare {
        #[command(flatten)]
        data: DatasetArgs,
    },
    /// Candidate lattice sites for each experimental record.
    Position {
        #[command(flatten)]
        data: DatasetArgs,
    },
    /// Writes a synthetic spin density.
    Synth {
        /// Recipe file (TOML).
        #[arg(long, conflicts_with = "nv_like", required_unless_present = "nv_like")]
        recipe: Option<PathBuf>,
        /// Built-in NV-like density in a diamond supercell.
        #[arg(long)]
        nv_like: bool,
        /// Diamond lattice constant in Å.
        #[arg(long, default_value_t = 3.567)]
        a: f64,
        /// Conventional cells per edge (even).
        #[arg(long, default_value_t = 2)]
        reps: usize,
        /// Grid points per edge.
        #[arg(long, default_value_t = 48)]
        dims: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Extracts a density block, or lists the site set with --sites.
    Convert {
        #[arg(long, required_unless_present = "sites")]
        input: Option<PathBuf>,
        /// spin, single or total.
        #[arg(long, default_value = "spin")]
        block: String,
        /// Write the site set of the configured defect instead.
        #[arg(long)]
        sites: bool,
        #[arg(long)]
        output: PathBuf,
    },
}

fn absolute(p: &Path) -> CliResult<String> {
    std::path::absolute(p)
        .map(|p| p.to_string_lossy().into_owned())
        .map_err(|e| CliError::config(format!("{}: {e}", p.display())))
}

impl Cli {
    /// Configuration after the file, `--set` overrides and command flags, in that order.
    pub fn config_map(&self) -> CliResult<ConfigMap> {
        let mut map = ConfigMap::load(self.config.as_deref())?;
        map.apply_overrides(&self.overrides)?;
        let mut path = |key: &str, p: &Option<PathBuf>| -> CliResult<()> {
            if let Some(p) = p {
                map.set(key, Value::String(absolute(p)?));
            }
            Ok(())
        };
        path("output_dir", &self.output_dir)?;
        match &self.command {
            Command::Compute { density, contact, .. } => {
                path("density", &density.density)?;
                path("contact", contact)?;
            }
            Command::Field { density, .. } => path("density", &density.density)?,
            Command::Compare { data } | Command::Position { data } => path("compare.table", &data.table)?,
            _ => {}
        }
        if let Some(n) = self.threads {
            map.set("threads", Value::Integer(n as i64));
        }
        match &self.command {
            Command::Compute { cutoff, backend, .. } => {
                if let Some(c) = cutoff {
                    map.set("cutoff", Value::Float(*c));
                }
                if let Some(b) = backend {
                    map.set("backend", Value::String(b.clone()));
                }
            }
            Command::Field { resolution: Some(r), .. } => map.set("field.resolution", Value::Float(*r)),
            Command::Compare { data } | Command::Position { data } => {
                for d in &data.datasets {
                    let (tag, p) = d
                        .split_once('=')
                        .ok_or_else(|| CliError::config(format!("--dataset {d:?} is not TAG=PATH")))?;
                    map.set(&format!("datasets.{tag}"), Value::String(absolute(Path::new(p))?));
                }
            }
            _ => {}
        }
        Ok(map)
    }
}

fn density_block(s: &str) -> CliResult<DensityBlock> {
    match s {
        "spin" => Ok(DensityBlock::Spin),
        "single" => Ok(DensityBlock::SingleBlockIsSpin),
        "total" => Ok(DensityBlock::Total),
        _ => Err(CliError::config(format!("block {s:?}: use spin, single or total"))),
    }
}

/// Runs the command on a worker pool sized by the configuration; returns the main output path.
pub fn execute(cli: &Cli) -> CliResult<PathBuf> {
    let cfg = RunConfig::from_map(&cli.config_map()?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    if !matches!(cli.command, Command::Synth { .. } | Command::Convert { .. }) {
        std::fs::create_dir_all(&cfg.output_dir)
            .map_err(|e| CliError::input(format!("{}: {e}", cfg.output_dir.display())))?;
    }
    pool.install(|| match &cli.command {
        Command::Compute { .. } => commands::compute::run(&cfg),
        Command::Field { .. } => commands::field::run(&cfg),
        Command::Compare { .. } => commands::compare::run(&cfg),
        Command::Position { .. } => commands::compare::run_position(&cfg),
        Command::Synth { recipe, a, reps, dims, output, .. } => {
            let source = match recipe {
                Some(p) => SynthSource::Recipe(p.clone()),
                None => SynthSource::NvLike { a: *a, reps: *reps, dims: *dims },
            };
            commands::synth::run(&source, output, cfg.threads)
        }
        Command::Convert { input: _, sites: true, output, .. } => commands::convert::run_sites(&cfg, output),
        Command::Convert { input, block, output, .. } => {
            let input = input.as_deref().expect("clap requires --input without --sites");
            commands::convert::run_block(input, density_block(block)?, output, cfg.threads)
        }
    })
}
