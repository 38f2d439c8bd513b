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

//! Format conversion and site listings.

use std::path::{Path, PathBuf};

use hfcalc_core::table::write_site_table;
use hfcalc_core::volgrid::{parse_volumetric, write_volumetric, DensityBlock};

use crate::config::RunConfig;
use crate::error::{CliResult, CoreContext};
use crate::manifest::Recorder;
use crate::pipeline;

/// Extracts one density block of `input` into a single-block file.
pub fn run_block(input: &Path, block: DensityBlock, output: &Path, threads: usize) -> CliResult<PathBuf> {
    let mut rec = Recorder::new("convert", threads, Default::default());
    rec.input(input)?;
    let (grid, roster) = parse_volumetric(pipeline::open(input)?, block).ctx(input.display())?;
    write_volumetric(&grid, &roster, pipeline::create(output)?).ctx(output.display())?;
    rec.output(output)?;
    rec.phase("convert");
    rec.finish(output.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new(".")))?;
    Ok(output.to_path_buf())
}

/// Writes the site set of the configured defect as CSV.
pub fn run_sites(cfg: &RunConfig, output: &Path) -> CliResult<PathBuf> {
    cfg.check_inputs(true)?;
    let mut rec = Recorder::new("convert", cfg.threads, cfg.settings.clone());
    let (density, grid, roster) = pipeline::load_density(cfg)?;
    rec.input(&density)?;
    let (set, _) = pipeline::build_sites(cfg, &grid, &roster)?;
    rec.warnings(set.warnings.iter().map(|w| format!("{w:?}")));
    let constants = pipeline::load_constants(cfg)?;
    let meta = pipeline::table_metadata(cfg, &set, &constants);
    write_site_table(&set, &meta, pipeline::create(output)?).ctx(output.display())?;
    rec.output(output)?;
    rec.phase("sites");
    rec.finish(output.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new(".")))?;
    Ok(output.to_path_buf())
}
