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

//! Per-site hyperfine tensors.

use std::path::PathBuf;

use hfcalc_core::table::write_tensor_table;

use crate::config::RunConfig;
use crate::error::{CliResult, CoreContext};
use crate::manifest::Recorder;
use crate::pipeline::{self, TENSOR_TABLE};

/// Writes the tensor table and manifest; returns the table path.
pub fn run(cfg: &RunConfig) -> CliResult<PathBuf> {
    cfg.check_inputs(true)?;
    let mut rec = Recorder::new("compute", cfg.threads, cfg.settings.clone());
    let (density, grid, roster) = pipeline::load_density(cfg)?;
    rec.input(&density)?;
    if let Some(rel) = grid.spin_mismatch(cfg.spin, 0.01) {
        rec.warn(format!("density integral is {:.2}% away from 2S", rel * 100.0));
    }
    let constants = pipeline::load_constants(cfg)?;
    if let Some(p) = &cfg.constants {
        rec.input(p)?;
    }
    rec.phase("load");

    let (set, roster_len) = pipeline::build_sites(cfg, &grid, &roster)?;
    rec.warnings(set.warnings.iter().map(|w| format!("{w:?}")));
    log::info!("{} sites ({} in cell)", set.len(), set.in_cell().count());
    let contact = pipeline::load_contact(cfg, roster_len)?;
    if let Some(p) = &cfg.contact {
        rec.input(p)?;
    }
    rec.warnings(contact.warnings.iter().cloned());
    rec.phase("sites");

    let tensors = pipeline::site_tensors(cfg, &grid, &set)?;
    rec.phase("dipolar");

    let rows = pipeline::assemble_rows(cfg, &set, &tensors, &contact, &constants)?;
    let out = cfg.output_dir.join(TENSOR_TABLE);
    let meta = pipeline::table_metadata(cfg, &set, &constants);
    write_tensor_table(&rows, &meta, pipeline::create(&out)?).ctx(out.display())?;
    rec.output(&out)?;
    rec.phase("write");
    rec.finish(&cfg.output_dir)?;
    Ok(out)
}
