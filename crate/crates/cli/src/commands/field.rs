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

//! Dipolar hyperfine field on a probe sub-grid.

use std::path::PathBuf;

use hfcalc_core::dipole::{dipole_isolated_fft, FftOptions};
use hfcalc_core::hyperfine::SpinSystem;
use hfcalc_core::volgrid::write_volumetric;
use hfcalc_core::{Error as CoreError, VolumetricGrid};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, CoreContext};
use crate::manifest::Recorder;
use crate::pipeline;

pub const COMPONENTS: [&str; 6] = ["xx", "yy", "zz", "xy", "xz", "yz"];

#[derive(Serialize)]
struct Sidecar {
    backend: &'static str,
    species: String,
    unit: &'static str,
    prefactor: f64,
    resolution_a: f64,
    source_dims: [usize; 3],
    stride: [usize; 3],
    dims: [usize; 3],
    spacing_a: [f64; 3],
    files: Vec<String>,
}

/// Largest stride per axis whose spacing does not exceed `resolution`.
pub fn probe_stride(grid: &VolumetricGrid, resolution: f64) -> Result<[usize; 3], CoreError> {
    let dims = grid.dims();
    let mut stride = [1; 3];
    for k in 0..3 {
        let h = grid.spacing(k);
        if !(resolution >= h * (1.0 - 1e-9)) {
            return Err(CoreError::BadResolution(format!(
                "{resolution} Å is finer than the source grid spacing {h:.6} Å along axis {k}"
            )));
        }
        stride[k] = (1..=dims[k]).rev().find(|&d| dims[k] % d == 0 && d as f64 * h <= resolution * (1.0 + 1e-9)).unwrap_or(1);
    }
    Ok(stride)
}

/// Writes `field_<c>.vasp` for the six components plus `field.json`; returns the sidecar path.
pub fn run(cfg: &RunConfig) -> CliResult<PathBuf> {
    cfg.check_inputs(true)?;
    let resolution = cfg.field_resolution.ok_or_else(|| CliError::config("field.resolution is required"))?;
    let mut rec = Recorder::new("field", cfg.threads, cfg.settings.clone());
    let (density, grid, roster) = pipeline::load_density(cfg)?;
    rec.input(&density)?;
    let constants = pipeline::load_constants(cfg)?;
    if let Some(p) = &cfg.constants {
        rec.input(p)?;
    }
    let species = constants.species(&cfg.field_species).ctx("field.species")?;
    let spin = SpinSystem::new(cfg.spin, cfg.axis).ctx("spin system")?;
    let prefactor = constants.dipolar_prefactor(&spin, species) * cfg.unit.factor();
    let stride = probe_stride(&grid, resolution).ctx("field.resolution")?;
    rec.phase("load");

    let opts = FftOptions { species: Some(cfg.field_species.clone()), memory_limit: cfg.memory_limit };
    let field = dipole_isolated_fft(&grid, stride, &cfg.exclusion, &opts).ctx("dipolar field")?;
    rec.phase("fft");

    let mut files = Vec::new();
    for (c, name) in COMPONENTS.iter().enumerate() {
        let mut g = field.component_grid(c);
        g.values_mut().iter_mut().for_each(|v| *v *= prefactor);
        let file = format!("field_{name}.vasp");
        let path = cfg.output_dir.join(&file);
        write_volumetric(&g, &roster, pipeline::create(&path)?).ctx(path.display())?;
        rec.output(&path)?;
        files.push(file);
    }
    let sidecar = Sidecar {
        backend: "isolated_fft",
        species: cfg.field_species.clone(),
        unit: cfg.unit.name(),
        prefactor,
        resolution_a: resolution,
        source_dims: grid.dims(),
        stride,
        dims: field.dims,
        spacing_a: std::array::from_fn(|k| grid.spacing(k) * stride[k] as f64),
        files,
    };
    let path = cfg.output_dir.join("field.json");
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    rec.output(&path)?;
    rec.phase("write");
    rec.finish(&cfg.output_dir)?;
    Ok(path)
}
