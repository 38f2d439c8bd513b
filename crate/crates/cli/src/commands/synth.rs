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

//! Synthetic spin densities.

use std::path::{Path, PathBuf};

use hfcalc_core::lattice::diamond_supercell;
use hfcalc_core::synth::{build_density, nv_like_recipe, DensityRecipe};
use hfcalc_core::volgrid::{write_volumetric, AtomRoster};
use hfcalc_core::Vec3;
use serde::Serialize;

use crate::error::{CliError, CliResult, CoreContext};
use crate::manifest::Recorder;
use crate::pipeline;

/// Where the density comes from.
#[derive(Clone, Debug)]
pub enum SynthSource {
    Recipe(PathBuf),
    NvLike { a: f64, reps: usize, dims: usize },
}

#[derive(Serialize)]
struct Sidecar {
    integral: f64,
    dims: [usize; 3],
    sources: Vec<([f64; 3], f64)>,
    warnings: Vec<String>,
    /// Configuration keys matching the written roster.
    suggested_config: Vec<(String, String)>,
}

/// Pristine diamond roster with one vacancy and one nitrogen, vacancy at the cell center.
pub fn nv_roster(a: f64, reps: usize) -> CliResult<(AtomRoster, Vec3, Vec3)> {
    let (_, pristine) = diamond_supercell(a, [reps; 3], "C").ctx("diamond lattice")?;
    let vacancy = Vec3::repeat(0.5);
    let nitrogen = Vec3::repeat(0.5 + 0.25 / reps as f64);
    let near = |p: &Vec3, q: &Vec3| (p - q).norm() < 1e-9;
    let carbons = pristine.positions().iter().filter(|p| !near(p, &vacancy) && !near(p, &nitrogen)).map(|p| ("C", *p));
    let roster = AtomRoster::from_atoms(carbons.chain(std::iter::once(("N", nitrogen))));
    Ok((roster, vacancy, nitrogen))
}

/// Writes the density to `output` and `synth.json` beside it; returns the density path.
pub fn run(source: &SynthSource, output: &Path, threads: usize) -> CliResult<PathBuf> {
    let mut rec = Recorder::new("synth", threads, Default::default());
    let (recipe, roster, suggested) = match source {
        SynthSource::Recipe(p) => {
            rec.input(p)?;
            let text = std::fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            let r = DensityRecipe::from_toml_str(&text).ctx(p.display())?;
            (r, AtomRoster::default(), Vec::new())
        }
        &SynthSource::NvLike { a, reps, dims } => {
            let r = nv_like_recipe(a, reps, dims).ctx("NV-like recipe")?;
            let (roster, v, n) = nv_roster(a, reps)?;
            let fmt = |x: Vec3| format!("[{:?}, {:?}, {:?}]", x.x, x.y, x.z);
            let keys = vec![
                ("lattice.a".into(), format!("{a:?}")),
                ("defect.vacancy".into(), fmt(v)),
                ("defect.substitution".into(), fmt(n)),
                ("defect.species".into(), "\"N\"".into()),
                ("spin".into(), "1.0".into()),
            ];
            (r, roster, keys)
        }
    };
    let synth = build_density(&recipe).ctx("building density")?;
    rec.warnings(synth.warnings.iter().cloned());
    rec.phase("build");

    write_volumetric(&synth.grid, &roster, pipeline::create(output)?).ctx(output.display())?;
    rec.output(output)?;
    let dir = output.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let sidecar = Sidecar {
        integral: synth.grid.integral(),
        dims: synth.grid.dims(),
        sources: synth.sources.iter().map(|(c, w)| ([c.x, c.y, c.z], *w)).collect(),
        warnings: synth.warnings.clone(),
        suggested_config: suggested,
    };
    let side = dir.join("synth.json");
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(&side, text + "\n").map_err(|e| CliError::input(format!("{}: {e}", side.display())))?;
    rec.output(&side)?;
    rec.phase("write");
    rec.finish(dir)?;
    Ok(output.to_path_buf())
}
