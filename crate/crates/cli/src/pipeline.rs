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

//! Shared pipeline stages.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use hfcalc_core::contact::{ingest_contact_table, ContactTable};
use hfcalc_core::dipole::{dipole_isolated_direct_many, Backend, DipoleTensor, PeriodicReference, Probe};
use hfcalc_core::hyperfine::{a_zz, assemble_tensor, splitting_az, AssemblyContext, ConstantsTable, SpinSystem};
use hfcalc_core::lattice::{apply_relaxed_positions, diamond_supercell, generate_site_set, Region, SiteSet};
use hfcalc_core::table::{Metadata, TableRow};
use hfcalc_core::volgrid::{parse_volumetric, AtomRoster};
use hfcalc_core::{CellGeometry, VolumetricGrid};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, CoreContext};

pub const TENSOR_TABLE: &str = "tensors.csv";

pub fn open(path: &Path) -> CliResult<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn create(path: &Path) -> CliResult<std::io::BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    }
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn load_density(cfg: &RunConfig) -> CliResult<(PathBuf, VolumetricGrid, AtomRoster)> {
    let path = cfg.density.clone().ok_or_else(|| CliError::config("no density file configured (key `density`)"))?;
    let (grid, roster) = parse_volumetric(open(&path)?, cfg.density_block).ctx(path.display())?;
    if let Some(rel) = grid.spin_mismatch(cfg.spin, 0.01) {
        log::warn!("density integrates {:.2}% away from 2S = {}", rel * 100.0, 2.0 * cfg.spin);
    }
    Ok((path, grid, roster))
}

pub fn load_constants(cfg: &RunConfig) -> CliResult<ConstantsTable> {
    match &cfg.constants {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            ConstantsTable::from_toml_str(&text).ctx(p.display())
        }
        None => Ok(ConstantsTable::codata2018()),
    }
}

pub fn load_contact(cfg: &RunConfig, roster_len: usize) -> CliResult<ContactTable> {
    match &cfg.contact {
        Some(p) => ingest_contact_table(open(p)?, roster_len).ctx(p.display()),
        None => Ok(ContactTable::default()),
    }
}

/// Repetitions of the conventional cell that tile `cell`.
fn diamond_repetitions(cell: &CellGeometry, a: f64) -> CliResult<[usize; 3]> {
    let m = cell.lattice();
    let mut reps = [0usize; 3];
    for i in 0..3 {
        for j in 0..3 {
            let x = m[(i, j)];
            if i != j && x.abs() > 1e-6 * a {
                return Err(CliError::config("lattice: the density cell is not a cubic diamond supercell"));
            }
        }
        let n = m[(i, i)] / a;
        if (n - n.round()).abs() > 1e-4 || n.round() < 1.0 {
            return Err(CliError::config(format!(
                "lattice.a = {a} does not tile the cell edge {:.6} Å",
                m[(i, i)]
            )));
        }
        reps[i] = n.round() as usize;
    }
    Ok(reps)
}

/// Site set for the configured defect; in-cell sites follow the density-file roster when it has atoms.
pub fn build_sites(cfg: &RunConfig, grid: &VolumetricGrid, roster: &AtomRoster) -> CliResult<(SiteSet, usize)> {
    let defect = cfg
        .defect
        .as_ref()
        .ok_or_else(|| CliError::config("no defect configured (keys defect.vacancy, defect.substitution)"))?;
    let reps = diamond_repetitions(grid.cell(), cfg.lattice_a)?;
    let (ideal_cell, basis) = diamond_supercell(cfg.lattice_a, reps, &cfg.lattice_host).ctx("diamond lattice")?;
    let cell = CellGeometry::with_origin(*ideal_cell.lattice(), grid.cell().origin()).ctx("diamond lattice")?;
    let mut set = generate_site_set(&cell, &basis, defect, cfg.cutoff).ctx("site generation")?;
    let roster_len = if roster.is_empty() {
        basis.len()
    } else {
        apply_relaxed_positions(&mut set, roster, cfg.max_shift).ctx("matching density-file atoms to lattice sites")?;
        roster.len()
    };
    Ok((set, roster_len))
}

/// Dipolar tensor at every site, in site order.
pub fn site_tensors(cfg: &RunConfig, grid: &VolumetricGrid, set: &SiteSet) -> CliResult<Vec<DipoleTensor>> {
    match cfg.backend {
        Backend::IsolatedDirect => {
            let probes: Vec<Probe> = set.sites.iter().map(|s| Probe::new(s.position, &s.species)).collect();
            dipole_isolated_direct_many(grid, &probes, &cfg.exclusion).ctx("dipolar integral")
        }
        Backend::PeriodicRecip => {
            let reference = PeriodicReference::new(grid);
            set.sites
                .par_iter()
                .map(|s| reference.tensor_for(&Probe::new(s.position, &s.species), &cfg.exclusion))
                .collect::<Result<_, _>>()
                .ctx("periodic dipolar sum")
        }
        other => Err(CliError::config(format!(
            "backend {} cannot evaluate site tensors; use isolated_direct or periodic_recip (the field command uses the FFT backend)",
            other.name()
        ))),
    }
}

pub fn assemble_rows(
    cfg: &RunConfig,
    set: &SiteSet,
    tensors: &[DipoleTensor],
    contact: &ContactTable,
    constants: &ConstantsTable,
) -> CliResult<Vec<TableRow>> {
    let spin = SpinSystem::new(cfg.spin, cfg.axis).ctx("spin system")?;
    let ctx = AssemblyContext { constants, spin, allow_support_contact: cfg.allow_support_contact };
    let factor = cfg.unit.factor();
    set.sites
        .iter()
        .zip(tensors)
        .map(|(site, w)| {
            let species = constants.species(&site.species).ctx(format!("site {}", site.index))?;
            let entry = (site.region == Region::InCell).then(|| contact.get(site.index)).flatten();
            let t = assemble_tensor(
                w,
                entry.map(|e| e.fermi_contact),
                entry.and_then(|e| e.one_center.as_ref()),
                site.region,
                species,
                &ctx,
            )
            .ctx(format!("site {}", site.index))?
            .scaled(factor);
            Ok(TableRow {
                site: site.index,
                region: site.region,
                species: site.species.clone(),
                position: site.position,
                distance: set.distance(site),
                a_zz: a_zz(&t.a, &cfg.axis).ctx("axis")?,
                a_z: splitting_az(&t.a, &cfg.axis).ctx("axis")?,
                a: t.a,
                fermi_contact: t.fermi_contact,
                contact_present: !t.flags.contact_absent,
                one_center_present: !t.flags.one_center_absent,
            })
        })
        .collect()
}

pub fn table_metadata(cfg: &RunConfig, set: &SiteSet, constants: &ConstantsTable) -> Metadata {
    let c = set.defect_center;
    let fmt3 = |v: &hfcalc_core::Vec3| format!("{:?} {:?} {:?}", v.x, v.y, v.z);
    vec![
        ("tool".into(), format!("hfcalc {}", env!("CARGO_PKG_VERSION"))),
        ("backend".into(), cfg.backend.name().into()),
        ("unit".into(), cfg.unit.name().into()),
        ("spin".into(), format!("{:?}", cfg.spin)),
        ("axis".into(), fmt3(&cfg.axis)),
        ("cutoff_A".into(), format!("{:?}", cfg.cutoff)),
        ("defect_center_A".into(), fmt3(&c)),
        ("sites".into(), set.len().to_string()),
        ("constants".into(), constants.provenance.clone()),
    ]
}
