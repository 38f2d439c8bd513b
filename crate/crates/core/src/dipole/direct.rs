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

use rayon::prelude::*;

use super::{point_kernel, Backend, DipoleTensor, ExclusionSpec, Probe, SINGULAR_R2};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::summation::SymAccumulator;
use crate::volgrid::VolumetricGrid;

/// Per-axis Cartesian offsets of grid points, `(i / n_k) · a_k`.
pub(crate) struct AxisOffsets {
    pub axes: [Vec<[f64; 3]>; 3],
}

impl AxisOffsets {
    pub fn new(grid: &VolumetricGrid) -> Self {
        let dims = grid.dims();
        let axes = std::array::from_fn(|k| {
            let a = grid.cell().vector(k);
            (0..dims[k])
                .map(|i| {
                    let f = i as f64 / dims[k] as f64;
                    [a.x * f, a.y * f, a.z * f]
                })
                .collect()
        });
        Self { axes }
    }
}

#[derive(Clone, Copy, Default)]
struct PlaneSum {
    acc: SymAccumulator,
    singular: usize,
}

/// Sum over the `k`-th plane of the grid, rows in ascending order.
fn plane_sum(grid: &VolumetricGrid, off: &AxisOffsets, k: usize, rel: [f64; 3], excl_r2: f64) -> PlaneSum {
    let [n1, n2, _] = grid.dims();
    let values = grid.values();
    let mut out = PlaneSum::default();
    let p3 = off.axes[2][k];
    for j in 0..n2 {
        let p2 = off.axes[1][j];
        let base = [rel[0] + p3[0] + p2[0], rel[1] + p3[1] + p2[1], rel[2] + p3[2] + p2[2]];
        let row = &values[(j + n2 * k) * n1..][..n1];
        for (q, p1) in row.iter().zip(&off.axes[0]) {
            let q = *q;
            if q == 0.0 {
                continue;
            }
            let d = [base[0] + p1[0], base[1] + p1[1], base[2] + p1[2]];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if r2 < excl_r2 {
                continue;
            }
            if r2 < SINGULAR_R2 {
                out.singular += 1;
                continue;
            }
            let kern = point_kernel(d);
            out.acc.add([q * kern[0], q * kern[1], q * kern[2], q * kern[3], q * kern[4], q * kern[5]]);
        }
    }
    out
}

fn exclusion_r2(grid: &VolumetricGrid, probe: &Probe, excl: &ExclusionSpec) -> Result<f64> {
    // Probes outside the supercell see the full cell.
    if !grid.cell().contains(&probe.position) {
        return Ok(0.0);
    }
    Ok(excl.radius_for(probe.species.as_deref())?.map_or(0.0, |r| r * r))
}

fn finish(grid: &VolumetricGrid, probe: &Vec3, planes: impl Iterator<Item = PlaneSum>) -> Result<DipoleTensor> {
    let mut total = SymAccumulator::ZERO;
    let mut singular = 0;
    for p in planes {
        total.merge(&p.acc);
        singular += p.singular;
    }
    if singular > 0 {
        return Err(Error::SingularKernel { count: singular });
    }
    let dv = grid.voxel_volume();
    let c = total.values().map(|x| x * dv);
    Ok(DipoleTensor::from_components(c, *probe, Backend::IsolatedDirect))
}

fn relative_origin(grid: &VolumetricGrid, probe: &Vec3) -> [f64; 3] {
    let r = grid.cell().origin() - probe;
    [r.x, r.y, r.z]
}

/// Voxel sum over the supercell for one probe.
///
/// In-cell probes drop the voxels inside their species' exclusion sphere;
/// probes outside the cell integrate the whole cell. Planes are summed in
/// parallel and merged in index order, so the result does not depend on the
/// number of worker threads.
pub fn dipole_isolated_direct(grid: &VolumetricGrid, probe: &Probe, excl: &ExclusionSpec) -> Result<DipoleTensor> {
    let excl_r2 = exclusion_r2(grid, probe, excl)?;
    let off = AxisOffsets::new(grid);
    let rel = relative_origin(grid, &probe.position);
    let planes: Vec<PlaneSum> = (0..grid.dims()[2])
        .into_par_iter()
        .map(|k| plane_sum(grid, &off, k, rel, excl_r2))
        .collect();
    finish(grid, &probe.position, planes.into_iter())
}

/// [`dipole_isolated_direct`] for many probes, parallel over probes.
/// Output order follows `probes`; values are bitwise identical to the
/// single-probe path.
pub fn dipole_isolated_direct_many(
    grid: &VolumetricGrid,
    probes: &[Probe],
    excl: &ExclusionSpec,
) -> Result<Vec<DipoleTensor>> {
    let off = AxisOffsets::new(grid);
    probes
        .par_iter()
        .map(|probe| {
            let excl_r2 = exclusion_r2(grid, probe, excl)?;
            let rel = relative_origin(grid, &probe.position);
            let planes = (0..grid.dims()[2]).map(|k| plane_sum(grid, &off, k, rel, excl_r2));
            finish(grid, &probe.position, planes)
        })
        .collect()
}
