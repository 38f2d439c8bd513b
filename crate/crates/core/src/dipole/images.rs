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

//! Explicit image summation in spherical shells.

use rayon::prelude::*;

use super::direct::dipole_isolated_direct;
use super::{point_kernel, Backend, DipoleTensor, ExclusionSpec, Probe, SINGULAR_R2};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::summation::SymAccumulator;
use crate::volgrid::VolumetricGrid;

/// Running total after all images of one shell.
#[derive(Clone, Debug)]
pub struct ShellPartial {
    pub shell: usize,
    pub images: usize,
    pub cumulative: DipoleTensor,
}

#[derive(Clone, Debug)]
pub struct ImageSum {
    pub tensor: DipoleTensor,
    pub shells: Vec<ShellPartial>,
}

/// Sums the isolated tensor over lattice translations `T = n·A` with
/// `ceil(|T|/ℓ) ≤ shells`, `ℓ` the shortest lattice vector length.
/// Shell 0 is the home cell.
pub fn dipole_periodic_image_oracle(grid: &VolumetricGrid, probe: &Vec3, shells: usize) -> Result<ImageSum> {
    let cell = grid.cell();
    let home = dipole_isolated_direct(grid, &Probe::bare(*probe), &ExclusionSpec::none())?;
    let dv = grid.voxel_volume();

    let sparse: Vec<(Vec3, f64)> = grid
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &q)| q != 0.0)
        .map(|(n, &q)| (grid.position(n) - probe, q))
        .collect();

    let ell = cell.shortest_vector_length();
    let recip = cell.reciprocal();
    let reach: [i64; 3] = std::array::from_fn(|k| (shells as f64 * ell * recip.row(k).norm()).ceil() as i64);
    let mut images: Vec<(usize, f64, [i64; 3], Vec3)> = Vec::new();
    for a in -reach[0]..=reach[0] {
        for b in -reach[1]..=reach[1] {
            for c in -reach[2]..=reach[2] {
                if (a, b, c) == (0, 0, 0) {
                    continue;
                }
                let t = cell.vector(0) * a as f64 + cell.vector(1) * b as f64 + cell.vector(2) * c as f64;
                let len = t.norm();
                let s = (len / ell - 1e-9).ceil().max(1.0) as usize;
                if s <= shells {
                    images.push((s, len, [a, b, c], t));
                }
            }
        }
    }
    images.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.2.cmp(&y.2)));
    // Shell index is monotone in |T|, so shells are contiguous after sorting.

    let partials: Vec<Result<SymAccumulator>> = images
        .par_iter()
        .map(|&(_, _, _, t)| {
            let mut acc = SymAccumulator::ZERO;
            for &(d0, q) in &sparse {
                let d = d0 + t;
                if d.norm_squared() < SINGULAR_R2 {
                    return Err(Error::SingularKernel { count: 1 });
                }
                acc.add(point_kernel([d.x, d.y, d.z]).map(|k| q * k));
            }
            Ok(acc)
        })
        .collect();

    let mut total = SymAccumulator::ZERO;
    total.add(home.components().map(|c| c / dv));
    let mut out = vec![ShellPartial { shell: 0, images: 1, cumulative: home }];
    let mut count = 0;
    for (n, (img, part)) in images.iter().zip(partials).enumerate() {
        total.merge(&part?);
        count += 1;
        let last = images.get(n + 1).is_none_or(|next| next.0 != img.0);
        if last {
            let tensor = tensor_of(&total, dv, probe);
            out.push(ShellPartial { shell: img.0, images: count, cumulative: tensor });
            count = 0;
        }
    }
    Ok(ImageSum { tensor: tensor_of(&total, dv, probe), shells: out })
}

fn tensor_of(acc: &SymAccumulator, dv: f64, probe: &Vec3) -> DipoleTensor {
    DipoleTensor::from_components(acc.values().map(|x| x * dv), *probe, Backend::PeriodicImageOracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dipole::{dipole_periodic_recip, relative_deviation};
    use crate::geometry::CellGeometry;

    #[test]
    fn shells_are_ordered_and_counted() {
        let cell = CellGeometry::cubic(5.0).unwrap();
        let mut g = VolumetricGrid::zeros(cell, [5, 5, 5]);
        g.values_mut()[0] = 1.0;
        let s = dipole_periodic_image_oracle(&g, &Vec3::new(1.0, 2.0, 2.0), 2).unwrap();
        let counts: Vec<usize> = s.shells.iter().map(|p| p.images).collect();
        let mut shell2 = 0;
        for a in -2i32..=2 {
            for b in -2i32..=2 {
                for c in -2i32..=2 {
                    let n2 = a * a + b * b + c * c;
                    if n2 > 1 && n2 <= 4 {
                        shell2 += 1;
                    }
                }
            }
        }
        assert_eq!(counts, vec![1, 6, shell2]);
        assert!(s.shells.last().unwrap().cumulative.is_traceless());
    }

    #[test]
    fn converges_to_reciprocal_reference() {
        let cell = CellGeometry::cubic(6.0).unwrap();
        let mut g = VolumetricGrid::zeros(cell, [6, 6, 6]);
        g.values_mut()[0] = 1.0;
        let probe = g.cell().to_cartesian(&Vec3::new(0.37, 0.61, 0.13));
        let r = dipole_periodic_recip(&g, &probe).unwrap();
        let s = dipole_periodic_image_oracle(&g, &probe, 30).unwrap();
        assert!(relative_deviation(&s.tensor.w, &r.w) < 1e-6);
        // Cauchy differences shrink with shell radius.
        let step = |k: usize| (s.shells[k].cumulative.w - s.shells[k - 1].cumulative.w).abs().max();
        assert!(step(30) < step(10));
    }
}
