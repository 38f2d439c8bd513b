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

//! Periodic-boundary dipolar tensor of a grid density.
//!
//! The lattice sum is split with a Gaussian screen: an `erfc` real-space part
//! over unwrapped voxels and a reciprocal part over `G` built from the grid
//! structure factor, which repeats with the reciprocal grid. The `G = 0` term
//! of `G_iG_j/G²` takes its angular average `δ_ij/3`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftDirection;

use super::fft3::Fft3;
use super::{Backend, DipoleTensor, ExclusionSpec, Probe, SINGULAR_R2};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::summation::SymAccumulator;
use crate::volgrid::VolumetricGrid;

/// `α·r_c` and `G_c / α`.
const REAL_CUT: f64 = 7.0;
const RECIP_CUT: f64 = 14.0;

/// Precomputed structure factor and splitting parameters of one grid.
pub struct PeriodicReference<'a> {
    grid: &'a VolumetricGrid,
    spectrum: Vec<Complex64>,
    alpha: f64,
}

impl<'a> PeriodicReference<'a> {
    pub fn new(grid: &'a VolumetricGrid) -> Self {
        let dv = grid.voxel_volume();
        let mut spectrum: Vec<Complex64> = grid.values().iter().map(|&v| Complex64::new(v * dv, 0.0)).collect();
        if !spectrum.is_empty() {
            Fft3::new(grid.dims(), FftDirection::Forward).process(&mut spectrum);
        }
        let alpha = (31.0 / (grid.cell().volume() * dv)).powf(1.0 / 6.0);
        Self { grid, spectrum, alpha }
    }

    /// Periodic dipolar tensor at Cartesian `probe` (any image of the cell).
    pub fn tensor(&self, probe: &Vec3) -> Result<DipoleTensor> {
        self.tensor_excluding(probe, 0.0)
    }

    /// As [`Self::tensor`], without voxels whose centers lie within the
    /// species exclusion radius of the probe or of any of its images.
    pub fn tensor_for(&self, probe: &Probe, excl: &ExclusionSpec) -> Result<DipoleTensor> {
        let r = excl.radius_for(probe.species.as_deref())?.unwrap_or(0.0);
        self.tensor_excluding(&probe.position, r * r)
    }

    fn tensor_excluding(&self, probe: &Vec3, excl_r2: f64) -> Result<DipoleTensor> {
        let real = self.real_part(probe, excl_r2)?;
        let recip = self.reciprocal_part(probe);
        // Smooth-part G = 0 term: −(4π/3) δ_ij Q / V.
        let cell = self.grid.cell();
        let total_charge = self.spectrum.first().map_or(0.0, |s| s.re);
        let g0 = -4.0 * PI / 3.0 * total_charge / cell.volume();
        let c: [f64; 6] = std::array::from_fn(|i| real[i] + recip[i] + if i < 3 { g0 } else { 0.0 });
        Ok(DipoleTensor::from_components(c, *probe, Backend::PeriodicRecip))
    }

    /// Real-space sum; excluded voxels also give back their smooth-part share.
    fn real_part(&self, probe: &Vec3, excl_r2: f64) -> Result<[f64; 6]> {
        let grid = self.grid;
        let cell = grid.cell();
        let dims = grid.dims();
        let alpha = self.alpha;
        let rc = REAL_CUT / alpha;
        let reach_r = rc.max(excl_r2.sqrt());
        let recip = cell.reciprocal();
        let frac = cell.to_fractional(probe);
        let mut real = SymAccumulator::ZERO;
        let mut singular = 0usize;
        let ranges: [(i64, i64); 3] = std::array::from_fn(|k| {
            let reach = reach_r * recip.row(k).norm();
            let n = dims[k] as f64;
            (((frac[k] - reach) * n).floor() as i64, ((frac[k] + reach) * n).ceil() as i64)
        });
        let axes: [Vec3; 3] = std::array::from_fn(|k| cell.vector(k) / dims[k] as f64);
        let rel = cell.origin() - probe;
        let two_over_sqrt_pi = 2.0 / PI.sqrt();
        for k in ranges[2].0..=ranges[2].1 {
            let kw = k.rem_euclid(dims[2] as i64) as usize;
            for j in ranges[1].0..=ranges[1].1 {
                let jw = j.rem_euclid(dims[1] as i64) as usize;
                let base = rel + axes[2] * k as f64 + axes[1] * j as f64;
                for i in ranges[0].0..=ranges[0].1 {
                    let iw = i.rem_euclid(dims[0] as i64) as usize;
                    let q = grid.values()[grid.flat_index(iw, jw, kw)];
                    if q == 0.0 {
                        continue;
                    }
                    let d = base + axes[0] * i as f64;
                    let r2 = d.norm_squared();
                    if r2 < excl_r2 {
                        real.add(smooth_kernel(d, alpha).map(|x| -q * x));
                        continue;
                    }
                    if r2 > rc * rc {
                        continue;
                    }
                    if r2 < SINGULAR_R2 {
                        singular += 1;
                        continue;
                    }
                    let r = r2.sqrt();
                    let ar = alpha * r;
                    let erfc = libm::erfc(ar);
                    let gauss = two_over_sqrt_pi * ar * (-ar * ar).exp();
                    let b = (erfc + gauss) / (r2 * r);
                    let c = (3.0 * erfc + gauss * (3.0 + 2.0 * ar * ar)) / (r2 * r2 * r);
                    real.add([
                        q * (c * d.x * d.x - b),
                        q * (c * d.y * d.y - b),
                        q * (c * d.z * d.z - b),
                        q * c * d.x * d.y,
                        q * c * d.x * d.z,
                        q * c * d.y * d.z,
                    ]);
                }
            }
        }
        if singular > 0 {
            return Err(Error::SingularKernel { count: singular });
        }
        let dv = grid.voxel_volume();
        Ok(real.values().map(|x| x * dv))
    }

    fn reciprocal_part(&self, probe: &Vec3) -> [f64; 6] {
        let grid = self.grid;
        let cell = grid.cell();
        let dims = grid.dims();
        let gc = RECIP_CUT * self.alpha;
        let frac = cell.to_fractional(probe);
        let recip = cell.reciprocal();
        let mmax: [i64; 3] = std::array::from_fn(|k| (gc / (2.0 * PI) * cell.vector(k).norm()).ceil() as i64);
        // Per-axis phases e^{2πi m f_k}.
        let phases: [Vec<Complex64>; 3] = std::array::from_fn(|k| {
            (-mmax[k]..=mmax[k])
                .map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 * frac[k]))
                .collect()
        });
        let b: [Vec3; 3] = std::array::from_fn(|k| recip.row(k).transpose() * (2.0 * PI));
        let inv_4a2 = 1.0 / (4.0 * self.alpha * self.alpha);
        let mut rsum = SymAccumulator::ZERO;
        for m3 in -mmax[2]..=mmax[2] {
            let w3 = m3.rem_euclid(dims[2] as i64) as usize;
            let ph3 = phases[2][(m3 + mmax[2]) as usize];
            for m2 in -mmax[1]..=mmax[1] {
                let w2 = m2.rem_euclid(dims[1] as i64) as usize;
                let ph23 = ph3 * phases[1][(m2 + mmax[1]) as usize];
                let g23 = b[2] * m3 as f64 + b[1] * m2 as f64;
                for m1 in -mmax[0]..=mmax[0] {
                    if (m1, m2, m3) == (0, 0, 0) {
                        continue;
                    }
                    let g = g23 + b[0] * m1 as f64;
                    let g2 = g.norm_squared();
                    if g2 > gc * gc {
                        continue;
                    }
                    let w1 = m1.rem_euclid(dims[0] as i64) as usize;
                    let s = self.spectrum[grid.flat_index(w1, w2, w3)];
                    let phase = ph23 * phases[0][(m1 + mmax[0]) as usize];
                    let amp = (s * phase).re * (-g2 * inv_4a2).exp() / g2;
                    rsum.add([
                        amp * g.x * g.x,
                        amp * g.y * g.y,
                        amp * g.z * g.z,
                        amp * g.x * g.y,
                        amp * g.x * g.z,
                        amp * g.y * g.z,
                    ]);
                }
            }
        }
        let pref = -4.0 * PI / cell.volume();
        rsum.values().map(|x| x * pref)
    }
}

/// Long-range `erf` share of the point kernel at `d`; finite at `d = 0`.
fn smooth_kernel(d: Vec3, alpha: f64) -> [f64; 6] {
    let r2 = d.norm_squared();
    let r = r2.sqrt();
    let ar = alpha * r;
    let (b, c) = if ar < 1e-2 {
        let x2 = ar * ar;
        let a3 = 2.0 * alpha.powi(3) / PI.sqrt();
        (a3 * (2.0 / 3.0 - 0.4 * x2 + x2 * x2 / 7.0), a3 * alpha * alpha * (0.8 - 4.0 * x2 / 7.0))
    } else {
        let erfc = libm::erfc(ar);
        let gauss = 2.0 / PI.sqrt() * ar * (-ar * ar).exp();
        ((1.0 - erfc - gauss) / (r2 * r), (3.0 * (1.0 - erfc) - gauss * (3.0 + 2.0 * ar * ar)) / (r2 * r2 * r))
    };
    [c * d.x * d.x - b, c * d.y * d.y - b, c * d.z * d.z - b, c * d.x * d.y, c * d.x * d.z, c * d.y * d.z]
}

/// Periodic dipolar tensor at Cartesian `probe` (any image of the cell).
pub fn dipole_periodic_recip(grid: &VolumetricGrid, probe: &Vec3) -> Result<DipoleTensor> {
    PeriodicReference::new(grid).tensor(probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dipole::{dipole_isolated_direct, relative_deviation, ExclusionSpec, Probe};
    use crate::geometry::CellGeometry;

    #[test]
    fn traceless_and_lattice_symmetric() {
        let cell = CellGeometry::cubic(6.0).unwrap();
        let mut g = VolumetricGrid::zeros(cell, [6, 6, 6]);
        let dv = g.voxel_volume();
        g.values_mut()[0] = 1.0 / dv;
        // Body center of a simple cubic lattice of spikes: cubic site symmetry forces zero.
        let t = dipole_periodic_recip(&g, &Vec3::new(3.0, 3.0, 3.0)).unwrap();
        assert!(t.max_abs() < 1e-14, "{}", t.w);
        let t = dipole_periodic_recip(&g, &Vec3::new(1.3, 2.0, 0.4)).unwrap();
        assert!(t.is_traceless());
        // Translating the probe by a lattice vector changes nothing.
        let u = dipole_periodic_recip(&g, &Vec3::new(1.3, 8.0, 0.4)).unwrap();
        assert!(relative_deviation(&u.w, &t.w) < 1e-12);
    }

    #[test]
    fn localized_density_in_large_cell_is_close_to_isolated() {
        let cell = CellGeometry::cubic(21.4).unwrap();
        let mut g = VolumetricGrid::zeros(cell, [20, 20, 20]);
        let dv = g.voxel_volume();
        let c = g.flat_index(10, 10, 10);
        g.values_mut()[c] = 1.0 / dv;
        let probe = Vec3::new(10.7, 10.7, 13.7);
        let p = dipole_periodic_recip(&g, &probe).unwrap();
        let i = dipole_isolated_direct(&g, &Probe::bare(probe), &ExclusionSpec::none()).unwrap();
        assert!(relative_deviation(&p.w, &i.w) < 0.02);
    }

    #[test]
    fn exclusion_removes_voxels_of_every_image() {
        use rand::{Rng, SeedableRng};
        let cell = CellGeometry::cubic(6.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let values = (0..24 * 24 * 24).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = VolumetricGrid::new(cell.clone(), [24; 3], values).unwrap();
        let p = PeriodicReference::new(&g);
        let probe = Vec3::new(0.31, 5.87, 2.04);
        let full = p.tensor(&probe).unwrap();
        for radius in [1.0, 5.5] {
            let excl = ExclusionSpec::uniform(radius, &["C"]);
            let got = p.tensor_for(&Probe::new(probe, "C"), &excl).unwrap();
            let mut removed = SymAccumulator::ZERO;
            for n in 0..g.len() {
                for t in [-2.0, -1.0, 0.0, 1.0, 2.0].iter().flat_map(|&a| {
                    [-2.0, -1.0, 0.0, 1.0, 2.0].into_iter().flat_map(move |b| [-2.0, -1.0, 0.0, 1.0, 2.0].map(|c| Vec3::new(a, b, c)))
                }) {
                    let d = g.position(n) + t * 6.0 - probe;
                    if d.norm() < radius {
                        removed.add(crate::dipole::point_kernel([d.x, d.y, d.z]).map(|k| k * g.values()[n] * g.voxel_volume()));
                    }
                }
            }
            let expected = DipoleTensor::from_components(
                std::array::from_fn(|i| full.components()[i] - removed.values()[i]),
                probe,
                Backend::PeriodicRecip,
            );
            assert!(relative_deviation(&got.w, &expected.w) < 1e-9, "radius {radius}");
        }
        let on_grid = Probe::new(g.position(100), "C");
        let t = p.tensor_for(&on_grid, &ExclusionSpec::default()).unwrap();
        assert!(t.is_traceless(), "trace {}", t.trace());
        assert!(matches!(p.tensor(&on_grid.position), Err(Error::SingularKernel { .. })));
    }

    #[test]
    fn smooth_kernel_series_joins_closed_form() {
        let alpha = 1.3;
        let dir = Vec3::new(0.3, -0.5, 0.8).normalize();
        let below = smooth_kernel(dir * (0.999e-2 / alpha), alpha);
        let above = smooth_kernel(dir * (1.001e-2 / alpha), alpha);
        for (x, y) in below.iter().zip(&above) {
            assert!((x - y).abs() < 1e-6 * alpha.powi(3));
        }
        let origin = smooth_kernel(Vec3::zeros(), alpha);
        let trace: f64 = origin[..3].iter().sum();
        assert!((trace + 4.0 * alpha.powi(3) / PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn coincident_occupied_voxel_is_singular() {
        let cell = CellGeometry::cubic(4.0).unwrap();
        let mut g = VolumetricGrid::zeros(cell, [4, 4, 4]);
        g.values_mut()[0] = 1.0;
        assert!(matches!(
            dipole_periodic_recip(&g, &Vec3::new(4.0, 0.0, 0.0)),
            Err(Error::SingularKernel { .. })
        ));
    }
}
