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

//! Dipolar field on a probe sub-lattice by zero-padded FFT convolution.
//!
//! Every probe sits on a grid point, so probe-to-voxel displacements are
//! grid vectors and the voxel sum becomes a linear convolution of `σ·ΔV`
//! with the kernel sampled at those vectors. Padding each axis to at least
//! `2n − 1` removes the periodic wrap-around. The kernel is zeroed inside the
//! exclusion sphere, which drops exactly the voxels the direct sum drops.
//! Two real kernel components are packed into one complex transform.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftDirection;

use super::fft3::Fft3;
use super::{point_kernel, Backend, DipoleTensor, ExclusionSpec};
use crate::error::{Error, Result};
use crate::geometry::{CellGeometry, Vec3};
use crate::volgrid::VolumetricGrid;

#[derive(Clone, Debug)]
pub struct FftOptions {
    /// Species at the probes; selects the exclusion radius.
    pub species: Option<String>,
    /// Upper bound on the padded working set, in bytes.
    pub memory_limit: usize,
}

impl Default for FftOptions {
    fn default() -> Self {
        Self { species: Some("C".into()), memory_limit: 4 << 30 }
    }
}

/// Six tensor components on the probe sub-lattice, x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct DipoleField {
    pub cell: CellGeometry,
    pub dims: [usize; 3],
    pub stride: [usize; 3],
    /// xx, yy, zz, xy, xz, yz.
    pub components: [Vec<f64>; 6],
}

impl DipoleField {
    pub const COMPONENT_NAMES: [&'static str; 6] = ["xx", "yy", "zz", "xy", "xz", "yz"];

    pub fn len(&self) -> usize {
        self.components[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid index (in the source grid) of probe `flat`.
    pub fn grid_index(&self, flat: usize) -> [usize; 3] {
        let [m0, m1, _] = self.dims;
        let t = [flat % m0, (flat / m0) % m1, flat / (m0 * m1)];
        std::array::from_fn(|k| t[k] * self.stride[k])
    }

    pub fn probe_position(&self, flat: usize) -> Vec3 {
        let t = [flat % self.dims[0], (flat / self.dims[0]) % self.dims[1], flat / (self.dims[0] * self.dims[1])];
        let f = Vec3::new(
            t[0] as f64 / self.dims[0] as f64,
            t[1] as f64 / self.dims[1] as f64,
            t[2] as f64 / self.dims[2] as f64,
        );
        self.cell.to_cartesian(&f)
    }

    pub fn tensor(&self, flat: usize) -> DipoleTensor {
        let c = std::array::from_fn(|i| self.components[i][flat]);
        DipoleTensor::from_components(c, self.probe_position(flat), Backend::IsolatedFft)
    }

    /// Component `c` as a grid over the same cell.
    pub fn component_grid(&self, c: usize) -> VolumetricGrid {
        VolumetricGrid::new(self.cell.clone(), self.dims, self.components[c].clone())
            .expect("component length matches dims")
    }
}

/// Smallest 5-smooth integer `>= n`.
fn smooth_size(n: usize) -> usize {
    (n.max(1)..)
        .find(|&m| {
            let mut x = m;
            for p in [2, 3, 5] {
                while x % p == 0 {
                    x /= p;
                }
            }
            x == 1
        })
        .expect("5-smooth numbers are unbounded")
}

/// Isolated-defect dipolar tensors at every `stride`-th grid point.
///
/// Equal to [`super::dipole_isolated_direct`] at each probe up to FFT
/// rounding. `stride` must divide the grid dimensions.
pub fn dipole_isolated_fft(
    grid: &VolumetricGrid,
    stride: [usize; 3],
    excl: &ExclusionSpec,
    opts: &FftOptions,
) -> Result<DipoleField> {
    let dims = grid.dims();
    for k in 0..3 {
        if stride[k] == 0 || dims[k] % stride[k] != 0 {
            return Err(Error::InconsistentInput(format!(
                "probe stride {stride:?} must divide grid dims {dims:?}"
            )));
        }
    }
    excl.validate()?;
    let out_dims: [usize; 3] = std::array::from_fn(|k| dims[k] / stride[k]);
    let padded: [usize; 3] = std::array::from_fn(|k| smooth_size(2 * dims[k] - 1));
    let total: usize = padded.iter().product();
    // Density spectrum, kernel work array, and the axis-2 line buffer.
    let required = total.saturating_mul(3 * std::mem::size_of::<Complex64>());
    if required > opts.memory_limit {
        return Err(Error::ResourceLimit { required, limit: opts.memory_limit });
    }

    let radius = excl.radius_for(opts.species.as_deref())?;
    let excl_r2 = radius.map_or(0.0, |r| r * r);
    if radius.is_none() {
        // The probe's own voxel is a zero-distance term.
        let singular = (0..out_dims.iter().product::<usize>())
            .filter(|&p| {
                let [m0, m1, _] = out_dims;
                let t = [p % m0, (p / m0) % m1, p / (m0 * m1)];
                let idx = grid.flat_index(t[0] * stride[0], t[1] * stride[1], t[2] * stride[2]);
                grid.values()[idx] != 0.0
            })
            .count();
        if singular > 0 {
            return Err(Error::SingularKernel { count: singular });
        }
    }

    let forward = Fft3::new(padded, FftDirection::Forward);
    let inverse = Fft3::new(padded, FftDirection::Inverse);

    let dv = grid.voxel_volume();
    let [p0, p1, _] = padded;
    let mut density = vec![Complex64::default(); total];
    density.par_chunks_mut(p0 * p1).enumerate().for_each(|(k, plane)| {
        if k >= dims[2] {
            return;
        }
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                plane[i + p0 * j] = Complex64::new(grid.values()[grid.flat_index(i, j, k)] * dv, 0.0);
            }
        }
    });
    forward.process(&mut density);

    let cell = grid.cell();
    let axes: [Vec3; 3] = std::array::from_fn(|k| cell.vector(k) / dims[k] as f64);
    // Signed grid offset for a padded index, or None in the zero gap.
    let offset = |p: usize, k: usize| -> Option<i64> {
        let n = dims[k] as i64;
        let m = padded[k] as i64;
        let p = p as i64;
        if p < n {
            Some(p)
        } else if p > m - n {
            Some(p - m)
        } else {
            None
        }
    };

    let out_len: usize = out_dims.iter().product();
    let mut components: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; out_len]);
    let scale = 1.0 / total as f64;
    let mut work = vec![Complex64::default(); total];
    for (re_c, im_c) in [(0usize, 1usize), (2, 3), (4, 5)] {
        work.par_chunks_mut(p0 * p1).enumerate().for_each(|(k, plane)| {
            let Some(dk) = offset(k, 2) else {
                plane.fill(Complex64::default());
                return;
            };
            for j in 0..p1 {
                let Some(dj) = offset(j, 1) else {
                    plane[p0 * j..p0 * (j + 1)].fill(Complex64::default());
                    continue;
                };
                for i in 0..p0 {
                    let slot = &mut plane[i + p0 * j];
                    let Some(di) = offset(i, 0) else {
                        *slot = Complex64::default();
                        continue;
                    };
                    let d = axes[0] * di as f64 + axes[1] * dj as f64 + axes[2] * dk as f64;
                    let r2 = d.norm_squared();
                    if (di, dj, dk) == (0, 0, 0) || r2 < excl_r2 {
                        *slot = Complex64::default();
                        continue;
                    }
                    let kern = point_kernel([d.x, d.y, d.z]);
                    *slot = Complex64::new(kern[re_c], kern[im_c]);
                }
            }
        });
        forward.process(&mut work);
        work.par_iter_mut().zip(density.par_iter()).for_each(|(w, q)| *w *= q);
        inverse.process(&mut work);

        let (lo, hi) = components.split_at_mut(im_c);
        let re_out = &mut lo[re_c];
        let im_out = &mut hi[0];
        for (flat, (re, im)) in re_out.iter_mut().zip(im_out.iter_mut()).enumerate() {
            let [m0, m1, _] = out_dims;
            let t = [flat % m0, (flat / m0) % m1, flat / (m0 * m1)];
            let idx = t[0] * stride[0] + p0 * (t[1] * stride[1] + p1 * t[2] * stride[2]);
            *re = work[idx].re * scale;
            *im = work[idx].im * scale;
        }
    }

    Ok(DipoleField { cell: cell.clone(), dims: out_dims, stride, components })
}
