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

//! Dipole-dipole integral `W_ij(R) = ∫ (3 d_i d_j / |d|⁵ − δ_ij / |d|³) σ(r) dr`,
//! `d = r − R`, in Å⁻³.
//!
//! Backends:
//! - [`dipole_isolated_direct`]: voxel sum over the cell only (isolated defect).
//! - [`dipole_isolated_fft`]: the same sum for a probe sub-lattice of the grid,
//!   as a zero-padded linear convolution.
//! - [`dipole_periodic_recip`]: periodic-boundary reference from the
//!   reciprocal-space form `−4π Σ_G (G_iG_j/G² − δ_ij/3) σ(G) e^{iG·R}`.
//! - [`dipole_periodic_image_oracle`]: explicit image summation, for tests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};

mod direct;
mod fft;
mod fft3;
mod images;
mod periodic;

pub use direct::{dipole_isolated_direct, dipole_isolated_direct_many};
pub use fft::{dipole_isolated_fft, DipoleField, FftOptions};
pub use images::{dipole_periodic_image_oracle, ImageSum, ShellPartial};
pub use periodic::{dipole_periodic_recip, PeriodicReference};

/// Squared distance below which a voxel counts as coincident with the probe.
pub(crate) const SINGULAR_R2: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    IsolatedDirect,
    IsolatedFft,
    PeriodicRecip,
    PeriodicImageOracle,
    Analytic,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::IsolatedDirect => "isolated_direct",
            Backend::IsolatedFft => "isolated_fft",
            Backend::PeriodicRecip => "periodic_recip",
            Backend::PeriodicImageOracle => "periodic_image_oracle",
            Backend::Analytic => "analytic",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "isolated_direct" => Backend::IsolatedDirect,
            "isolated_fft" => Backend::IsolatedFft,
            "periodic_recip" => Backend::PeriodicRecip,
            "periodic_image_oracle" => Backend::PeriodicImageOracle,
            "analytic" => Backend::Analytic,
            other => return Err(format!("unknown backend {other:?}")),
        })
    }
}

/// Symmetric, traceless dipolar tensor at a probe point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipoleTensor {
    pub w: Mat3,
    pub probe: Vec3,
    pub backend: Backend,
}

impl DipoleTensor {
    /// Components ordered xx, yy, zz, xy, xz, yz.
    pub fn from_components(c: [f64; 6], probe: Vec3, backend: Backend) -> Self {
        let [xx, yy, zz, xy, xz, yz] = c;
        let w = Mat3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz);
        Self { w, probe, backend }
    }

    pub fn components(&self) -> [f64; 6] {
        let w = &self.w;
        [w[(0, 0)], w[(1, 1)], w[(2, 2)], w[(0, 1)], w[(0, 2)], w[(1, 2)]]
    }

    pub fn trace(&self) -> f64 {
        self.w.trace()
    }

    pub fn max_abs(&self) -> f64 {
        self.w.amax()
    }

    /// `|trace| ≤ 1e-8·max|w_ij| + 1e-14`.
    pub fn is_traceless(&self) -> bool {
        self.trace().abs() <= 1e-8 * self.max_abs() + 1e-14
    }

    pub fn is_symmetric(&self) -> bool {
        self.w == self.w.transpose()
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.w *= factor;
        self
    }
}

/// `max|a − b| / max|b|` over tensor components.
pub fn relative_deviation(a: &Mat3, b: &Mat3) -> f64 {
    let scale = b.amax();
    let diff = (a - b).amax();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// `(3 d_i d_j − δ_ij |d|²) / |d|⁵`, components xx, yy, zz, xy, xz, yz.
#[inline(always)]
pub fn point_kernel(d: [f64; 3]) -> [f64; 6] {
    let [x, y, z] = d;
    let r2 = x * x + y * y + z * z;
    let inv_r2 = 1.0 / r2;
    let f = inv_r2 * inv_r2 * inv_r2.sqrt();
    let f3 = 3.0 * f;
    [
        f * (3.0 * x * x - r2),
        f * (3.0 * y * y - r2),
        f * (3.0 * z * z - r2),
        f3 * x * y,
        f3 * x * z,
        f3 * y * z,
    ]
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionMode {
    /// Voxels whose center lies within the species radius of an in-cell probe are dropped.
    #[default]
    VoxelCenter,
    None,
}

/// Augmentation-sphere exclusion around in-cell probes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExclusionSpec {
    pub mode: ExclusionMode,
    pub radius_by_species: BTreeMap<String, f64>,
}

impl Default for ExclusionSpec {
    /// C and N at 0.79 Å (about 1.5 bohr).
    fn default() -> Self {
        let radius_by_species = [("C", 0.79), ("N", 0.79)]
            .into_iter()
            .map(|(s, r)| (s.to_string(), r))
            .collect();
        Self { mode: ExclusionMode::VoxelCenter, radius_by_species }
    }
}

impl ExclusionSpec {
    pub fn none() -> Self {
        Self { mode: ExclusionMode::None, radius_by_species: BTreeMap::new() }
    }

    pub fn uniform(radius: f64, species: &[&str]) -> Self {
        Self {
            mode: ExclusionMode::VoxelCenter,
            radius_by_species: species.iter().map(|s| (s.to_string(), radius)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == ExclusionMode::VoxelCenter {
            if let Some((s, r)) = self.radius_by_species.iter().find(|(_, r)| !(**r > 0.0)) {
                return Err(Error::InconsistentInput(format!(
                    "exclusion radius for {s} must be positive, got {r}"
                )));
            }
        }
        Ok(())
    }

    /// Radius for a probe species; `None` when exclusion is off.
    pub fn radius_for(&self, species: Option<&str>) -> Result<Option<f64>> {
        match self.mode {
            ExclusionMode::None => Ok(None),
            ExclusionMode::VoxelCenter => species
                .and_then(|s| self.radius_by_species.get(s).copied())
                .map(Some)
                .ok_or_else(|| Error::MissingExclusionRadius(species.map(str::to_string))),
        }
    }
}

/// Evaluation point for the dipolar integral.
#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    pub position: Vec3,
    pub species: Option<String>,
}

impl Probe {
    pub fn new(position: Vec3, species: &str) -> Self {
        Self { position, species: Some(species.to_string()) }
    }

    pub fn bare(position: Vec3) -> Self {
        Self { position, species: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_on_axis() {
        let k = point_kernel([0.0, 0.0, 10.0]);
        assert_eq!(k, [-1e-3, -1e-3, 2e-3, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn kernel_is_traceless_and_symmetric() {
        let k = point_kernel([0.3, -1.7, 2.2]);
        let t = DipoleTensor::from_components(k, Vec3::zeros(), Backend::Analytic);
        assert!(t.is_symmetric());
        assert!(t.is_traceless());
    }

    #[test]
    fn exclusion_lookup() {
        let e = ExclusionSpec::default();
        assert_eq!(e.radius_for(Some("C")).unwrap(), Some(0.79));
        assert!(matches!(e.radius_for(Some("Si")), Err(Error::MissingExclusionRadius(_))));
        assert!(matches!(e.radius_for(None), Err(Error::MissingExclusionRadius(None))));
        assert_eq!(ExclusionSpec::none().radius_for(None).unwrap(), None);
        let bad = ExclusionSpec::uniform(0.0, &["C"]);
        assert!(bad.validate().is_err());
    }
}
