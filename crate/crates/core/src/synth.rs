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

//! Synthetic spin densities with closed-form dipolar responses.

use serde::Deserialize;

use crate::dipole::{point_kernel, Backend, DipoleTensor, SINGULAR_R2};
use crate::error::{Error, Result};
use crate::geometry::{CellGeometry, Mat3, Vec3};
use crate::summation::neumaier_sum;
use crate::volgrid::VolumetricGrid;

/// Gaussians are cut at this many standard deviations.
pub const TRUNCATION_WIDTHS: f64 = 6.0;
const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Component {
    /// Whole weight on the grid point nearest `center`.
    Spike { center: Vec3, weight: f64 },
    /// Isotropic Gaussian; `width` is the standard deviation in Å.
    Gaussian { center: Vec3, width: f64, weight: f64 },
    /// `points` equal Gaussians spaced by `width` from `center` along `direction`.
    Lobe { center: Vec3, direction: Vec3, width: f64, weight: f64, points: usize },
}

impl Component {
    pub fn weight(&self) -> f64 {
        match self {
            Component::Spike { weight, .. } | Component::Gaussian { weight, .. } | Component::Lobe { weight, .. } => {
                *weight
            }
        }
    }

    /// Expands lobes into their Gaussians.
    fn primitives(&self) -> Result<Vec<Component>> {
        match *self {
            Component::Lobe { center, direction, width, weight, points } => {
                let n = direction.norm();
                if points == 0 || !(n > 0.0) {
                    return Err(Error::BadRecipe("lobe needs a nonzero direction and at least one point".into()));
                }
                let step = direction / n * width;
                Ok((0..points)
                    .map(|k| Component::Gaussian {
                        center: center + step * k as f64,
                        width,
                        weight: weight / points as f64,
                    })
                    .collect())
            }
            _ => Ok(vec![self.clone()]),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DensityRecipe {
    pub cell: CellGeometry,
    pub dims: [usize; 3],
    pub components: Vec<Component>,
    pub spin: f64,
    /// Require the weights to sum to 2S.
    pub normalized: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecipe {
    lattice: [[f64; 3]; 3],
    dims: [usize; 3],
    #[serde(default = "one")]
    spin: f64,
    #[serde(default = "yes")]
    normalized: bool,
    #[serde(default, rename = "component")]
    components: Vec<RawComponent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    kind: String,
    center: [f64; 3],
    #[serde(default)]
    width: f64,
    weight: f64,
    direction: Option<[f64; 3]>,
    points: Option<usize>,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl DensityRecipe {
    /// Parses a TOML recipe: `lattice`, `dims`, `spin`, `normalized` and
    /// `[[component]]` tables with `kind` = `voxel_spike`, `gaussian` or `lobe_set`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawRecipe = toml::from_str(text).map_err(|e| Error::BadRecipe(e.to_string()))?;
        let cell = CellGeometry::new(Mat3::from_fn(|r, c| raw.lattice[r][c]))?;
        let components = raw
            .components
            .into_iter()
            .map(|c| {
                let center = Vec3::from(c.center);
                match c.kind.as_str() {
                    "voxel_spike" | "spike" => Ok(Component::Spike { center, weight: c.weight }),
                    "gaussian" => Ok(Component::Gaussian { center, width: c.width, weight: c.weight }),
                    "lobe_set" | "lobe" => Ok(Component::Lobe {
                        center,
                        direction: Vec3::from(
                            c.direction.ok_or_else(|| Error::BadRecipe("lobe_set needs a direction".into()))?,
                        ),
                        width: c.width,
                        weight: c.weight,
                        points: c.points.unwrap_or(3),
                    }),
                    k => Err(Error::BadRecipe(format!("unknown component kind {k:?}"))),
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { cell, dims: raw.dims, components, spin: raw.spin, normalized: raw.normalized })
    }
}

/// A built density and the point sources it represents.
#[derive(Clone, Debug)]
pub struct SynthDensity {
    pub grid: VolumetricGrid,
    /// Center and weight of every spike (after snapping) and Gaussian.
    pub sources: Vec<(Vec3, f64)>,
    pub warnings: Vec<String>,
}

pub fn build_density(recipe: &DensityRecipe) -> Result<SynthDensity> {
    if recipe.dims.contains(&0) {
        return Err(Error::BadRecipe(format!("grid dims {:?}", recipe.dims)));
    }
    let total = neumaier_sum(recipe.components.iter().map(Component::weight));
    if recipe.normalized && (total - 2.0 * recipe.spin).abs() > WEIGHT_TOLERANCE {
        return Err(Error::BadRecipe(format!("weights sum to {total}, expected 2S = {}", 2.0 * recipe.spin)));
    }
    let mut grid = VolumetricGrid::zeros(recipe.cell.clone(), recipe.dims);
    let dv = grid.voxel_volume();
    let mut sources = Vec::new();
    let mut warnings = Vec::new();
    for comp in &recipe.components {
        for prim in comp.primitives()? {
            match prim {
                Component::Spike { center, weight } => {
                    let flat = nearest_point(&grid, &center);
                    let snapped = grid.position(flat);
                    let moved = (snapped - center).norm();
                    if moved > 1e-9 {
                        let msg = format!("spike at {:?} snapped {moved:.4} Å onto the grid", center.as_slice());
                        log::warn!("{msg}");
                        warnings.push(msg);
                    }
                    grid.values_mut()[flat] += weight / dv;
                    sources.push((snapped, weight));
                }
                Component::Gaussian { center, width, weight } => {
                    add_gaussian(&mut grid, &center, width, weight)?;
                    sources.push((center, weight));
                }
                Component::Lobe { .. } => unreachable!("lobes are expanded"),
            }
        }
    }
    Ok(SynthDensity { grid, sources, warnings })
}

fn nearest_point(grid: &VolumetricGrid, p: &Vec3) -> usize {
    let f = grid.cell().to_fractional(p);
    let d = grid.dims();
    let idx: [usize; 3] = std::array::from_fn(|k| ((f[k] * d[k] as f64).round() as i64).rem_euclid(d[k] as i64) as usize);
    grid.flat_index(idx[0], idx[1], idx[2])
}

fn add_gaussian(grid: &mut VolumetricGrid, center: &Vec3, width: f64, weight: f64) -> Result<()> {
    let spacing = grid.max_spacing();
    if !(width >= 2.0 * spacing) {
        return Err(Error::BadRecipe(format!(
            "gaussian width {width} Å is below two grid spacings ({:.4} Å)",
            2.0 * spacing
        )));
    }
    let cell = grid.cell().clone();
    let dims = grid.dims();
    let cut = TRUNCATION_WIDTHS * width;
    let fc = cell.to_fractional(center);
    let recip = cell.reciprocal();
    let range: [(i64, i64); 3] = std::array::from_fn(|k| {
        let r = cut * recip.row(k).norm();
        let n = dims[k] as f64;
        (((fc[k] - r) * n).floor() as i64, ((fc[k] + r) * n).ceil() as i64)
    });
    let inv = 1.0 / (2.0 * width * width);
    let mut samples = Vec::new();
    for k in range[2].0..=range[2].1 {
        for j in range[1].0..=range[1].1 {
            for i in range[0].0..=range[0].1 {
                let f = Vec3::new(i as f64 / dims[0] as f64, j as f64 / dims[1] as f64, k as f64 / dims[2] as f64);
                let d = cell.to_cartesian(&f) - center;
                let r2 = d.norm_squared();
                if r2 <= cut * cut {
                    let w = |x: i64, n: usize| x.rem_euclid(n as i64) as usize;
                    samples.push((grid.flat_index(w(i, dims[0]), w(j, dims[1]), w(k, dims[2])), (-r2 * inv).exp()));
                }
            }
        }
    }
    let norm = neumaier_sum(samples.iter().map(|s| s.1)) * grid.voxel_volume();
    let scale = weight / norm;
    let values = grid.values_mut();
    for (n, g) in samples {
        values[n] += g * scale;
    }
    Ok(())
}

/// Kernel of a point spin `weight` at `center` seen from `probe`.
pub fn analytic_point_tensor(center: &Vec3, weight: f64, probe: &Vec3) -> Result<DipoleTensor> {
    let d = center - probe;
    if d.norm_squared() < SINGULAR_R2 {
        return Err(Error::SingularKernel { count: 1 });
    }
    let k = point_kernel([d.x, d.y, d.z]).map(|c| c * weight);
    Ok(DipoleTensor::from_components(k, *probe, Backend::Analytic))
}

/// Sum of point tensors over `sources`.
pub fn analytic_sources_tensor(sources: &[(Vec3, f64)], probe: &Vec3) -> Result<DipoleTensor> {
    let mut acc = crate::summation::SymAccumulator::ZERO;
    for (c, w) in sources {
        acc.add(analytic_point_tensor(c, *w, probe)?.components());
    }
    Ok(DipoleTensor::from_components(acc.values(), *probe, Backend::Analytic))
}

/// NV-like density in a cubic cell of `reps` conventional diamond cells: three
/// positive lobes on the carbons next to the vacancy, pointing at it, and a
/// small negative lobe on the nitrogen. Weights sum to 2.
pub fn nv_like_recipe(a: f64, reps: usize, dims: usize) -> Result<DensityRecipe> {
    if reps < 2 || reps % 2 != 0 {
        return Err(Error::BadRecipe(format!("NV-like recipe needs an even repetition count, got {reps}")));
    }
    let edge = a * reps as f64;
    let cell = CellGeometry::cubic(edge)?;
    let vacancy = Vec3::repeat(edge / 2.0);
    let width = (0.45f64).max(2.0 * edge / dims as f64 * 1.0001);
    let bond = a / 4.0;
    let mut components: Vec<Component> = [[1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
        .iter()
        .map(|s| {
            let carbon = vacancy + Vec3::from(*s) * bond;
            Component::Lobe { center: carbon, direction: vacancy - carbon, width, weight: 0.7, points: 3 }
        })
        .collect();
    components.push(Component::Gaussian { center: vacancy + Vec3::repeat(bond), width, weight: -0.1 });
    Ok(DensityRecipe { cell, dims: [dims; 3], components, spin: 1.0, normalized: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dipole::{dipole_isolated_direct, relative_deviation, ExclusionSpec, Probe};

    fn cubic(edge: f64, n: usize, components: Vec<Component>, spin: f64) -> DensityRecipe {
        DensityRecipe { cell: CellGeometry::cubic(edge).unwrap(), dims: [n; 3], components, spin, normalized: true }
    }

    #[test]
    fn spike_integral_is_exact() {
        let r = cubic(7.3, 9, vec![Component::Spike { center: Vec3::repeat(7.3 * 4.0 / 9.0), weight: 1.0 }], 0.5);
        let s = build_density(&r).unwrap();
        assert!((s.grid.integral() - 1.0).abs() <= f64::EPSILON);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn off_grid_spike_is_snapped() {
        let r = cubic(8.0, 8, vec![Component::Spike { center: Vec3::new(1.2, 0.9, 7.8), weight: 2.0 }], 1.0);
        let s = build_density(&r).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert_eq!(s.sources[0].0, Vec3::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn gaussian_is_normalized_and_checked() {
        let r = cubic(12.0, 48, vec![Component::Gaussian { center: Vec3::repeat(6.1), width: 0.6, weight: 2.0 }], 1.0);
        assert!((build_density(&r).unwrap().grid.integral() - 2.0).abs() < 1e-12);
        let narrow = cubic(12.0, 48, vec![Component::Gaussian { center: Vec3::repeat(6.0), width: 0.4, weight: 2.0 }], 1.0);
        assert!(matches!(build_density(&narrow), Err(Error::BadRecipe(_))));
        let wrong = cubic(12.0, 48, vec![Component::Gaussian { center: Vec3::repeat(6.0), width: 0.6, weight: 1.0 }], 1.0);
        assert!(matches!(build_density(&wrong), Err(Error::BadRecipe(_))));
    }

    #[test]
    fn gaussian_wraps_across_boundary() {
        let r = cubic(10.0, 40, vec![Component::Gaussian { center: Vec3::new(0.1, 5.0, 5.0), width: 0.5, weight: 1.0 }], 0.5);
        let g = build_density(&r).unwrap().grid;
        assert!((g.integral() - 1.0).abs() < 1e-12);
        assert!(g.values()[g.flat_index(39, 20, 20)] > 0.0);
    }

    #[test]
    fn nv_like_integrates_to_two() {
        let r = nv_like_recipe(3.567, 2, 48).unwrap();
        let s = build_density(&r).unwrap();
        assert!((s.grid.integral() - 2.0).abs() < 1e-12);
        assert!(s.grid.values().iter().any(|&v| v < 0.0));
        assert_eq!(s.sources.len(), 10);
    }

    #[test]
    fn point_tensor_examples() {
        let t = analytic_point_tensor(&Vec3::zeros(), 1.0, &Vec3::new(0.0, 0.0, 10.0)).unwrap();
        assert!((t.w[(2, 2)] - 2e-3).abs() < 1e-18);
        let t2 = analytic_point_tensor(&Vec3::zeros(), 2.0, &Vec3::new(1.0, 2.0, 3.0)).unwrap();
        let t1 = analytic_point_tensor(&Vec3::zeros(), 1.0, &Vec3::new(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(t2.w, t1.w * 2.0);
        assert!(matches!(
            analytic_point_tensor(&Vec3::zeros(), 1.0, &Vec3::zeros()),
            Err(Error::SingularKernel { .. })
        ));
    }

    #[test]
    fn spike_matches_direct_engine() {
        let r = cubic(10.0, 10, vec![Component::Spike { center: Vec3::new(5.0, 5.0, 5.0), weight: 1.0 }], 0.5);
        let s = build_density(&r).unwrap();
        let probe = Vec3::new(7.3, 1.1, 9.4);
        let a = analytic_sources_tensor(&s.sources, &probe).unwrap();
        let d = dipole_isolated_direct(&s.grid, &Probe::bare(probe), &ExclusionSpec::none()).unwrap();
        assert!(relative_deviation(&d.w, &a.w) < 1e-12);
    }

    #[test]
    fn recipe_from_toml() {
        let text = r#"
            lattice = [[10.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 10.0]]
            dims = [20, 20, 20]
            spin = 1.0

            [[component]]
            kind = "gaussian"
            center = [5.0, 5.0, 5.0]
            width = 1.0
            weight = 1.5

            [[component]]
            kind = "lobe_set"
            center = [5.0, 5.0, 3.0]
            direction = [0.0, 0.0, 1.0]
            width = 1.0
            weight = 0.5
        "#;
        let r = DensityRecipe::from_toml_str(text).unwrap();
        assert_eq!(r.components.len(), 2);
        let s = build_density(&r).unwrap();
        assert_eq!(s.sources.len(), 4);
        assert!((s.grid.integral() - 2.0).abs() < 1e-12);
        assert!(DensityRecipe::from_toml_str("dims = [1,1,1]").is_err());
        let bad = text.replace("gaussian", "cube");
        assert!(matches!(DensityRecipe::from_toml_str(&bad), Err(Error::BadRecipe(_))));
    }
}
