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

//! Nuclear-site sets: supercell sites plus the support lattice around a defect.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellGeometry, Vec3};
use crate::volgrid::AtomRoster;

/// Minimum separation between two sites, Å.
pub const DUPLICATE_TOLERANCE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    InCell,
    Support,
}

impl Region {
    pub fn name(&self) -> &'static str {
        match self {
            Region::InCell => "in_cell",
            Region::Support => "support",
        }
    }
}

impl std::str::FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in_cell" => Ok(Region::InCell),
            "support" => Ok(Region::Support),
            _ => Err(Error::BadTable(format!("unknown region {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Site {
    /// Cartesian position, Å.
    pub position: Vec3,
    pub species: String,
    pub region: Region,
    /// Roster index for in-cell sites; roster length plus a running count for support sites.
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LatticeWarning {
    /// The cutoff sphere holds no support site.
    EmptySupport,
}

#[derive(Clone, Debug)]
pub struct SiteSet {
    pub sites: Vec<Site>,
    pub defect_center: Vec3,
    pub cutoff_radius: f64,
    pub cell: CellGeometry,
    pub warnings: Vec<LatticeWarning>,
}

impl SiteSet {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn in_cell(&self) -> impl Iterator<Item = &Site> {
        self.sites.iter().filter(|s| s.region == Region::InCell)
    }

    pub fn support(&self) -> impl Iterator<Item = &Site> {
        self.sites.iter().filter(|s| s.region == Region::Support)
    }

    pub fn distance(&self, site: &Site) -> f64 {
        (site.position - self.defect_center).norm()
    }
}

/// Vacancy and substitution sites of a point defect.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectSpec {
    /// Fractional coordinates w.r.t. the supercell.
    pub vacancy: Vec3,
    pub substitution: Vec3,
    pub species: String,
    /// Unit symmetry axis.
    pub axis: Vec3,
    /// Cartesian reference point for distances; defaults to the vacancy/substitution midpoint.
    pub center: Option<Vec3>,
}

impl DefectSpec {
    pub fn new(vacancy: Vec3, substitution: Vec3, species: &str) -> Self {
        Self {
            vacancy,
            substitution,
            species: species.to_string(),
            axis: Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt(),
            center: None,
        }
    }

    pub fn with_center(mut self, center: Vec3) -> Self {
        self.center = Some(center);
        self
    }

    /// Cartesian defect center inside `cell`.
    pub fn center_in(&self, cell: &CellGeometry) -> Vec3 {
        if let Some(c) = self.center {
            return c;
        }
        let v = cell.to_cartesian(&self.vacancy);
        let s = cell.to_cartesian(&self.substitution);
        v + cell.minimum_image(&(s - v)) * 0.5
    }
}

/// Conventional 8-site diamond cell in fractional coordinates.
pub fn diamond_conventional_basis() -> [Vec3; 8] {
    [
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(0.0, 0.5, 0.5),
        Vec3::new(0.5, 0.0, 0.5),
        Vec3::new(0.5, 0.5, 0.0),
        Vec3::new(0.25, 0.25, 0.25),
        Vec3::new(0.25, 0.75, 0.75),
        Vec3::new(0.75, 0.25, 0.75),
        Vec3::new(0.75, 0.75, 0.25),
    ]
}

/// Pristine `n1×n2×n3` conventional diamond supercell of `species`.
pub fn diamond_supercell(a: f64, reps: [usize; 3], species: &str) -> Result<(CellGeometry, AtomRoster)> {
    if reps.contains(&0) || !(a > 0.0) {
        return Err(Error::BadGeometry(format!("diamond supercell a={a}, repetitions {reps:?}")));
    }
    let cell = CellGeometry::new(crate::geometry::Mat3::from_diagonal(&Vec3::new(
        a * reps[0] as f64,
        a * reps[1] as f64,
        a * reps[2] as f64,
    )))?;
    let n = Vec3::new(reps[0] as f64, reps[1] as f64, reps[2] as f64);
    let mut positions = Vec::with_capacity(8 * reps.iter().product::<usize>());
    for i in 0..reps[0] {
        for j in 0..reps[1] {
            for k in 0..reps[2] {
                let shift = Vec3::new(i as f64, j as f64, k as f64);
                for b in diamond_conventional_basis() {
                    positions.push((b + shift).component_div(&n));
                }
            }
        }
    }
    let roster = AtomRoster::new(vec![(species.to_string(), positions.len())], positions)?;
    Ok((cell, roster))
}

/// Builds the site set for `defect` in the pristine supercell `basis`.
pub fn generate_site_set(cell: &CellGeometry, basis: &AtomRoster, defect: &DefectSpec, cutoff: f64) -> Result<SiteSet> {
    if !(cutoff > 0.0) {
        return Err(Error::BadDefectSpec(format!("cutoff {cutoff} must be positive")));
    }
    let vacancy = match_site(cell, basis, &defect.vacancy, "vacancy")?;
    let substitution = match_site(cell, basis, &defect.substitution, "substitution")?;
    if vacancy == substitution {
        return Err(Error::BadDefectSpec("vacancy and substitution are the same site".into()));
    }
    let center = defect.center_in(cell);
    let symbols = basis.symbols();
    let cart: Vec<Vec3> = basis.positions().iter().map(|f| cell.to_cartesian(f)).collect();

    let reach: [i64; 3] = {
        let recip = cell.reciprocal();
        let fc = cell.to_fractional(&center);
        std::array::from_fn(|k| {
            let r = cutoff * recip.row(k).norm();
            ((fc[k] + r).ceil().max((r - fc[k]).ceil()) as i64) + 1
        })
    };

    let mut sites = Vec::new();
    for n0 in -reach[0]..=reach[0] {
        for n1 in -reach[1]..=reach[1] {
            for n2 in -reach[2]..=reach[2] {
                let home = (n0, n1, n2) == (0, 0, 0);
                let t = cell.vector(0) * n0 as f64 + cell.vector(1) * n1 as f64 + cell.vector(2) * n2 as f64;
                for (i, p) in cart.iter().enumerate() {
                    if home && i == vacancy {
                        continue;
                    }
                    let position = p + t;
                    if (position - center).norm() > cutoff {
                        continue;
                    }
                    let (species, region) = if home {
                        let s = if i == substitution { defect.species.as_str() } else { symbols[i] };
                        (s, Region::InCell)
                    } else {
                        (symbols[i], Region::Support)
                    };
                    sites.push(Site { position, species: species.to_string(), region, index: i });
                }
            }
        }
    }

    let mut set = SiteSet { sites, defect_center: center, cutoff_radius: cutoff, cell: cell.clone(), warnings: Vec::new() };
    finalize(&mut set, basis.len())?;
    Ok(set)
}

/// Moves in-cell sites onto the nearest atom of a relaxed roster and adopts its
/// index and species; support sites keep ideal positions.
pub fn apply_relaxed_positions(set: &mut SiteSet, relaxed: &AtomRoster, max_shift: f64) -> Result<()> {
    let cell = set.cell.clone();
    let symbols = relaxed.symbols();
    let atoms: Vec<Vec3> = relaxed.positions().iter().map(|f| cell.to_cartesian(f)).collect();
    let mut taken = vec![false; atoms.len()];
    for site in set.sites.iter_mut().filter(|s| s.region == Region::InCell) {
        let (best, shift) = atoms
            .iter()
            .enumerate()
            .map(|(k, a)| (k, cell.minimum_image(&(a - site.position))))
            .min_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
            .ok_or_else(|| Error::InconsistentInput("relaxed roster is empty".into()))?;
        if shift.norm() > max_shift {
            return Err(Error::InconsistentInput(format!(
                "no relaxed atom within {max_shift} Å of in-cell site {} (nearest {:.3} Å)",
                site.index,
                shift.norm()
            )));
        }
        if std::mem::replace(&mut taken[best], true) {
            return Err(Error::InconsistentInput(format!("relaxed atom {best} matches two sites")));
        }
        site.position += shift;
        site.species = symbols[best].to_string();
        site.index = best;
    }
    let inside = (set.cutoff_radius - max_shift).max(0.0);
    if let Some(k) = (0..atoms.len()).find(|&k| !taken[k] && (atoms[k] - set.defect_center).norm() < inside) {
        return Err(Error::InconsistentInput(format!("relaxed atom {k} matches no lattice site")));
    }
    set.sites.retain(|s| s.region == Region::Support || (s.position - set.defect_center).norm() <= set.cutoff_radius);
    finalize(set, relaxed.len())
}

/// Region of `position`: in-cell iff its fractional coordinates lie in `[0,1)`.
pub fn classify_site(set: &SiteSet, position: &Vec3) -> Result<Region> {
    let distance = (position - set.defect_center).norm();
    if distance > set.cutoff_radius {
        return Err(Error::OutOfDomain { distance, cutoff: set.cutoff_radius });
    }
    Ok(if set.cell.contains(position) { Region::InCell } else { Region::Support })
}

fn match_site(cell: &CellGeometry, basis: &AtomRoster, frac: &Vec3, what: &str) -> Result<usize> {
    let target = cell.to_cartesian(frac);
    basis
        .positions()
        .iter()
        .position(|f| cell.minimum_image(&(cell.to_cartesian(f) - target)).norm() < DUPLICATE_TOLERANCE)
        .ok_or_else(|| Error::BadDefectSpec(format!("{what} position {frac:?} matches no basis site")))
}

fn finalize(set: &mut SiteSet, roster_len: usize) -> Result<()> {
    let c = set.defect_center;
    let key = |s: &Site| (s.position - c).norm();
    set.sites.sort_by(|a, b| {
        key(a)
            .total_cmp(&key(b))
            .then_with(|| lex(&a.position, &b.position))
    });
    let mut next = roster_len;
    for s in set.sites.iter_mut().filter(|s| s.region == Region::Support) {
        s.index = next;
        next += 1;
    }
    check_duplicates(&set.sites)?;
    set.warnings.clear();
    if next == roster_len {
        log::warn!("no support sites within {} Å of the defect", set.cutoff_radius);
        set.warnings.push(LatticeWarning::EmptySupport);
    }
    Ok(())
}

fn lex(a: &Vec3, b: &Vec3) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z))
}

fn check_duplicates(sites: &[Site]) -> Result<()> {
    let bucket = |p: &Vec3| -> [i64; 3] { std::array::from_fn(|k| (p[k] / DUPLICATE_TOLERANCE).floor() as i64) };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::with_capacity(sites.len());
    for (n, s) in sites.iter().enumerate() {
        let b = bucket(&s.position);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(others) = grid.get(&[b[0] + dx, b[1] + dy, b[2] + dz]) {
                        for &m in others {
                            if (sites[m].position - s.position).norm() < DUPLICATE_TOLERANCE {
                                return Err(Error::DuplicateSite {
                                    first: sites[m].index,
                                    second: s.index,
                                    tolerance: DUPLICATE_TOLERANCE,
                                });
                            }
                        }
                    }
                }
            }
        }
        grid.entry(b).or_default().push(n);
    }
    Ok(())
}
