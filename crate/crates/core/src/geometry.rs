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

//! Periodic cell geometry.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Parallelepiped cell. Rows of `lattice` are the cell vectors in Å.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGeometry {
    lattice: Mat3,
    origin: Vec3,
    inverse: Mat3,
}

impl CellGeometry {
    pub fn new(lattice: Mat3) -> Result<Self> {
        Self::with_origin(lattice, Vec3::zeros())
    }

    pub fn with_origin(lattice: Mat3, origin: Vec3) -> Result<Self> {
        if !lattice.iter().all(|x| x.is_finite()) {
            return Err(Error::BadGeometry("non-finite lattice vector".into()));
        }
        let det = lattice.determinant();
        if !(det > 0.0) {
            return Err(Error::BadGeometry(format!(
                "lattice determinant {det} is not positive"
            )));
        }
        let inverse = lattice
            .try_inverse()
            .ok_or_else(|| Error::BadGeometry("singular lattice".into()))?;
        Ok(Self { lattice, origin, inverse })
    }

    pub fn cubic(edge: f64) -> Result<Self> {
        Self::new(Mat3::from_diagonal_element(edge))
    }

    pub fn lattice(&self) -> &Mat3 {
        &self.lattice
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    /// Cell vector `k` (0, 1 or 2).
    pub fn vector(&self, k: usize) -> Vec3 {
        self.lattice.row(k).transpose()
    }

    pub fn volume(&self) -> f64 {
        self.lattice.determinant()
    }

    /// Cartesian position of a fractional coordinate.
    pub fn to_cartesian(&self, frac: &Vec3) -> Vec3 {
        self.origin + self.lattice.transpose() * frac
    }

    pub fn to_fractional(&self, cart: &Vec3) -> Vec3 {
        self.inverse.transpose() * (cart - self.origin)
    }

    /// Reciprocal vectors without the 2π factor, as rows: `b_i · a_j = δ_ij`.
    pub fn reciprocal(&self) -> Mat3 {
        self.inverse.transpose()
    }

    /// Half-open `[0,1)³` test; fractional coordinates within 1e-12 of an
    /// integer count as on that face.
    pub fn contains(&self, cart: &Vec3) -> bool {
        self.to_fractional(cart).iter().all(|&f| {
            let f = if (f - f.round()).abs() < 1e-12 { f.round() } else { f };
            (0.0..1.0).contains(&f)
        })
    }

    pub fn shortest_vector_length(&self) -> f64 {
        (0..3).map(|k| self.vector(k).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Displacement wrapped to the nearest periodic image (exact for the
    /// reduced cells used here, a good approximation for skewed ones).
    pub fn minimum_image(&self, delta: &Vec3) -> Vec3 {
        let mut f = self.inverse.transpose() * delta;
        for x in f.iter_mut() {
            *x -= x.round();
        }
        let mut best = self.lattice.transpose() * f;
        let mut best_norm = best.norm_squared();
        for i in -1..=1 {
            for j in -1..=1 {
                for k in -1..=1 {
                    let g = Vec3::new(f.x + i as f64, f.y + j as f64, f.z + k as f64);
                    let c = self.lattice.transpose() * g;
                    let n = c.norm_squared();
                    if n < best_norm {
                        best = c;
                        best_norm = n;
                    }
                }
            }
        }
        best
    }
}
