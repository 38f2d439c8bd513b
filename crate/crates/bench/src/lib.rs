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

//! Shared fixtures for the benchmarks.

use hfcalc_core::{CellGeometry, VolumetricGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random density on an `n³` grid in a cubic cell of edge `edge`.
pub fn random_grid(n: usize, edge: f64, seed: u64) -> VolumetricGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n * n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    VolumetricGrid::new(CellGeometry::cubic(edge).expect("positive edge"), [n; 3], values).expect("length matches")
}
