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

use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed volumetric grid: {0}")]
    MalformedGrid(String),
    #[error("bad cell geometry: {0}")]
    BadGeometry(String),
    #[error("spin-density block requested but the file holds a single density block")]
    MissingSpinBlock,
    #[error("defect specification does not match the lattice: {0}")]
    BadDefectSpec(String),
    #[error("position {distance:.4} Å from the defect center lies beyond the {cutoff:.4} Å cutoff")]
    OutOfDomain { distance: f64, cutoff: f64 },
    #[error("sites {first} and {second} are closer than {tolerance} Å")]
    DuplicateSite { first: usize, second: usize, tolerance: f64 },
    #[error("{count} voxel(s) within 1e-6 Å of the probe and no exclusion sphere applies")]
    SingularKernel { count: usize },
    #[error("no exclusion radius configured for species {0:?}")]
    MissingExclusionRadius(Option<String>),
    #[error("padded transform needs {required} bytes, limit is {limit}; tile the probe set or use the direct backend")]
    ResourceLimit { required: usize, limit: usize },
    #[error("inconsistent input: {0}")]
    InconsistentInput(String),
    #[error("axis must be a unit vector (norm {0})")]
    BadAxis(f64),
    #[error("bad contact table: {0}")]
    BadContactTable(String),
    #[error("bad dataset: {0}")]
    BadDataset(String),
    #[error("bad density recipe: {0}")]
    BadRecipe(String),
    #[error("bad resolution: {0}")]
    BadResolution(String),
    #[error("bad constants table: {0}")]
    BadConstants(String),
    #[error("bad table: {0}")]
    BadTable(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}
