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

//! Dipolar hyperfine tensors from gridded spin densities.

pub mod compare;
pub mod contact;
pub mod dipole;
pub mod error;
pub mod geometry;
pub mod hyperfine;
pub mod lattice;
pub mod summation;
pub mod synth;
pub mod table;
pub mod volgrid;

pub use compare::{
    error_metrics, load_dataset, match_by_position, position_spins, theory_from_table, Dataset, DatasetTag, ErrorMetrics,
    ExperimentalRecord, MatchOptions, MatchResult, Quantity, SignConvention, TheoryEntry,
};
pub use contact::{ingest_contact_table, ContactEntry, ContactTable};
pub use dipole::{
    dipole_isolated_direct, dipole_isolated_direct_many, dipole_isolated_fft, dipole_periodic_image_oracle,
    dipole_periodic_recip, relative_deviation, Backend, DipoleField, DipoleTensor, ExclusionMode, ExclusionSpec,
    FftOptions, ImageSum, PeriodicReference, Probe, ShellPartial,
};
pub use error::{Error, Result};
pub use geometry::{CellGeometry, Mat3, Vec3};
pub use hyperfine::{
    a_zz, assemble_tensor, splitting_az, AssemblyContext, ConstantsTable, HyperfineTensor, NuclearSpecies, SpinSystem,
    TensorFlags, Unit,
};
pub use lattice::{classify_site, generate_site_set, DefectSpec, Region, Site, SiteSet};
pub use synth::{analytic_point_tensor, build_density, nv_like_recipe, Component, DensityRecipe, SynthDensity};
pub use table::{read_tensor_table, write_site_table, write_tensor_table, Metadata, TableRow};
pub use volgrid::{parse_volumetric, parse_volumetric_str, write_volumetric, AtomRoster, DensityBlock, VolumetricGrid};
