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

//! Hyperfine tensors from dipolar integrals, contact terms and one-center corrections.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::dipole::DipoleTensor;
use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};
use crate::lattice::Region;

const AXIS_TOLERANCE: f64 = 1e-9;

/// Default constants, embedded at build time.
pub const CODATA_2018: &str = include_str!("../data/codata2018.toml");

#[derive(Clone, Debug, PartialEq)]
pub struct NuclearSpecies {
    pub symbol: String,
    /// Gyromagnetic ratio, rad s⁻¹ T⁻¹.
    pub gamma: f64,
    pub spin: f64,
}

#[derive(Deserialize)]
struct RawConstants {
    provenance: String,
    gamma_e: f64,
    hbar: f64,
    planck: f64,
    mu0: f64,
    gamma: BTreeMap<String, f64>,
    #[serde(default)]
    spin: BTreeMap<String, f64>,
}

/// Versioned physical constants.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantsTable {
    pub provenance: String,
    /// Electron gyromagnetic ratio magnitude, rad s⁻¹ T⁻¹.
    pub gamma_e: f64,
    pub hbar: f64,
    pub planck: f64,
    pub mu0: f64,
    pub nuclei: BTreeMap<String, NuclearSpecies>,
}

impl ConstantsTable {
    pub fn codata2018() -> Self {
        Self::from_toml_str(CODATA_2018).expect("embedded constants table")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConstants = toml::from_str(text).map_err(|e| Error::BadConstants(e.to_string()))?;
        for (name, v) in [("gamma_e", raw.gamma_e), ("hbar", raw.hbar), ("planck", raw.planck), ("mu0", raw.mu0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::BadConstants(format!("{name} = {v} must be positive")));
            }
        }
        let mut nuclei = BTreeMap::new();
        for (symbol, gamma) in raw.gamma {
            if !gamma.is_finite() || gamma == 0.0 {
                return Err(Error::BadConstants(format!("gyromagnetic ratio of {symbol} is {gamma}")));
            }
            let spin = raw.spin.get(&symbol).copied().unwrap_or(0.5);
            nuclei.insert(symbol.clone(), NuclearSpecies { symbol, gamma, spin });
        }
        Ok(Self {
            provenance: raw.provenance,
            gamma_e: raw.gamma_e,
            hbar: raw.hbar,
            planck: raw.planck,
            mu0: raw.mu0,
            nuclei,
        })
    }

    pub fn species(&self, symbol: &str) -> Result<&NuclearSpecies> {
        self.nuclei
            .get(symbol)
            .ok_or_else(|| Error::InconsistentInput(format!("no gyromagnetic ratio for species {symbol:?}")))
    }

    /// MHz per Å⁻³ of dipolar integral:
    /// `(1/2S)(μ0/4π) γ_e γ_J ħ² · 10³⁰ / (h · 10⁶)`.
    pub fn dipolar_prefactor(&self, spin: &SpinSystem, species: &NuclearSpecies) -> f64 {
        let mu0_over_4pi = self.mu0 / (4.0 * std::f64::consts::PI);
        mu0_over_4pi * self.gamma_e * species.gamma * self.hbar * self.hbar * 1e30 / (self.planck * 1e6)
            / (2.0 * spin.s)
    }
}

/// Electron spin and the reporting axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinSystem {
    pub s: f64,
    pub axis: Vec3,
}

impl SpinSystem {
    pub fn new(s: f64, axis: Vec3) -> Result<Self> {
        let two_s = 2.0 * s;
        if !(two_s >= 1.0 && two_s.fract() == 0.0) {
            return Err(Error::InconsistentInput(format!("spin S = {s}: 2S must be a positive integer")));
        }
        check_axis(&axis)?;
        Ok(Self { s, axis })
    }

    /// S = 1 along [111].
    pub fn nv() -> Self {
        Self { s: 1.0, axis: Vec3::new(1.0, 1.0, 1.0) / 3f64.sqrt() }
    }
}

/// Which terms were missing and treated as zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TensorFlags {
    pub contact_absent: bool,
    pub one_center_absent: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperfineTensor {
    /// Full tensor, MHz.
    pub a: Mat3,
    pub fermi_contact: f64,
    pub dipolar: Mat3,
    pub one_center: Mat3,
    pub flags: TensorFlags,
}

impl HyperfineTensor {
    /// Same tensor in another unit; `1e3` turns MHz into kHz.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            a: self.a * factor,
            fermi_contact: self.fermi_contact * factor,
            dipolar: self.dipolar * factor,
            one_center: self.one_center * factor,
            flags: self.flags,
        }
    }
}

/// Reporting unit of hyperfine couplings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
pub enum Unit {
    #[default]
    #[serde(rename = "MHz")]
    MHz,
    #[serde(rename = "kHz")]
    KHz,
}

impl Unit {
    /// Multiplier from MHz.
    pub fn factor(&self) -> f64 {
        match self {
            Unit::MHz => 1.0,
            Unit::KHz => 1e3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Unit::MHz => "MHz",
            Unit::KHz => "kHz",
        }
    }
}

impl std::str::FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MHz" | "mhz" => Ok(Unit::MHz),
            "kHz" | "khz" => Ok(Unit::KHz),
            _ => Err(Error::InconsistentInput(format!("unknown unit {s:?}"))),
        }
    }
}

/// Shared inputs of [`assemble_tensor`].
#[derive(Clone, Debug)]
pub struct AssemblyContext<'a> {
    pub constants: &'a ConstantsTable,
    pub spin: SpinSystem,
    /// Accept contact terms on support sites.
    pub allow_support_contact: bool,
}

/// `a = fc·I + (prefactor)·w + oc`, in MHz.
pub fn assemble_tensor(
    w: &DipoleTensor,
    fc: Option<f64>,
    oc: Option<&Mat3>,
    region: Region,
    species: &NuclearSpecies,
    ctx: &AssemblyContext<'_>,
) -> Result<HyperfineTensor> {
    if region == Region::Support && !ctx.allow_support_contact && (fc.is_some() || oc.is_some()) {
        return Err(Error::InconsistentInput(
            "contact or one-center term given for a support site".into(),
        ));
    }
    let dipolar = w.w * ctx.constants.dipolar_prefactor(&ctx.spin, species);
    let fermi_contact = fc.unwrap_or(0.0);
    let one_center = oc.copied().unwrap_or_else(Mat3::zeros);
    Ok(HyperfineTensor {
        a: Mat3::identity() * fermi_contact + dipolar + one_center,
        fermi_contact,
        dipolar,
        one_center,
        flags: TensorFlags { contact_absent: fc.is_none(), one_center_absent: oc.is_none() },
    })
}

fn check_axis(axis: &Vec3) -> Result<()> {
    let n = axis.norm();
    if (n - 1.0).abs() > AXIS_TOLERANCE || !n.is_finite() {
        return Err(Error::BadAxis(n));
    }
    Ok(())
}

/// `√(A_xz² + A_yz² + A_zz²)` in the frame whose z-axis is `axis`.
pub fn splitting_az(a: &Mat3, axis: &Vec3) -> Result<f64> {
    check_axis(axis)?;
    Ok((a * axis).norm())
}

/// `A_zz` in the frame whose z-axis is `axis`.
pub fn a_zz(a: &Mat3, axis: &Vec3) -> Result<f64> {
    check_axis(axis)?;
    Ok(axis.dot(&(a * axis)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dipole::Backend;

    fn ctx(c: &ConstantsTable) -> AssemblyContext<'_> {
        AssemblyContext { constants: c, spin: SpinSystem::nv(), allow_support_contact: false }
    }

    #[test]
    fn unit_conversion_matches_hand_value() {
        let c = ConstantsTable::codata2018();
        let carbon = c.species("C").unwrap();
        // (1/2)(1e-7)(1.76085963023e11)(6.728284e7)(1.054571817e-34)² 1e30 / 6.62607015e-34 / 1e6,
        // with μ0/4π = 1.00000000055e-7.
        let expect = 9.94249424573874;
        let got = c.dipolar_prefactor(&SpinSystem::nv(), carbon);
        assert!((got - expect).abs() / expect < 1e-12, "{got}");
    }

    #[test]
    fn spike_at_ten_angstrom() {
        let c = ConstantsTable::codata2018();
        let w = DipoleTensor::from_components([-1e-3, -1e-3, 2e-3, 0.0, 0.0, 0.0], Vec3::zeros(), Backend::Analytic);
        let t = assemble_tensor(&w, None, None, Region::Support, c.species("C").unwrap(), &ctx(&c)).unwrap();
        assert!((t.a[(2, 2)] - 0.0198849884914775).abs() < 1e-15);
        assert!(t.flags.contact_absent && t.flags.one_center_absent);
        let z = Vec3::z();
        assert!((a_zz(&t.a, &z).unwrap() - splitting_az(&t.a, &z).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn zero_input_gives_zero() {
        let c = ConstantsTable::codata2018();
        let w = DipoleTensor::from_components([0.0; 6], Vec3::zeros(), Backend::Analytic);
        let t = assemble_tensor(&w, Some(0.0), None, Region::InCell, c.species("N").unwrap(), &ctx(&c)).unwrap();
        assert_eq!(t.a, Mat3::zeros());
        assert!(!t.flags.contact_absent);
    }

    #[test]
    fn contact_on_support_site_needs_override() {
        let c = ConstantsTable::codata2018();
        let w = DipoleTensor::from_components([0.0; 6], Vec3::zeros(), Backend::Analytic);
        let sp = c.species("C").unwrap();
        assert!(matches!(
            assemble_tensor(&w, Some(1.0), None, Region::Support, sp, &ctx(&c)),
            Err(Error::InconsistentInput(_))
        ));
        let mut relaxed = ctx(&c);
        relaxed.allow_support_contact = true;
        let t = assemble_tensor(&w, Some(1.0), None, Region::Support, sp, &relaxed).unwrap();
        assert_eq!(t.a, Mat3::identity());
    }

    #[test]
    fn splitting_examples() {
        let a = Mat3::new(0.0, 0.0, 3.0, 0.0, 0.0, 4.0, 3.0, 4.0, 0.0);
        assert_eq!(splitting_az(&a, &Vec3::z()).unwrap(), 5.0);
        let iso = Mat3::identity() * 2.0;
        let n = Vec3::new(1.0, 1.0, 1.0).normalize();
        assert!((splitting_az(&(iso / 2.0), &n).unwrap() - 1.0).abs() < 1e-15);
        assert!((a_zz(&iso, &n).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(a_zz(&Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0)), &Vec3::z()).unwrap(), 3.0);
        assert!(matches!(a_zz(&iso, &Vec3::new(1.0, 1.0, 0.0)), Err(Error::BadAxis(_))));
    }

    #[test]
    fn frame_rotation_oracle() {
        // Explicit rotation taking [111] to z, built from Euler-free orthonormal vectors.
        let z = Vec3::new(1.0, 1.0, 1.0).normalize();
        let x = Vec3::new(1.0, -1.0, 0.0).normalize();
        let y = z.cross(&x);
        let r = Mat3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let a = Mat3::new(1.0, 0.3, -0.2, 0.3, -2.0, 0.7, -0.2, 0.7, 1.5);
        let rotated = r * a * r.transpose();
        let col = (rotated[(0, 2)].powi(2) + rotated[(1, 2)].powi(2) + rotated[(2, 2)].powi(2)).sqrt();
        assert!((splitting_az(&a, &z).unwrap() - col).abs() < 1e-14);
        assert!((a_zz(&a, &z).unwrap() - rotated[(2, 2)]).abs() < 1e-14);
        assert!((splitting_az(&a, &z).unwrap() - z.dot(&(a * a * z)).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn constants_table_validation() {
        assert!(ConstantsTable::from_toml_str("provenance='x'\ngamma_e=0\nhbar=1\nplanck=1\nmu0=1\n[gamma]\n").is_err());
        assert!(ConstantsTable::from_toml_str("provenance='x'\ngamma_e=1\nhbar=1\nplanck=1\nmu0=1\n[gamma]\nC=0.0\n").is_err());
        assert!(ConstantsTable::from_toml_str("not toml [").is_err());
        let c = ConstantsTable::codata2018();
        assert_eq!(c.species("N").unwrap().spin, 1.0);
        assert!(c.species("Xx").is_err());
        assert!(SpinSystem::new(0.75, Vec3::z()).is_err());
        assert!(SpinSystem::new(1.5, Vec3::z()).is_ok());
    }
}
