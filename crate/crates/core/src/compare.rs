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

//! Experimental datasets, spin positioning and error metrics.

use std::cmp::Ordering;
use std::io::Read;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::summation::neumaier_sum;
use crate::table::TableRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Quantity {
    #[serde(rename = "A_z")]
    Az,
    #[serde(rename = "A_zz")]
    Azz,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Az => "A_z",
            Quantity::Azz => "A_zz",
        }
    }

    /// The matching column of a tensor-table row.
    pub fn of(&self, row: &TableRow) -> f64 {
        match self {
            Quantity::Az => row.a_z,
            Quantity::Azz => row.a_zz,
        }
    }
}

impl std::str::FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A_z" | "Az" => Ok(Quantity::Az),
            "A_zz" | "Azz" => Ok(Quantity::Azz),
            _ => Err(Error::BadDataset(format!("unknown quantity {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DatasetTag {
    I,
    II,
    III,
    #[serde(rename = "user")]
    User,
}

impl DatasetTag {
    /// Quantity the tag implies, if any.
    pub fn quantity(&self) -> Option<Quantity> {
        match self {
            DatasetTag::I => Some(Quantity::Az),
            DatasetTag::II | DatasetTag::III => Some(Quantity::Azz),
            DatasetTag::User => None,
        }
    }
}

impl std::str::FromStr for DatasetTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "1" => Ok(DatasetTag::I),
            "II" | "2" => Ok(DatasetTag::II),
            "III" | "3" => Ok(DatasetTag::III),
            "user" => Ok(DatasetTag::User),
            _ => Err(Error::BadDataset(format!("unknown dataset tag {s:?}"))),
        }
    }
}

/// How theory and experiment signs are reconciled at comparison time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SignConvention {
    /// Compare magnitudes.
    #[default]
    Magnitude,
    /// Compare signed values.
    Signed,
}

impl SignConvention {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            SignConvention::Magnitude => x.abs(),
            SignConvention::Signed => x,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentalRecord {
    pub id: String,
    pub quantity: Quantity,
    /// As published, MHz.
    pub value: f64,
    pub uncertainty: f64,
    pub position: Option<Vec3>,
    pub tag: DatasetTag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub tag: DatasetTag,
    pub records: Vec<ExperimentalRecord>,
    /// Records whose sign differs from the positive-theory convention.
    pub flips: usize,
}

impl Dataset {
    pub fn quantity(&self) -> Option<Quantity> {
        self.records.first().map(|r| r.quantity).or(self.tag.quantity())
    }
}

/// Reads `id, quantity, value_MHz, unc_MHz[, x, y, z]`; a first row whose
/// value column is not numeric is a header.
pub fn load_dataset<R: Read>(reader: R, tag: DatasetTag) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records: Vec<ExperimentalRecord> = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(n as u64 + 1, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if n == 0 && rec.get(2).is_some_and(|v| v.parse::<f64>().is_err()) {
            continue;
        }
        let bad = |msg: String| Error::BadDataset(format!("line {line}: {msg}"));
        if rec.len() != 4 && rec.len() != 7 {
            return Err(bad(format!("expected 4 or 7 fields, found {}", rec.len())));
        }
        let quantity: Quantity = rec[1].parse()?;
        let value: f64 = rec[2].parse().map_err(|_| bad(format!("bad value {:?}", &rec[2])))?;
        let uncertainty: f64 = rec[3].parse().map_err(|_| bad(format!("bad uncertainty {:?}", &rec[3])))?;
        if !value.is_finite() || !(uncertainty >= 0.0 && uncertainty.is_finite()) {
            return Err(bad(format!("value {value} ± {uncertainty}: uncertainty must be finite and non-negative")));
        }
        let position = if rec.len() == 7 {
            let xyz: Vec<&str> = (4..7).map(|k| &rec[k]).collect();
            if xyz.iter().all(|s| s.is_empty()) {
                None
            } else {
                let v: Vec<f64> = xyz
                    .iter()
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad(format!("incomplete position {xyz:?}")))?;
                Some(Vec3::new(v[0], v[1], v[2]))
            }
        } else {
            None
        };
        if let Some(expected) = tag.quantity() {
            if quantity != expected {
                return Err(bad(format!("data set {tag:?} holds {} values, found {}", expected.name(), quantity.name())));
            }
        }
        if let Some(first) = records.first() {
            if first.quantity != quantity {
                return Err(bad("mixed quantities in one data set".into()));
            }
        }
        records.push(ExperimentalRecord { id: rec[0].to_string(), quantity, value, uncertainty, position, tag });
    }
    let flips = records.iter().filter(|r| r.value < 0.0).count();
    Ok(Dataset { tag, records, flips })
}

/// A theory value at a lattice site.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryEntry {
    pub site: usize,
    pub position: [f64; 3],
    pub distance: f64,
    pub value: f64,
}

pub fn theory_from_table(rows: &[TableRow], quantity: Quantity) -> Vec<TheoryEntry> {
    rows.iter()
        .map(|r| TheoryEntry {
            site: r.site,
            position: [r.position.x, r.position.y, r.position.z],
            distance: r.distance,
            value: quantity.of(r),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchOptions {
    /// Margin multiplier `k`.
    pub k: f64,
    /// Relative theory tolerance, applied to the experimental magnitude.
    pub theory_tolerance: f64,
    pub sign: SignConvention,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self { k: 3.0, theory_tolerance: 0.02, sign: SignConvention::Magnitude }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Candidate {
    pub site: usize,
    pub position: [f64; 3],
    pub distance: f64,
    pub theory: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchResult {
    pub id: String,
    pub experiment: f64,
    pub margin: f64,
    /// Sites within the margin, closest value first.
    pub candidates: Vec<Candidate>,
    /// Best candidate, or the closest site when nothing is within the margin.
    pub best: Option<Candidate>,
    pub within_margin: bool,
    /// The best residual is shared by distinct theory values.
    pub tie: bool,
}

fn candidate_order(a: &Candidate, b: &Candidate) -> Ordering {
    a.residual
        .total_cmp(&b.residual)
        .then(a.distance.total_cmp(&b.distance))
        .then(a.site.cmp(&b.site))
}

/// Assigns each record the sites whose theory value lies within
/// `k·(uncertainty + theory_tolerance·|value|)`. Results are ordered by id.
pub fn position_spins(records: &[ExperimentalRecord], theory: &[TheoryEntry], opts: &MatchOptions) -> Vec<MatchResult> {
    let mut out: Vec<MatchResult> = records
        .iter()
        .map(|r| {
            let e = opts.sign.apply(r.value);
            let margin = opts.k * (r.uncertainty + opts.theory_tolerance * e.abs());
            let mut all: Vec<Candidate> = theory
                .iter()
                .map(|t| {
                    let v = opts.sign.apply(t.value);
                    Candidate { site: t.site, position: t.position, distance: t.distance, theory: v, residual: (v - e).abs() }
                })
                .collect();
            all.sort_by(candidate_order);
            let best = all.first().cloned();
            let candidates: Vec<Candidate> = all.into_iter().take_while(|c| c.residual <= margin).collect();
            let tie = match candidates.first() {
                Some(first) => {
                    let eps = 1e-12 * e.abs().max(1.0);
                    candidates
                        .iter()
                        .take_while(|c| c.residual - first.residual <= eps)
                        .any(|c| (c.theory - first.theory).abs() > eps)
                }
                None => false,
            };
            MatchResult {
                id: r.id.clone(),
                experiment: e,
                margin,
                within_margin: !candidates.is_empty(),
                candidates,
                best,
                tie,
            }
        })
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositionMatch {
    pub id: String,
    pub experiment: f64,
    pub site: Option<usize>,
    pub theory: Option<f64>,
    /// Distance from the record position to the nearest site, Å.
    pub offset: f64,
}

/// Nearest-site assignment for records carrying positions.
pub fn match_by_position(
    records: &[ExperimentalRecord],
    theory: &[TheoryEntry],
    tolerance: f64,
    sign: SignConvention,
) -> (Vec<PositionMatch>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut out: Vec<PositionMatch> = records
        .iter()
        .filter_map(|r| r.position.map(|p| (r, p)))
        .map(|(r, p)| {
            let nearest = theory
                .iter()
                .map(|t| (t, (Vec3::from(t.position) - p).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.site.cmp(&b.0.site)));
            let offset = nearest.map_or(f64::INFINITY, |n| n.1);
            let hit = nearest.filter(|n| n.1 <= tolerance);
            if hit.is_none() {
                let msg = format!("record {}: nearest site is {offset:.3} Å away (PositionMismatch)", r.id);
                log::warn!("{msg}");
                warnings.push(msg);
            }
            PositionMatch {
                id: r.id.clone(),
                experiment: sign.apply(r.value),
                site: hit.map(|n| n.0.site),
                theory: hit.map(|n| sign.apply(n.0.value)),
                offset,
            }
        })
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    (out, warnings)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorMetrics {
    pub count: usize,
    /// Percent.
    pub mape: f64,
    /// Percent; same formula as MAPE.
    pub mare: f64,
    /// Percent.
    pub msre: f64,
    /// Absolute relative error per included pair, as fractions.
    pub are: Vec<f64>,
    /// Positions of pairs dropped for a zero experimental value.
    pub excluded: Vec<usize>,
}

/// MAPE/MARE and MSRE over `(theory, experiment)` pairs.
pub fn error_metrics(pairs: &[(f64, f64)]) -> ErrorMetrics {
    let mut are = Vec::with_capacity(pairs.len());
    let mut sre = Vec::with_capacity(pairs.len());
    let mut excluded = Vec::new();
    for (n, &(t, e)) in pairs.iter().enumerate() {
        if e == 0.0 {
            log::warn!("pair {n}: zero experimental value excluded from metrics");
            excluded.push(n);
            continue;
        }
        are.push((t - e).abs() / e.abs());
        sre.push((t - e) / e);
    }
    let count = are.len();
    let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { neumaier_sum(v.iter().copied()) / v.len() as f64 * 100.0 };
    let mape = mean(&are);
    ErrorMetrics { count, mape, mare: mape, msre: mean(&sre), are, excluded }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theory(values: &[(usize, f64, f64)]) -> Vec<TheoryEntry> {
        values
            .iter()
            .map(|&(site, value, distance)| TheoryEntry { site, position: [distance, 0.0, 0.0], distance, value })
            .collect()
    }

    fn rec(id: &str, value: f64, unc: f64) -> ExperimentalRecord {
        ExperimentalRecord { id: id.into(), quantity: Quantity::Azz, value, uncertainty: unc, position: None, tag: DatasetTag::II }
    }

    #[test]
    fn loads_rows() {
        let d = load_dataset("id,quantity,value_MHz,unc_MHz,x,y,z\nn1,A_zz,-0.30,0.001,,,\n".as_bytes(), DatasetTag::II).unwrap();
        assert_eq!(d.records.len(), 1);
        assert_eq!(d.records[0].value, -0.30);
        assert_eq!(d.records[0].position, None);
        assert_eq!(d.flips, 1);
        assert!(load_dataset("".as_bytes(), DatasetTag::I).unwrap().records.is_empty());
        let p = load_dataset("a,A_zz,1.0,0.1,1,2,3\n".as_bytes(), DatasetTag::III).unwrap();
        assert_eq!(p.records[0].position, Some(Vec3::new(1.0, 2.0, 3.0)));
    }

    #[test]
    fn dataset_errors() {
        let bad = |s: &str, t| matches!(load_dataset(s.as_bytes(), t), Err(Error::BadDataset(_)));
        assert!(bad("a,A_zz,1.0,-0.1\n", DatasetTag::II));
        assert!(bad("a,A_zz,1.0,0.1\nb,A_z,1.0,0.1\n", DatasetTag::User));
        assert!(bad("a,A_zz,1.0,0.1\n", DatasetTag::I));
        assert!(bad("a,A_zz,1.0,0.1,1,,\n", DatasetTag::II));
        assert!(bad("a,B,1.0,0.1\n", DatasetTag::User));
    }

    #[test]
    fn closest_candidate_first() {
        let t = theory(&[(0, 1.0, 2.0), (1, 2.0, 3.0)]);
        let m = position_spins(&[rec("r", 1.9, 0.2)], &t, &MatchOptions::default());
        assert_eq!(m[0].candidates[0].site, 1);
        assert!(m[0].within_margin && !m[0].tie);
    }

    #[test]
    fn midway_is_a_tie_broken_by_distance() {
        let t = theory(&[(0, 2.0, 3.0), (1, 1.0, 5.0)]);
        let opts = MatchOptions { k: 1.0, theory_tolerance: 0.0, sign: SignConvention::Magnitude };
        let m = position_spins(&[rec("r", 1.5, 0.5)], &t, &opts);
        assert!(m[0].tie);
        assert_eq!(m[0].candidates.iter().map(|c| c.site).collect::<Vec<_>>(), [0, 1]);
    }

    #[test]
    fn symmetric_sites_all_listed() {
        let t = theory(&[(5, 1.0, 4.0), (6, 1.0, 4.0), (7, 1.0, 4.0), (8, 3.0, 1.0)]);
        let m = position_spins(&[rec("r", 1.01, 0.01)], &t, &MatchOptions::default());
        assert_eq!(m[0].candidates.len(), 3);
        assert!(!m[0].tie);
    }

    #[test]
    fn unmatched_reports_nearest() {
        let t = theory(&[(0, 1.0, 2.0)]);
        let m = position_spins(&[rec("r", 5.0, 0.01)], &t, &MatchOptions::default());
        assert!(!m[0].within_margin);
        assert_eq!(m[0].best.as_ref().unwrap().site, 0);
    }

    #[test]
    fn sign_flip_is_ignored_by_default() {
        let t = theory(&[(0, 1.0, 2.0)]);
        let m = position_spins(&[rec("r", -1.0, 0.01)], &t, &MatchOptions::default());
        assert_eq!(m[0].candidates[0].residual, 0.0);
    }

    #[test]
    fn position_matching() {
        let t = theory(&[(0, 1.0, 2.0), (1, 2.0, 3.0)]);
        let mut a = rec("a", 1.0, 0.1);
        a.position = Some(Vec3::new(2.1, 0.0, 0.0));
        let mut b = rec("b", 1.0, 0.1);
        b.position = Some(Vec3::new(2.5, 0.0, 0.0));
        let (m, w) = match_by_position(&[b, a], &t, 0.3, SignConvention::Magnitude);
        assert_eq!(m[0].site, Some(0));
        assert_eq!(m[1].site, None);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn metric_examples() {
        let m = error_metrics(&[(1.0, 1.0), (2.0, 2.0)]);
        assert_eq!((m.mape, m.msre), (0.0, 0.0));
        let m = error_metrics(&[(1.1, 1.0)]);
        assert!((m.mape - 10.0).abs() < 1e-12 && (m.msre - 10.0).abs() < 1e-12);
        let m = error_metrics(&[(1.1, 1.0), (0.9, 1.0)]);
        assert!((m.mape - 10.0).abs() < 1e-12 && m.msre.abs() < 1e-12);
        assert_eq!(m.mare, m.mape);
        let m = error_metrics(&[(1.0, 0.0), (1.0, 2.0)]);
        assert_eq!((m.count, m.excluded.clone()), (1, vec![0]));
        assert!(error_metrics(&[]).mape.is_nan());
    }
}
