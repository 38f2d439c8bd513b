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

//! Contact-table ingestion: per-site Fermi-contact scalars and one-center tensors.

use std::collections::BTreeMap;
use std::io::Read;

use crate::error::{Error, Result};
use crate::geometry::Mat3;

#[derive(Clone, Debug, PartialEq)]
pub struct ContactEntry {
    /// Fermi-contact coupling, MHz.
    pub fermi_contact: f64,
    /// One-center dipolar correction, MHz; symmetric.
    pub one_center: Option<Mat3>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContactTable {
    pub entries: BTreeMap<usize, ContactEntry>,
    pub warnings: Vec<String>,
}

impl ContactTable {
    pub fn get(&self, site: usize) -> Option<&ContactEntry> {
        self.entries.get(&site)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads `site_index, fc_MHz[, oc_xx, oc_xy, …, oc_zz]` rows keyed to the
/// in-cell roster. A non-numeric first row is a header; `#` starts a comment.
pub fn ingest_contact_table<R: Read>(reader: R, roster_len: usize) -> Result<ContactTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut table = ContactTable::default();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(n as u64 + 1, |p| p.line());
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if n == 0 && rec.get(0).is_some_and(|f| f.parse::<usize>().is_err()) {
            continue;
        }
        if rec.len() != 2 && rec.len() != 11 {
            return Err(Error::BadContactTable(format!(
                "line {line}: expected 2 or 11 fields, found {}",
                rec.len()
            )));
        }
        let index: usize = rec[0]
            .parse()
            .map_err(|_| Error::BadContactTable(format!("line {line}: bad site index {:?}", &rec[0])))?;
        if index >= roster_len {
            return Err(Error::BadContactTable(format!(
                "line {line}: site {index} outside roster of {roster_len}"
            )));
        }
        let nums: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::BadContactTable(format!("line {line}: non-numeric or non-finite value")))?;
        let one_center = if nums.len() == 10 {
            let m = Mat3::from_row_slice(&nums[1..]);
            let sym = (m + m.transpose()) * 0.5;
            if sym != m {
                let msg = format!("site {index}: one-center tensor symmetrized");
                log::warn!("{msg}");
                table.warnings.push(msg);
            }
            Some(sym)
        } else {
            None
        };
        let entry = ContactEntry { fermi_contact: nums[0], one_center };
        if table.entries.insert(index, entry).is_some() {
            return Err(Error::BadContactTable(format!("line {line}: site {index} listed twice")));
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_single_row() {
        assert!(ingest_contact_table("".as_bytes(), 10).unwrap().is_empty());
        let t = ingest_contact_table("site_index,fc_MHz\n0,130\n".as_bytes(), 10).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get(0).unwrap().fermi_contact, 130.0);
        assert!(t.get(0).unwrap().one_center.is_none());
    }

    #[test]
    fn one_center_is_symmetrized() {
        let t = ingest_contact_table("3, -2.5, 1,2,3, 4,5,6, 7,8,9\n".as_bytes(), 4).unwrap();
        let m = t.get(3).unwrap().one_center.unwrap();
        assert_eq!(m, Mat3::new(1.0, 3.0, 5.0, 3.0, 5.0, 7.0, 5.0, 7.0, 9.0));
        assert_eq!(t.warnings.len(), 1);
        let s = ingest_contact_table("1,0,1,2,3,2,5,6,3,6,9\n".as_bytes(), 4).unwrap();
        assert_eq!(s.get(1).unwrap().one_center.unwrap(), Mat3::new(1.0, 2.0, 3.0, 2.0, 5.0, 6.0, 3.0, 6.0, 9.0));
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn errors() {
        let bad = |s: &str| matches!(ingest_contact_table(s.as_bytes(), 4), Err(Error::BadContactTable(_)));
        assert!(bad("4,1.0\n"));
        assert!(bad("0,1.0,2.0\n"));
        assert!(bad("0,abc\n"));
        assert!(bad("0,1\n0,2\n"));
        assert!(bad("0,NaN\n"));
    }
}
