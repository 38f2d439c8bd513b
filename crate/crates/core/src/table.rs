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

//! Per-site tensor tables.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};
use crate::lattice::{Region, SiteSet};

pub const TENSOR_COLUMNS: [&str; 21] = [
    "site", "region", "species", "x", "y", "z", "distance", "axx", "axy", "axz", "ayx", "ayy", "ayz", "azx", "azy",
    "azz", "A_zz", "A_z", "fermi_contact", "contact", "one_center",
];

pub const SITE_COLUMNS: [&str; 7] = ["site", "region", "species", "x", "y", "z", "distance"];

#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub site: usize,
    pub region: Region,
    pub species: String,
    pub position: Vec3,
    pub distance: f64,
    pub a: Mat3,
    pub a_zz: f64,
    pub a_z: f64,
    pub fermi_contact: f64,
    pub contact_present: bool,
    pub one_center_present: bool,
}

/// `key: value` pairs written as leading `#` lines.
pub type Metadata = Vec<(String, String)>;

fn flag(present: bool) -> &'static str {
    if present {
        "present"
    } else {
        "absent"
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn write_meta<W: Write>(meta: &Metadata, out: &mut W) -> Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k}: {v}")?;
    }
    Ok(())
}

/// Writes rows sorted by distance, then site index.
pub fn write_tensor_table<W: Write>(rows: &[TableRow], meta: &Metadata, mut out: W) -> Result<()> {
    write_meta(meta, &mut out)?;
    let mut order: Vec<&TableRow> = rows.iter().collect();
    order.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.site.cmp(&b.site)));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TENSOR_COLUMNS)?;
    for r in order {
        let mut rec = vec![r.site.to_string(), r.region.name().to_string(), r.species.clone()];
        rec.extend([r.position.x, r.position.y, r.position.z, r.distance].map(num));
        for i in 0..3 {
            for j in 0..3 {
                rec.push(num(r.a[(i, j)]));
            }
        }
        rec.extend([r.a_zz, r.a_z, r.fermi_contact].map(num));
        rec.push(flag(r.contact_present).into());
        rec.push(flag(r.one_center_present).into());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Positions-only export of a site set.
pub fn write_site_table<W: Write>(set: &SiteSet, meta: &Metadata, mut out: W) -> Result<()> {
    write_meta(meta, &mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SITE_COLUMNS)?;
    for s in &set.sites {
        let mut rec = vec![s.index.to_string(), s.region.name().to_string(), s.species.clone()];
        rec.extend([s.position.x, s.position.y, s.position.z, set.distance(s)].map(num));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_tensor_table`].
pub fn read_tensor_table<R: BufRead>(mut reader: R) -> Result<(Metadata, Vec<TableRow>)> {
    let mut meta = Vec::new();
    let mut body = String::new();
    let mut line = String::new();
    while reader.read_line(&mut line)? > 0 {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once(':') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else {
            body.push_str(&line);
        }
        line.clear();
    }
    let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != TENSOR_COLUMNS {
        return Err(Error::BadTable(format!("unexpected columns {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| Error::BadTable(format!("line {line}: bad {what}"));
        let f = |k: usize| rec[k].parse::<f64>().map_err(|_| bad(TENSOR_COLUMNS[k]));
        let present = |k: usize| match &rec[k] {
            "present" => Ok(true),
            "absent" => Ok(false),
            _ => Err(bad(TENSOR_COLUMNS[k])),
        };
        let mut a = Mat3::zeros();
        for n in 0..9 {
            a[(n / 3, n % 3)] = f(7 + n)?;
        }
        rows.push(TableRow {
            site: rec[0].parse().map_err(|_| bad("site"))?,
            region: rec[1].parse()?,
            species: rec[2].to_string(),
            position: Vec3::new(f(3)?, f(4)?, f(5)?),
            distance: f(6)?,
            a,
            a_zz: f(16)?,
            a_z: f(17)?,
            fermi_contact: f(18)?,
            contact_present: present(19)?,
            one_center_present: present(20)?,
        });
    }
    Ok((meta, rows))
}
