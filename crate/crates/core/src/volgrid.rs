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

//! CHGCAR-format volumetric files.
//!
//! Layout: comment, scale factor, three lattice rows, species symbols,
//! species counts, `Direct`/`Cartesian`, one position per atom, blank line,
//! grid dimensions, then `n1*n2*n3` values with the first index fastest.
//! Raw values are density multiplied by the cell volume; they are divided by
//! the volume on read so that grids hold electrons/Å³ everywhere else.
//!
//! Spin-polarized files carry a second block (spin-up minus spin-down) after
//! the total density. Augmentation occupancies and per-atom moment lines
//! between blocks are skipped by scanning for the next dimensions line.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::{CellGeometry, Mat3, Vec3};

/// Scalar field on a regular grid spanning a periodic cell.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumetricGrid {
    cell: CellGeometry,
    dims: [usize; 3],
    values: Vec<f64>,
}

impl VolumetricGrid {
    pub fn new(cell: CellGeometry, dims: [usize; 3], values: Vec<f64>) -> Result<Self> {
        let expected = dims.iter().product::<usize>();
        if values.len() != expected {
            return Err(Error::MalformedGrid(format!(
                "{} values for dims {:?} (expected {expected})",
                values.len(),
                dims
            )));
        }
        Ok(Self { cell, dims, values })
    }

    pub fn zeros(cell: CellGeometry, dims: [usize; 3]) -> Self {
        let n = dims.iter().product();
        Self { cell, dims, values: vec![0.0; n] }
    }

    pub fn cell(&self) -> &CellGeometry {
        &self.cell
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn voxel_volume(&self) -> f64 {
        self.cell.volume() / self.len() as f64
    }

    #[inline]
    pub fn flat_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let [n1, n2, _] = self.dims;
        [flat % n1, (flat / n1) % n2, flat / (n1 * n2)]
    }

    pub fn fractional(&self, flat: usize) -> Vec3 {
        let [i, j, k] = self.unflatten(flat);
        Vec3::new(
            i as f64 / self.dims[0] as f64,
            j as f64 / self.dims[1] as f64,
            k as f64 / self.dims[2] as f64,
        )
    }

    /// Cartesian position of the grid point (voxel center) at `flat`.
    pub fn position(&self, flat: usize) -> Vec3 {
        self.cell.to_cartesian(&self.fractional(flat))
    }

    /// Grid spacing along cell vector `k`, in Å.
    pub fn spacing(&self, k: usize) -> f64 {
        self.cell.vector(k).norm() / self.dims[k] as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..3).map(|k| self.spacing(k)).fold(0.0, f64::max)
    }

    /// Integral of the field over the cell (total spin for a spin density).
    pub fn integral(&self) -> f64 {
        crate::summation::neumaier_sum(self.values.iter().copied()) * self.voxel_volume()
    }

    /// Relative deviation of the integrated spin from `2S` when it exceeds `tolerance`.
    pub fn spin_mismatch(&self, spin: f64, tolerance: f64) -> Option<f64> {
        let expected = 2.0 * spin;
        let rel = (self.integral() - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        (rel > tolerance).then_some(rel)
    }
}

/// Species and fractional positions from the structure header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AtomRoster {
    species: Vec<(String, usize)>,
    positions: Vec<Vec3>,
}

impl AtomRoster {
    pub fn new(species: Vec<(String, usize)>, positions: Vec<Vec3>) -> Result<Self> {
        let total: usize = species.iter().map(|(_, n)| n).sum();
        if total != positions.len() {
            return Err(Error::MalformedGrid(format!(
                "species counts sum to {total} but {} positions given",
                positions.len()
            )));
        }
        let positions = positions.into_iter().map(wrap_fractional).collect();
        Ok(Self { species, positions })
    }

    pub fn species(&self) -> &[(String, usize)] {
        &self.species
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Symbol of every atom, in roster order.
    pub fn symbols(&self) -> Vec<&str> {
        self.species
            .iter()
            .flat_map(|(s, n)| std::iter::repeat_n(s.as_str(), *n))
            .collect()
    }

    /// Builds a roster from per-atom symbols, grouping consecutive runs.
    pub fn from_atoms<'a>(atoms: impl IntoIterator<Item = (&'a str, Vec3)>) -> Self {
        let mut species: Vec<(String, usize)> = Vec::new();
        let mut positions = Vec::new();
        for (sym, pos) in atoms {
            match species.last_mut() {
                Some((s, n)) if s == sym => *n += 1,
                _ => species.push((sym.to_string(), 1)),
            }
            positions.push(wrap_fractional(pos));
        }
        Self { species, positions }
    }
}

fn wrap_fractional(mut f: Vec3) -> Vec3 {
    for x in f.iter_mut() {
        *x = x.rem_euclid(1.0);
        if *x >= 1.0 {
            *x = 0.0;
        }
    }
    f
}

/// Which density block to return.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DensityBlock {
    /// Second block; a single-block file is an error.
    #[default]
    Spin,
    /// Second block when present, otherwise the only block.
    SingleBlockIsSpin,
    /// First block.
    Total,
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(n, l)| (n + 1, l))
            .ok_or_else(|| Error::MalformedGrid(format!("unexpected end of file reading {what}")))
    }
}

fn parse_floats(line: &str, lineno: usize, want: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .take(want)
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::MalformedGrid(format!("line {lineno}: {e}")))?;
    if vals.len() < want {
        return Err(Error::MalformedGrid(format!(
            "line {lineno}: expected {want} numbers"
        )));
    }
    Ok(vals)
}

fn dims_line(line: &str) -> Option<[usize; 3]> {
    let mut it = line.split_whitespace();
    let d = [
        it.next()?.parse().ok()?,
        it.next()?.parse().ok()?,
        it.next()?.parse().ok()?,
    ];
    it.next().is_none().then_some(d)
}

/// Reads a CHGCAR-format stream. See the module docs for the layout.
pub fn parse_volumetric<R: BufRead>(
    mut reader: R,
    block: DensityBlock,
) -> Result<(VolumetricGrid, AtomRoster)> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_volumetric_str(&text, block)
}

pub fn parse_volumetric_str(text: &str, block: DensityBlock) -> Result<(VolumetricGrid, AtomRoster)> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    lines.next_line("comment")?;

    let (n, l) = lines.next_line("scale factor")?;
    let scale = parse_floats(l, n, 1)?[0];
    if !(scale > 0.0) {
        return Err(Error::BadGeometry(format!("line {n}: non-positive scale factor {scale}")));
    }

    let mut lattice = Mat3::zeros();
    for row in 0..3 {
        let (n, l) = lines.next_line("lattice vectors")?;
        let v = parse_floats(l, n, 3)?;
        for c in 0..3 {
            lattice[(row, c)] = v[c] * scale;
        }
    }
    let cell = CellGeometry::new(lattice)?;

    // Symbols line is optional in older files: a line of integers is the counts line.
    let (n, l) = lines.next_line("species")?;
    let tokens: Vec<&str> = l.split_whitespace().collect();
    let (symbols, counts_line) = if tokens.iter().all(|t| t.parse::<usize>().is_ok()) {
        (None, (n, l))
    } else {
        (Some(tokens.iter().map(|s| s.to_string()).collect::<Vec<_>>()), lines.next_line("species counts")?)
    };
    let counts: Vec<usize> = counts_line
        .1
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::MalformedGrid(format!("line {}: {e}", counts_line.0)))?;
    let symbols = symbols.unwrap_or_else(|| (0..counts.len()).map(|i| format!("X{i}")).collect());
    if symbols.len() != counts.len() {
        return Err(Error::MalformedGrid(format!(
            "{} species symbols but {} counts",
            symbols.len(),
            counts.len()
        )));
    }
    let natoms: usize = counts.iter().sum();
    let species: Vec<(String, usize)> = symbols.into_iter().zip(counts).filter(|(_, c)| *c > 0).collect();

    let (mut n, mut l) = lines.next_line("coordinate mode")?;
    if l.trim_start().starts_with(['S', 's']) {
        (n, l) = lines.next_line("coordinate mode")?;
    }
    let cartesian = match l.trim_start().chars().next() {
        Some('C' | 'c' | 'K' | 'k') => true,
        Some('D' | 'd') => false,
        _ => return Err(Error::MalformedGrid(format!("line {n}: expected Direct or Cartesian"))),
    };

    let mut positions = Vec::with_capacity(natoms);
    for _ in 0..natoms {
        let (n, l) = lines.next_line("positions")?;
        let v = parse_floats(l, n, 3)?;
        let p = Vec3::new(v[0], v[1], v[2]);
        positions.push(if cartesian { cell.to_fractional(&(p * scale)) } else { p });
    }
    let roster = AtomRoster::new(species, positions)?;

    let (dims, first_line) = loop {
        let (n, l) = lines.next_line("grid dimensions")?;
        if l.trim().is_empty() {
            continue;
        }
        break (
            dims_line(l).ok_or_else(|| Error::MalformedGrid(format!("line {n}: expected grid dimensions")))?,
            n,
        );
    };
    let count: usize = dims.iter().product();
    if count == 0 {
        return Err(Error::MalformedGrid(format!("line {first_line}: zero grid dimension")));
    }

    let want_first = block == DensityBlock::Total;
    let first = read_block(&mut lines, count, want_first)?;
    let raw = if want_first {
        first
    } else {
        // Look for the spin block.
        let mut found = false;
        while let Some((_, l)) = lines.inner.next() {
            if let Some(d) = dims_line(l) {
                if d != dims {
                    return Err(Error::MalformedGrid(format!(
                        "spin block dims {d:?} differ from {dims:?}"
                    )));
                }
                found = true;
                break;
            }
        }
        if found {
            read_block(&mut lines, count, true)?
        } else if block == DensityBlock::SingleBlockIsSpin {
            // Rescan: the first block was skipped without storing values.
            let mut lines = Lines { inner: text.lines().enumerate() };
            for _ in 0..first_line {
                lines.next_line("grid dimensions")?;
            }
            read_block(&mut lines, count, true)?
        } else {
            return Err(Error::MissingSpinBlock);
        }
    };

    let volume = cell.volume();
    let values = raw.into_iter().map(|v| v / volume).collect();
    let grid = VolumetricGrid::new(cell, dims, values)?;
    Ok((grid, roster))
}

fn read_block(lines: &mut Lines<'_>, count: usize, keep: bool) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(if keep { count } else { 0 });
    let mut seen = 0usize;
    while seen < count {
        let (n, l) = lines
            .inner
            .next()
            .map(|(n, l)| (n + 1, l))
            .ok_or_else(|| Error::MalformedGrid(format!("grid ends after {seen} of {count} values")))?;
        for tok in l.split_ascii_whitespace() {
            if seen == count {
                return Err(Error::MalformedGrid(format!("line {n}: more values than the grid holds")));
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::MalformedGrid(format!("line {n}: bad grid value {tok:?}")))?;
            if keep {
                out.push(v);
            }
            seen += 1;
        }
    }
    Ok(out)
}

/// Formats like Fortran `E18.11`: ` 0.44062142953E+00`.
pub(crate) fn fortran_e(x: f64) -> String {
    if x == 0.0 {
        return " 0.00000000000E+00".to_string();
    }
    let s = format!("{:.10e}", x.abs());
    let (mant, exp) = s.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let e = exp + 1;
    let sign = if x < 0.0 { "-" } else { " " };
    let esign = if e < 0 { '-' } else { '+' };
    format!("{sign}0.{digits}E{esign}{:02}", e.abs())
}

/// Writes a single-block CHGCAR-format file.
pub fn write_volumetric<W: Write>(grid: &VolumetricGrid, roster: &AtomRoster, mut out: W) -> Result<()> {
    if grid.dims.contains(&0) {
        return Err(Error::BadGeometry(format!("empty grid with dims {:?}", grid.dims)));
    }
    write_header(&grid.cell, roster, grid.dims, &mut out)?;
    let volume = grid.cell.volume();
    let mut line = String::with_capacity(96);
    for chunk in grid.values.chunks(5) {
        line.clear();
        for v in chunk {
            line.push(' ');
            line.push_str(&fortran_e(v * volume));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn write_header<W: Write>(cell: &CellGeometry, roster: &AtomRoster, dims: [usize; 3], out: &mut W) -> Result<()> {
    if cell.origin() != Vec3::zeros() {
        log::warn!("grid origin is not representable in CHGCAR format and is dropped");
    }
    writeln!(out, "hfcalc volumetric data")?;
    writeln!(out, "   1.0")?;
    for k in 0..3 {
        let v = cell.vector(k);
        writeln!(out, " {:>22} {:>22} {:>22}", v.x, v.y, v.z)?;
    }
    let names: Vec<&str> = roster.species().iter().map(|(s, _)| s.as_str()).collect();
    let counts: Vec<String> = roster.species().iter().map(|(_, n)| n.to_string()).collect();
    if roster.is_empty() {
        writeln!(out, "   0")?;
    } else {
        writeln!(out, "   {}", names.join("   "))?;
        writeln!(out, "   {}", counts.join("   "))?;
    }
    writeln!(out, "Direct")?;
    for p in roster.positions() {
        writeln!(out, " {:>22} {:>22} {:>22}", p.x, p.y, p.z)?;
    }
    writeln!(out)?;
    writeln!(out, "{:>5}{:>5}{:>5}", dims[0], dims[1], dims[2])?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const A0: f64 = 3.567;

    fn minimal(values: &[f64]) -> String {
        let mut s = String::from("fixture\n1.0\n3.567 0 0\n0 3.567 0\n0 0 3.567\nC\n1\nDirect\n0 0 0\n\n 2 2 2\n");
        for v in values {
            s.push_str(&format!(" {v}"));
        }
        s.push('\n');
        s
    }

    #[test]
    fn raw_values_are_divided_by_volume() {
        let v = A0 * A0 * A0;
        let (g, r) = parse_volumetric_str(&minimal(&[v; 8]), DensityBlock::SingleBlockIsSpin).unwrap();
        assert_eq!(g.dims(), [2, 2, 2]);
        assert_eq!(r.len(), 1);
        for x in g.values() {
            assert!((x - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn short_block_is_malformed() {
        let err = parse_volumetric_str(&minimal(&[1.0; 7]), DensityBlock::SingleBlockIsSpin).unwrap_err();
        assert!(matches!(err, Error::MalformedGrid(_)), "{err}");
    }

    #[test]
    fn single_block_needs_override() {
        let err = parse_volumetric_str(&minimal(&[1.0; 8]), DensityBlock::Spin).unwrap_err();
        assert!(matches!(err, Error::MissingSpinBlock));
    }

    #[test]
    fn second_block_is_spin_and_augmentation_is_skipped() {
        let v = A0 * A0 * A0;
        let mut s = minimal(&[2.0 * v; 8]);
        s.push_str("augmentation occupancies 1 15\n 0.27E+00 -0.33E-01 0.0 0.0 0.0\n");
        s.push_str(" 0.000E+00\n");
        s.push_str("    2    2    2\n");
        for i in 0..8 {
            s.push_str(&format!(" {}", (i as f64) * v));
        }
        s.push_str("\naugmentation occupancies 1 15\n 0.1 0.2\n");
        let (spin, _) = parse_volumetric_str(&s, DensityBlock::Spin).unwrap();
        assert_eq!(spin.values()[3], 3.0);
        let (total, _) = parse_volumetric_str(&s, DensityBlock::Total).unwrap();
        assert!(total.values().iter().all(|&x| (x - 2.0).abs() < 1e-15));
        let (over, _) = parse_volumetric_str(&s, DensityBlock::SingleBlockIsSpin).unwrap();
        assert_eq!(over, spin);
    }

    #[test]
    fn bad_scale_is_geometry_error() {
        let s = minimal(&[1.0; 8]).replacen("1.0\n", "-5.0\n", 1);
        assert!(matches!(
            parse_volumetric_str(&s, DensityBlock::SingleBlockIsSpin),
            Err(Error::BadGeometry(_))
        ));
        let s = minimal(&[1.0; 8]).replace("0 0 3.567", "0 0 0");
        assert!(matches!(
            parse_volumetric_str(&s, DensityBlock::SingleBlockIsSpin),
            Err(Error::BadGeometry(_))
        ));
    }

    #[test]
    fn cartesian_positions_and_missing_symbols() {
        let s = "x\n2.0\n1 0 0\n0 1 0\n0 0 1\n 2\nCartesian\n0.5 0.5 0.5\n1.0 0 0\n\n1 1 1\n 8.0\n";
        let (g, r) = parse_volumetric_str(s, DensityBlock::SingleBlockIsSpin).unwrap();
        assert_eq!(r.symbols(), vec!["X0", "X0"]);
        assert!((r.positions()[0] - Vec3::new(0.5, 0.5, 0.5)).norm() < 1e-15);
        assert!((r.positions()[1] - Vec3::new(0.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((g.values()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fortran_formatting() {
        assert_eq!(fortran_e(0.44062142953), " 0.44062142953E+00");
        assert_eq!(fortran_e(-1234.5), "-0.12345000000E+04");
        assert_eq!(fortran_e(1e-120), " 0.10000000000E-119");
        assert_eq!(fortran_e(0.0), " 0.00000000000E+00");
    }

    #[test]
    fn writes_dims_line_and_round_trips() {
        let cell = CellGeometry::cubic(A0).unwrap();
        let g = VolumetricGrid::new(cell, [2, 2, 2], (0..8).map(|i| i as f64 * 0.125 - 0.3).collect()).unwrap();
        let roster = AtomRoster::new(vec![("C".into(), 1)], vec![Vec3::new(0.25, 0.25, 0.25)]).unwrap();
        let mut buf = Vec::new();
        write_volumetric(&g, &roster, &mut buf).unwrap();
        let (back, r2) = parse_volumetric(&buf[..], DensityBlock::SingleBlockIsSpin).unwrap();
        assert_eq!(back.dims(), g.dims());
        assert_eq!(back.cell(), g.cell());
        assert_eq!(r2, roster);
        for (a, b) in back.values().iter().zip(g.values()) {
            assert!((a - b).abs() <= 1e-11 * b.abs().max(1e-300) * 10.0);
        }
    }

    #[test]
    fn empty_roster_round_trips() {
        let g = VolumetricGrid::new(CellGeometry::cubic(2.0).unwrap(), [1, 1, 2], vec![0.5, -0.25]).unwrap();
        let mut buf = Vec::new();
        write_volumetric(&g, &AtomRoster::default(), &mut buf).unwrap();
        let (back, r) = parse_volumetric(&buf[..], DensityBlock::SingleBlockIsSpin).unwrap();
        assert!(r.is_empty());
        assert_eq!(back.values(), g.values());
    }

    #[test]
    fn large_dims_header() {
        let cell = CellGeometry::cubic(21.402).unwrap();
        let mut buf = Vec::new();
        write_header(&cell, &AtomRoster::default(), [600, 600, 600], &mut buf).unwrap();
        let text = std::str::from_utf8(&buf).unwrap();
        let line = text.lines().find(|l| dims_line(l).is_some()).unwrap();
        assert_eq!(line.split_whitespace().collect::<Vec<_>>(), ["600", "600", "600"]);
        assert_eq!(line, "  600  600  600");
    }

    #[test]
    fn empty_grid_refused_on_write() {
        let cell = CellGeometry::cubic(1.0).unwrap();
        let g = VolumetricGrid::new(cell, [0, 2, 2], vec![]).unwrap();
        let err = write_volumetric(&g, &AtomRoster::default(), Vec::new()).unwrap_err();
        assert!(matches!(err, Error::BadGeometry(_)));
    }

    #[test]
    fn flat_index_maps_to_fractional_coordinate() {
        // Delta spike: only one value is non-zero and it must land at its fractional coordinate.
        let cell = CellGeometry::cubic(6.0).unwrap();
        let dims = [3, 4, 5];
        for flat in [0usize, 1, 7, 13, 59] {
            let mut values = vec![0.0; 60];
            values[flat] = 1.0;
            let g = VolumetricGrid::new(cell.clone(), dims, values).unwrap();
            let hot = g.values().iter().position(|&v| v == 1.0).unwrap();
            let f = g.fractional(hot);
            let (n1, n2, n3) = (3.0, 4.0, 5.0);
            let want = Vec3::new(
                (flat % 3) as f64 / n1,
                ((flat / 3) % 4) as f64 / n2,
                (flat / 12) as f64 / n3,
            );
            assert_eq!(f, want);
        }
    }
}
