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

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hfcalc_bench::random_grid;
use hfcalc_core::volgrid::{parse_volumetric_str, write_volumetric, AtomRoster, DensityBlock};

fn round_trip(c: &mut Criterion) {
    let grid = random_grid(32, 6.0, 4);
    let roster = AtomRoster::default();
    let mut text = Vec::new();
    write_volumetric(&grid, &roster, &mut text).unwrap();
    let text = String::from_utf8(text).unwrap();
    c.bench_function("parse_32", |b| {
        b.iter(|| parse_volumetric_str(black_box(&text), DensityBlock::SingleBlockIsSpin).unwrap())
    });
    c.bench_function("write_32", |b| {
        b.iter(|| {
            let mut out = Vec::with_capacity(text.len());
            write_volumetric(black_box(&grid), &roster, &mut out).unwrap();
            out
        })
    });
}

criterion_group!(benches, round_trip);
criterion_main!(benches);
