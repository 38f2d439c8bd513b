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

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::Parser;
use hfcalc_cli::commands::field::COMPONENTS;
use hfcalc_cli::commands::synth::nv_roster;
use hfcalc_cli::error::CliResult;
use hfcalc_cli::{execute, Cli};
use hfcalc_core::dipole::{dipole_isolated_direct, relative_deviation, ExclusionSpec, Probe};
use hfcalc_core::hyperfine::SpinSystem;
use hfcalc_core::synth::{analytic_point_tensor, build_density, nv_like_recipe, Component, DensityRecipe};
use hfcalc_core::table::read_tensor_table;
use hfcalc_core::volgrid::{parse_volumetric, write_volumetric, AtomRoster, DensityBlock};
use hfcalc_core::{CellGeometry, ConstantsTable, Region, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const A: f64 = 3.567;

fn run(args: &[&str]) -> CliResult<PathBuf> {
    let cli = Cli::try_parse_from(std::iter::once("hfcalc").chain(args.iter().copied())).expect("arguments parse");
    execute(&cli)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Spike of weight 2 at the center of a 2×2×2 diamond supercell, empty roster.
fn spike_fixture(dir: &Path) -> (PathBuf, Vec3) {
    let edge = 2.0 * A;
    let center = Vec3::repeat(edge / 2.0);
    let recipe = DensityRecipe {
        cell: CellGeometry::cubic(edge).unwrap(),
        dims: [32; 3],
        components: vec![Component::Spike { center, weight: 2.0 }],
        spin: 1.0,
        normalized: true,
    };
    let synth = build_density(&recipe).unwrap();
    assert!(synth.warnings.is_empty());
    let path = dir.join("spike.vasp");
    write_volumetric(&synth.grid, &AtomRoster::default(), fs::File::create(&path).unwrap()).unwrap();
    (path, center)
}

fn nv_config(dir: &Path, density: &Path, cutoff: f64) -> PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        "density = {:?}\ncutoff = {cutoff}\ndensity_block = \"single\"\n\n[defect]\nvacancy = [0.5, 0.5, 0.5]\nsubstitution = [0.625, 0.625, 0.625]\nspecies = \"N\"\n",
        s(density)
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn spike_table_matches_point_dipole() {
    let dir = tempfile::tempdir().unwrap();
    let (density, center) = spike_fixture(dir.path());
    let cfg = nv_config(dir.path(), &density, 10.0);
    let out = dir.path().join("out");
    let table = run(&["--config", s(&cfg), "--output-dir", s(&out), "compute"]).unwrap();
    let (meta, rows) = read_tensor_table(std::io::BufReader::new(fs::File::open(&table).unwrap())).unwrap();
    assert!(meta.iter().any(|(k, v)| k == "backend" && v == "isolated_direct"));
    assert!(rows.iter().any(|r| r.region == Region::Support));

    let constants = ConstantsTable::codata2018();
    let spin = SpinSystem::nv();
    let axis = Vec3::repeat(1.0).normalize();
    let mut on_axis = 0;
    for r in &rows {
        assert!(r.distance <= 10.0 + 1e-9);
        assert!(!r.contact_present && !r.one_center_present);
        let u = constants.dipolar_prefactor(&spin, constants.species(&r.species).unwrap());
        let exact = analytic_point_tensor(&center, 2.0, &r.position).unwrap().w * u;
        assert!(relative_deviation(&r.a, &exact) < 1e-3, "site {} deviates", r.site);
        let d = r.position - center;
        if d.cross(&axis).norm() < 1e-6 {
            on_axis += 1;
            assert!(relative_deviation(&r.a, &exact) < 1e-10);
        }
    }
    assert!(on_axis >= 4, "{on_axis} on-axis sites");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest-compute.json")).unwrap()).unwrap();
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 1);
    assert_eq!(outputs[0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);
}

#[test]
fn zero_cutoff_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (density, _) = spike_fixture(dir.path());
    let cfg = nv_config(dir.path(), &density, 10.0);
    let err = run(&["--config", s(&cfg), "--output-dir", s(dir.path()), "compute", "--cutoff", "0"]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let status = Process::new(env!("CARGO_BIN_EXE_hfcalc"))
        .args(["--config", s(&cfg), "--set", "cutoff=0", "compute"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(status.stdout.is_empty());
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.vasp");
    fs::write(&bad, "not a grid\n").unwrap();
    let cfg = nv_config(dir.path(), &bad, 10.0);
    let err = run(&["--config", s(&cfg), "--output-dir", s(dir.path()), "compute"]).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let err = run(&["--config", s(&cfg), "--output-dir", s(dir.path()), "compare", "--dataset", "II=x.csv"]).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
    assert!(err.to_string().contains("NotComputed"));
    let missing = nv_config(dir.path(), &dir.path().join("absent.vasp"), 10.0);
    assert_eq!(run(&["--config", s(&missing), "compute"]).unwrap_err().exit_code(), 2);
}

#[test]
fn compute_is_deterministic_across_reruns_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let density = dir.path().join("nv.vasp");
    run(&["synth", "--nv-like", "--dims", "24", "--output", s(&density)]).unwrap();
    let cfg = nv_config(dir.path(), &density, 8.0);
    let mut tables = Vec::new();
    for (n, threads) in ["1", "3", "1"].iter().enumerate() {
        let out = dir.path().join(format!("out{n}"));
        let t = run(&["--config", s(&cfg), "--output-dir", s(&out), "--threads", threads, "compute"]).unwrap();
        tables.push(fs::read(t).unwrap());
    }
    assert!(tables.windows(2).all(|w| w[0] == w[1]));
    let text = String::from_utf8(tables.pop().unwrap()).unwrap();
    assert!(text.lines().any(|l| l.contains(",in_cell,N,")));
}

#[test]
fn relaxed_roster_sets_in_cell_species() {
    let (roster, v, n) = nv_roster(A, 2).unwrap();
    assert_eq!(roster.len(), 63);
    assert_eq!(roster.species().last().unwrap(), &("N".to_string(), 1));
    assert!(roster.positions().iter().all(|p| (p - v).norm() > 0.1));
    assert_eq!(roster.positions().last().unwrap(), &n);
}

fn read_grid(path: &Path) -> hfcalc_core::VolumetricGrid {
    parse_volumetric(std::io::BufReader::new(fs::File::open(path).unwrap()), DensityBlock::SingleBlockIsSpin).unwrap().0
}

#[test]
fn field_matches_direct_probes() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = nv_like_recipe(A, 2, 32).unwrap();
    let grid = build_density(&recipe).unwrap().grid;
    let density = dir.path().join("nv32.vasp");
    write_volumetric(&grid, &AtomRoster::default(), fs::File::create(&density).unwrap()).unwrap();
    let grid = read_grid(&density);
    let cfg = nv_config(dir.path(), &density, 8.0);
    let h = grid.spacing(0);
    let out = dir.path().join("field");
    run(&["--config", s(&cfg), "--output-dir", s(&out), "field", "--resolution", &format!("{h}")]).unwrap();
    let side: Value = serde_json::from_str(&fs::read_to_string(out.join("field.json")).unwrap()).unwrap();
    assert_eq!(side["stride"], serde_json::json!([1, 1, 1]));
    let prefactor = side["prefactor"].as_f64().unwrap();
    let comps: Vec<_> = COMPONENTS.iter().map(|c| read_grid(&out.join(format!("field_{c}.vasp")))).collect();

    let excl = ExclusionSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let flat = rng.gen_range(0..grid.len());
        let direct = dipole_isolated_direct(&grid, &Probe::new(grid.position(flat), "C"), &excl).unwrap();
        let field = hfcalc_core::DipoleTensor::from_components(
            std::array::from_fn(|c| comps[c].values()[flat] / prefactor),
            direct.probe,
            hfcalc_core::Backend::IsolatedFft,
        );
        assert!(relative_deviation(&field.w, &direct.w) < 1e-8, "probe {flat}");
    }
}

#[test]
fn field_resolution_rules() {
    let dir = tempfile::tempdir().unwrap();
    let edge = 0.036 * 60.0;
    let grid = hfcalc_core::VolumetricGrid::zeros(CellGeometry::cubic(edge).unwrap(), [60; 3]);
    let density = dir.path().join("zero.vasp");
    write_volumetric(&grid, &AtomRoster::default(), fs::File::create(&density).unwrap()).unwrap();
    let cfg = nv_config(dir.path(), &density, 8.0);
    let out = dir.path().join("f");
    run(&["--config", s(&cfg), "--output-dir", s(&out), "field", "--resolution", "0.09"]).unwrap();
    let side: Value = serde_json::from_str(&fs::read_to_string(out.join("field.json")).unwrap()).unwrap();
    assert_eq!(side["stride"], serde_json::json!([2, 2, 2]));
    for c in COMPONENTS {
        let g = read_grid(&out.join(format!("field_{c}.vasp")));
        assert_eq!(g.dims(), [30; 3]);
        assert!(g.values().iter().all(|&v| v == 0.0));
    }
    let err = run(&["--config", s(&cfg), "--output-dir", s(&out), "field", "--resolution", "0.02"]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

fn summary(path: &Path) -> Value {
    serde_json::from_str::<Value>(&fs::read_to_string(path).unwrap()).unwrap()[0].clone()
}

#[test]
fn compare_reports_metrics_and_unmatched() {
    let dir = tempfile::tempdir().unwrap();
    let (density, _) = spike_fixture(dir.path());
    let cfg = nv_config(dir.path(), &density, 6.0);
    let out = dir.path().join("out");
    let table = run(&["--config", s(&cfg), "--output-dir", s(&out), "compute"]).unwrap();
    let (_, rows) = read_tensor_table(std::io::BufReader::new(fs::File::open(&table).unwrap())).unwrap();

    let mut exact = String::from("id,quantity,value_MHz,unc_MHz,x,y,z\n");
    let mut flipped = exact.clone();
    for (k, r) in rows.iter().take(6).enumerate() {
        let p = r.position;
        exact.push_str(&format!("p{k},A_zz,{:?},0.001,{:?},{:?},{:?}\n", r.a_zz, p.x, p.y, p.z));
        flipped.push_str(&format!("p{k},A_zz,{:?},0.001,{:?},{:?},{:?}\n", -r.a_zz, p.x, p.y, p.z));
    }
    let far = "far,A_zz,0.5,0.001,100.0,100.0,100.0\n";
    let v = rows[2].a_zz;
    let value_only = format!("v0,A_zz,{v:?},0.001,,,\n");
    let files = [("exact", exact.clone() + &value_only), ("flipped", flipped + &value_only), ("unmatched", exact + far)];
    let mut reports = Vec::new();
    for (name, text) in files {
        let data = dir.path().join(format!("{name}.csv"));
        fs::write(&data, text).unwrap();
        let o = dir.path().join(name);
        let report = run(&[
            "--config", s(&cfg), "--output-dir", s(&o), "compare", "--table", s(&table), "--dataset", &format!("II={}", s(&data)),
        ])
        .unwrap();
        assert!(o.join("compare.csv").is_file() && o.join("manifest-compare.json").is_file());
        reports.push(summary(&report));
    }
    assert_eq!(reports[0]["mape"].as_f64().unwrap(), 0.0);
    assert_eq!(reports[0]["matched"], 7);
    assert_eq!(reports[1]["mape"], reports[0]["mape"]);
    let negatives = rows.iter().take(6).filter(|r| r.a_zz > 0.0).count() + usize::from(v < 0.0);
    assert_eq!(reports[1]["flips"].as_u64().unwrap() as usize, negatives);
    assert_eq!(reports[2]["unmatched"], serde_json::json!(["far"]));
    assert_eq!(reports[2]["mape"].as_f64().unwrap(), 0.0);

    let pos = run(&["--config", s(&cfg), "--output-dir", s(&out), "position", "--table", s(&table), "--dataset", &format!("II={}", s(&dir.path().join("exact.csv")))]).unwrap();
    let text = fs::read_to_string(pos).unwrap();
    assert!(text.lines().skip(1).any(|l| l.starts_with("II,v0,") && l.contains(",true,")));
}

#[test]
fn convert_extracts_blocks_and_sites() {
    let dir = tempfile::tempdir().unwrap();
    let (density, _) = spike_fixture(dir.path());
    let copy = dir.path().join("copy.vasp");
    run(&["convert", "--input", s(&density), "--block", "single", "--output", s(&copy)]).unwrap();
    assert_eq!(fs::read(&density).unwrap(), fs::read(&copy).unwrap());
    let cfg = nv_config(dir.path(), &density, 5.0);
    let sites = dir.path().join("sites.csv");
    run(&["--config", s(&cfg), "convert", "--sites", "--output", s(&sites)]).unwrap();
    let text = fs::read_to_string(sites).unwrap();
    assert!(text.lines().filter(|l| !l.starts_with('#')).count() > 10);
}
