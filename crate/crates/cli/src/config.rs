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

//! Run configuration: a TOML file flattened to dotted keys, with overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hfcalc_core::dipole::{Backend, ExclusionMode, ExclusionSpec};
use hfcalc_core::lattice::DefectSpec;
use hfcalc_core::volgrid::DensityBlock;
use hfcalc_core::{SignConvention, Unit, Vec3};
use toml::Value;

use crate::error::{CliError, CliResult};

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "HFCALC_CONFIG";

const KNOWN_KEYS: &[&str] = &[
    "density",
    "density_block",
    "contact",
    "constants",
    "output_dir",
    "cutoff",
    "backend",
    "threads",
    "unit",
    "spin",
    "axis",
    "allow_support_contact",
    "exclusion.mode",
    "defect.vacancy",
    "defect.substitution",
    "defect.species",
    "defect.center",
    "lattice.a",
    "lattice.host",
    "lattice.max_shift",
    "compare.table",
    "compare.k",
    "compare.theory_tolerance",
    "compare.sign",
    "compare.position_tolerance",
    "datasets.I",
    "datasets.II",
    "datasets.III",
    "datasets.user",
    "field.resolution",
    "field.species",
    "field.memory_limit",
];

/// Flat key/value view of the configuration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap {
    values: BTreeMap<String, Value>,
    base: Option<PathBuf>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            _ => {
                out.insert(key, v.clone());
            }
        }
    }
}

fn parse_value(text: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

impl ConfigMap {
    pub fn from_toml_str(text: &str, base: Option<&Path>) -> CliResult<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))?;
        let mut values = BTreeMap::new();
        flatten("", &table, &mut values);
        let map = Self { values, base: base.map(Path::to_path_buf) };
        map.check_keys()?;
        Ok(map)
    }

    /// Reads `path`, or the file named by [`CONFIG_ENV`], or starts empty.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let path = path.map(Path::to_path_buf).or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| CliError::config(format!("config {}: {e}", p.display())))?;
                Self::from_toml_str(&text, p.parent())
            }
            None => Ok(Self::default()),
        }
    }

    /// Applies `key=value` overrides; values are TOML literals or bare strings.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> CliResult<()> {
        for o in overrides {
            let (k, v) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("override {:?} is not key=value", o.as_ref())))?;
            self.values.insert(k.trim().to_string(), parse_value(v.trim()));
        }
        self.check_keys()
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.values.insert(key.to_string(), value);
    }

    fn check_keys(&self) -> CliResult<()> {
        for k in self.values.keys() {
            if !KNOWN_KEYS.contains(&k.as_str()) && !k.starts_with("exclusion.") {
                return Err(CliError::config(format!("unknown configuration key {k:?}")));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.values.iter()
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    fn bad(key: &str, want: &str, v: &Value) -> CliError {
        CliError::config(format!("{key}: expected {want}, found {v}"))
    }

    pub fn f64(&self, key: &str) -> CliResult<Option<f64>> {
        self.get(key)
            .map(|v| match v {
                Value::Float(x) => Ok(*x),
                Value::Integer(i) => Ok(*i as f64),
                _ => Err(Self::bad(key, "a number", v)),
            })
            .transpose()
    }

    pub fn usize(&self, key: &str) -> CliResult<Option<usize>> {
        self.get(key)
            .map(|v| match v {
                Value::Integer(i) if *i >= 0 => Ok(*i as usize),
                _ => Err(Self::bad(key, "a non-negative integer", v)),
            })
            .transpose()
    }

    pub fn bool(&self, key: &str) -> CliResult<Option<bool>> {
        self.get(key)
            .map(|v| v.as_bool().ok_or_else(|| Self::bad(key, "true or false", v)))
            .transpose()
    }

    pub fn string(&self, key: &str) -> CliResult<Option<String>> {
        self.get(key)
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| Self::bad(key, "a string", v)))
            .transpose()
    }

    /// Paths resolve against the configuration file's directory.
    pub fn path(&self, key: &str) -> CliResult<Option<PathBuf>> {
        Ok(self.string(key)?.map(|s| {
            let p = PathBuf::from(s);
            match &self.base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        }))
    }

    pub fn vec3(&self, key: &str) -> CliResult<Option<Vec3>> {
        self.get(key)
            .map(|v| {
                let arr = v.as_array().filter(|a| a.len() == 3).ok_or_else(|| Self::bad(key, "[x, y, z]", v))?;
                let mut out = Vec3::zeros();
                for (k, x) in arr.iter().enumerate() {
                    out[k] = match x {
                        Value::Float(f) => *f,
                        Value::Integer(i) => *i as f64,
                        _ => return Err(Self::bad(key, "[x, y, z]", v)),
                    };
                }
                Ok(out)
            })
            .transpose()
    }

    /// Settings as strings, for manifests.
    pub fn to_strings(&self) -> BTreeMap<String, String> {
        self.values.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()
    }
}

/// Typed, validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub density: Option<PathBuf>,
    pub density_block: DensityBlock,
    pub contact: Option<PathBuf>,
    pub constants: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub cutoff: f64,
    pub backend: Backend,
    pub threads: usize,
    pub unit: Unit,
    pub spin: f64,
    pub axis: Vec3,
    pub allow_support_contact: bool,
    pub exclusion: ExclusionSpec,
    pub defect: Option<DefectSpec>,
    pub lattice_a: f64,
    pub lattice_host: String,
    pub max_shift: f64,
    pub compare_table: Option<PathBuf>,
    pub compare_k: f64,
    pub theory_tolerance: f64,
    pub sign: SignConvention,
    pub position_tolerance: f64,
    pub datasets: Vec<(String, PathBuf)>,
    pub field_resolution: Option<f64>,
    pub field_species: String,
    pub memory_limit: usize,
    pub settings: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn from_map(map: &ConfigMap) -> CliResult<Self> {
        let cutoff = map.f64("cutoff")?.unwrap_or(30.0);
        if !(cutoff > 0.0) {
            return Err(CliError::config(format!("cutoff must be positive, got {cutoff}")));
        }
        let density_block = match map.string("density_block")?.as_deref() {
            None | Some("spin") => DensityBlock::Spin,
            Some("single") => DensityBlock::SingleBlockIsSpin,
            Some("total") => DensityBlock::Total,
            Some(s) => return Err(CliError::config(format!("density_block {s:?}: use spin, single or total"))),
        };
        let backend = match map.string("backend")? {
            Some(s) => s.parse::<Backend>().map_err(|e| CliError::config(format!("backend: {e}")))?,
            None => Backend::IsolatedDirect,
        };
        let threads = match map.usize("threads")? {
            Some(0) => return Err(CliError::config("threads must be at least 1")),
            Some(n) => n,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        let unit = match map.string("unit")? {
            Some(s) => s.parse::<Unit>().map_err(|e| CliError::config(format!("unit: {e}")))?,
            None => Unit::MHz,
        };
        let axis = match map.vec3("axis")? {
            Some(v) if v.norm() > 0.0 => v.normalize(),
            Some(_) => return Err(CliError::config("axis must be nonzero")),
            None => Vec3::new(1.0, 1.0, 1.0).normalize(),
        };

        let mut exclusion = ExclusionSpec::default();
        for (k, v) in map.entries() {
            if let Some(species) = k.strip_prefix("exclusion.") {
                if species == "mode" {
                    exclusion.mode = match v.as_str() {
                        Some("voxel_center") => ExclusionMode::VoxelCenter,
                        Some("none") => ExclusionMode::None,
                        _ => return Err(CliError::config(format!("exclusion.mode {v}: use voxel_center or none"))),
                    };
                } else {
                    let r = map.f64(k)?.expect("present");
                    exclusion.radius_by_species.insert(species.to_string(), r);
                }
            }
        }
        exclusion.validate().map_err(|e| CliError::config(format!("exclusion: {e}")))?;

        let defect = match (map.vec3("defect.vacancy")?, map.vec3("defect.substitution")?) {
            (Some(v), Some(s)) => {
                let species = map.string("defect.species")?.unwrap_or_else(|| "N".into());
                let mut d = DefectSpec::new(v, s, &species);
                d.axis = axis;
                d.center = map.vec3("defect.center")?;
                Some(d)
            }
            (None, None) => None,
            _ => return Err(CliError::config("defect.vacancy and defect.substitution go together")),
        };

        let sign = match map.string("compare.sign")?.as_deref() {
            None | Some("magnitude") => SignConvention::Magnitude,
            Some("signed") => SignConvention::Signed,
            Some(s) => return Err(CliError::config(format!("compare.sign {s:?}: use magnitude or signed"))),
        };
        let mut datasets = Vec::new();
        for tag in ["I", "II", "III", "user"] {
            if let Some(p) = map.path(&format!("datasets.{tag}"))? {
                datasets.push((tag.to_string(), p));
            }
        }
        let positive = |key: &str, v: f64| {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(CliError::config(format!("{key} must be positive, got {v}")))
            }
        };
        let cfg = Self {
            density: map.path("density")?,
            density_block,
            contact: map.path("contact")?,
            constants: map.path("constants")?,
            output_dir: map.path("output_dir")?.unwrap_or_else(|| PathBuf::from(".")),
            cutoff,
            backend,
            threads,
            unit,
            spin: positive("spin", map.f64("spin")?.unwrap_or(1.0))?,
            axis,
            allow_support_contact: map.bool("allow_support_contact")?.unwrap_or(false),
            exclusion,
            defect,
            lattice_a: positive("lattice.a", map.f64("lattice.a")?.unwrap_or(3.567))?,
            lattice_host: map.string("lattice.host")?.unwrap_or_else(|| "C".into()),
            max_shift: positive("lattice.max_shift", map.f64("lattice.max_shift")?.unwrap_or(0.5))?,
            compare_table: map.path("compare.table")?,
            compare_k: positive("compare.k", map.f64("compare.k")?.unwrap_or(3.0))?,
            theory_tolerance: map.f64("compare.theory_tolerance")?.unwrap_or(0.02),
            sign,
            position_tolerance: positive(
                "compare.position_tolerance",
                map.f64("compare.position_tolerance")?.unwrap_or(0.3),
            )?,
            datasets,
            field_resolution: map.f64("field.resolution")?,
            field_species: map.string("field.species")?.unwrap_or_else(|| "C".into()),
            memory_limit: map.usize("field.memory_limit")?.unwrap_or(4 << 30),
            settings: map.to_strings(),
        };
        if cfg.theory_tolerance < 0.0 {
            return Err(CliError::config("compare.theory_tolerance must be non-negative"));
        }
        Ok(cfg)
    }

    /// Checks that every referenced input exists.
    pub fn check_inputs(&self, need_density: bool) -> CliResult<()> {
        if need_density && self.density.is_none() {
            return Err(CliError::config("no density file configured (key `density`)"));
        }
        for p in [&self.density, &self.contact, &self.constants].into_iter().flatten() {
            if !p.is_file() {
                return Err(CliError::config(format!("input {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
