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

//! Run manifests: hashed inputs and outputs, settings and timings.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_file(path: &Path) -> std::io::Result<(String, u64)> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(h.finalize()), total))
}

fn entry(path: &Path) -> CliResult<FileEntry> {
    let (sha256, bytes) =
        sha256_file(path).map_err(|e| CliError::input(format!("hashing {}: {e}", path.display())))?;
    Ok(FileEntry { path: path.display().to_string(), sha256, bytes })
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub threads: usize,
    pub settings: BTreeMap<String, String>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub timings_s: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

/// Collects manifest data while a command runs.
pub struct Recorder {
    manifest: Manifest,
    last: Instant,
}

impl Recorder {
    pub fn new(command: &str, threads: usize, settings: BTreeMap<String, String>) -> Self {
        Self {
            manifest: Manifest {
                tool: "hfcalc",
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                threads,
                settings,
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings_s: BTreeMap::new(),
                warnings: Vec::new(),
            },
            last: Instant::now(),
        }
    }

    /// Closes the current phase under `name`.
    pub fn phase(&mut self, name: &str) {
        let now = Instant::now();
        *self.manifest.timings_s.entry(name.to_string()).or_insert(0.0) += (now - self.last).as_secs_f64();
        log::info!("{name}: {:.3} s", (now - self.last).as_secs_f64());
        self.last = now;
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        self.manifest.inputs.push(entry(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> CliResult<()> {
        self.manifest.outputs.push(entry(path)?);
        Ok(())
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.manifest.warnings.push(msg.into());
    }

    pub fn warnings(&mut self, msgs: impl IntoIterator<Item = String>) {
        self.manifest.warnings.extend(msgs);
    }

    /// Writes `manifest-<command>.json` into `dir` and returns its path.
    pub fn finish(self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(format!("manifest-{}.json", self.manifest.command));
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::input(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }
}
