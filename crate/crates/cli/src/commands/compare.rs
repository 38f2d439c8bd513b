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

//! Theory-experiment comparison and spin positioning.

use std::io::Write;
use std::path::{Path, PathBuf};

use hfcalc_core::compare::{
    error_metrics, load_dataset, match_by_position, position_spins, theory_from_table, Dataset, DatasetTag,
    MatchOptions, MatchResult, TheoryEntry,
};
use hfcalc_core::table::{read_tensor_table, TableRow};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, CoreContext};
use crate::manifest::Recorder;
use crate::pipeline::{self, TENSOR_TABLE};

#[derive(Serialize)]
struct Summary {
    dataset: String,
    quantity: Option<&'static str>,
    records: usize,
    matched: usize,
    unmatched: Vec<String>,
    ties: Vec<String>,
    flips: usize,
    count: usize,
    mape: Option<f64>,
    mare: Option<f64>,
    msre: Option<f64>,
    excluded: Vec<String>,
}

/// One compared record.
#[derive(Clone, Debug, PartialEq)]
pub struct Pairing {
    pub id: String,
    pub experiment: f64,
    pub theory: Option<f64>,
    pub site: Option<usize>,
    pub method: &'static str,
}

fn table_path(cfg: &RunConfig) -> PathBuf {
    cfg.compare_table.clone().unwrap_or_else(|| cfg.output_dir.join(TENSOR_TABLE))
}

fn load_table(cfg: &RunConfig, rec: &mut Recorder) -> CliResult<Vec<TableRow>> {
    let path = table_path(cfg);
    if !path.is_file() {
        return Err(CliError::input(format!(
            "NotComputed: no tensor table at {}; run `hfcalc compute` first",
            path.display()
        )));
    }
    rec.input(&path)?;
    Ok(read_tensor_table(pipeline::open(&path)?).ctx(path.display())?.1)
}

fn load_datasets(cfg: &RunConfig, rec: &mut Recorder) -> CliResult<Vec<Dataset>> {
    if cfg.datasets.is_empty() {
        return Err(CliError::config("no data sets configured (keys datasets.I, datasets.II, datasets.III, datasets.user)"));
    }
    let mut out = Vec::new();
    for (tag, path) in &cfg.datasets {
        let tag: DatasetTag = tag.parse().ctx("datasets")?;
        rec.input(path)?;
        out.push(load_dataset(pipeline::open(path)?, tag).ctx(path.display())?);
    }
    Ok(out)
}

fn theory_for(rows: &[TableRow], d: &Dataset) -> Vec<TheoryEntry> {
    d.quantity().map(|q| theory_from_table(rows, q)).unwrap_or_default()
}

fn options(cfg: &RunConfig) -> MatchOptions {
    MatchOptions { k: cfg.compare_k, theory_tolerance: cfg.theory_tolerance, sign: cfg.sign }
}

/// Pairs each record with a theory value: by position when the record has one, by value otherwise.
pub fn pair_records(cfg: &RunConfig, d: &Dataset, theory: &[TheoryEntry]) -> (Vec<Pairing>, Vec<String>, Vec<String>) {
    let (positioned, warnings) = match_by_position(&d.records, theory, cfg.position_tolerance, cfg.sign);
    let mut pairs: Vec<Pairing> = positioned
        .into_iter()
        .map(|m| Pairing { id: m.id, experiment: m.experiment, theory: m.theory, site: m.site, method: "position" })
        .collect();
    let free: Vec<_> = d.records.iter().filter(|r| r.position.is_none()).cloned().collect();
    let mut ties = Vec::new();
    for m in position_spins(&free, theory, &options(cfg)) {
        if m.tie {
            ties.push(m.id.clone());
        }
        let best = m.best.filter(|_| m.within_margin);
        pairs.push(Pairing {
            id: m.id,
            experiment: m.experiment,
            theory: best.as_ref().map(|b| b.theory),
            site: best.as_ref().map(|b| b.site),
            method: "value",
        });
    }
    pairs.sort_by(|a, b| a.id.cmp(&b.id));
    (pairs, warnings, ties)
}

fn opt(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::input(format!("{}: {e}", path.display()))
}

/// Writes `compare.json` and `compare.csv`; returns the JSON path.
pub fn run(cfg: &RunConfig) -> CliResult<PathBuf> {
    let mut rec = Recorder::new("compare", cfg.threads, cfg.settings.clone());
    let rows = load_table(cfg, &mut rec)?;
    let datasets = load_datasets(cfg, &mut rec)?;
    rec.phase("load");

    let csv_path = cfg.output_dir.join("compare.csv");
    let mut csv = pipeline::create(&csv_path)?;
    writeln!(csv, "dataset,id,method,site,experiment,theory,abs_rel_error").map_err(io_err(&csv_path))?;
    let mut summaries = Vec::new();
    for d in &datasets {
        let tag = format!("{:?}", d.tag).replace("User", "user");
        let theory = theory_for(&rows, d);
        let (pairs, warnings, ties) = pair_records(cfg, d, &theory);
        rec.warnings(warnings);
        let matched: Vec<&Pairing> = pairs.iter().filter(|p| p.theory.is_some()).collect();
        let metrics = error_metrics(&matched.iter().map(|p| (p.theory.unwrap(), p.experiment)).collect::<Vec<_>>());
        for p in &pairs {
            let err = match p.theory {
                Some(t) if p.experiment != 0.0 => format!("{:?}", (t - p.experiment).abs() / p.experiment.abs()),
                _ => String::new(),
            };
            writeln!(
                csv,
                "{tag},{},{},{},{:?},{},{err}",
                p.id,
                p.method,
                p.site.map(|s| s.to_string()).unwrap_or_default(),
                p.experiment,
                p.theory.map(|t| format!("{t:?}")).unwrap_or_default(),
            )
            .map_err(io_err(&csv_path))?;
        }
        let unmatched: Vec<String> = pairs.iter().filter(|p| p.theory.is_none()).map(|p| p.id.clone()).collect();
        if !unmatched.is_empty() {
            log::warn!("data set {tag}: {} unmatched record(s)", unmatched.len());
        }
        summaries.push(Summary {
            dataset: tag,
            quantity: d.quantity().map(|q| q.name()),
            records: d.records.len(),
            matched: matched.len(),
            unmatched,
            ties,
            flips: d.flips,
            count: metrics.count,
            mape: opt(metrics.mape),
            mare: opt(metrics.mare),
            msre: opt(metrics.msre),
            excluded: metrics.excluded.iter().map(|&k| matched[k].id.clone()).collect(),
        });
    }
    csv.flush().map_err(io_err(&csv_path))?;
    drop(csv);
    rec.output(&csv_path)?;
    let json_path = cfg.output_dir.join("compare.json");
    write_json(&json_path, &summaries)?;
    rec.output(&json_path)?;
    rec.phase("compare");
    rec.finish(&cfg.output_dir)?;
    Ok(json_path)
}

fn candidate_rows(tag: &str, m: &MatchResult, out: &mut impl Write) -> std::io::Result<()> {
    if m.candidates.is_empty() {
        let nearest = m.best.as_ref();
        return writeln!(
            out,
            "{tag},{},{:?},{:?},,,,,{},false,{}",
            m.id,
            m.experiment,
            m.margin,
            nearest.map(|b| format!("{:?}", b.residual)).unwrap_or_default(),
            m.tie
        );
    }
    for (rank, c) in m.candidates.iter().enumerate() {
        writeln!(
            out,
            "{tag},{},{:?},{:?},{},{},{:?},{:?},{:?},true,{}",
            m.id, m.experiment, m.margin, rank + 1, c.site, c.distance, c.theory, c.residual, m.tie
        )?;
    }
    Ok(())
}

/// Writes `position.csv` listing every candidate site per record; returns its path.
pub fn run_position(cfg: &RunConfig) -> CliResult<PathBuf> {
    let mut rec = Recorder::new("position", cfg.threads, cfg.settings.clone());
    let rows = load_table(cfg, &mut rec)?;
    let datasets = load_datasets(cfg, &mut rec)?;
    rec.phase("load");
    let path = cfg.output_dir.join("position.csv");
    let mut out = pipeline::create(&path)?;
    writeln!(out, "dataset,id,experiment,margin,rank,site,distance,theory,residual,within_margin,tie").map_err(io_err(&path))?;
    for d in &datasets {
        let tag = format!("{:?}", d.tag).replace("User", "user");
        let theory = theory_for(&rows, d);
        for m in position_spins(&d.records, &theory, &options(cfg)) {
            if m.tie {
                rec.warn(format!("record {}: equally good candidates with different values", m.id));
            }
            candidate_rows(&tag, &m, &mut out).map_err(io_err(&path))?;
        }
    }
    out.flush().map_err(io_err(&path))?;
    drop(out);
    rec.output(&path)?;
    rec.phase("position");
    rec.finish(&cfg.output_dir)?;
    Ok(path)
}
