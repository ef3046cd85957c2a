use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{split_seed, ExperimentResult, ExperimentSpec, SEED_SCHEME};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub spec: ExperimentSpec,
    pub seed_scheme: String,
    pub master_seed: u64,
    pub split_seed: u64,
    pub pool_size: usize,
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub curve: PathBuf,
    pub mcnemar: PathBuf,
    pub manifest: PathBuf,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `curve.csv`, `mcnemar.csv` and `manifest.json` into `dir`.
pub fn emit_reports(result: &ExperimentResult, spec: &ExperimentSpec, dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        curve: dir.join("curve.csv"),
        mcnemar: dir.join("mcnemar.csv"),
        manifest: dir.join("manifest.json"),
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "dataset",
        "bins",
        "classifier",
        "m",
        "mean_acc",
        "stddev",
        "n_converged",
    ])?;
    for p in &result.curve.points {
        w.write_record([
            result.curve.dataset.clone(),
            result.curve.bins.to_string(),
            p.classifier.to_string(),
            p.m.to_string(),
            format!("{:.6}", p.mean()),
            format!("{:.6}", p.stddev()),
            p.n_converged().to_string(),
        ])?;
    }
    write(
        &files.curve,
        &w.into_inner().map_err(|e| Error::io(&files.curve, e.into_error()))?,
    )?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["pair", "m", "wins_A", "wins_B", "ties"])?;
    for t in &result.mcnemar {
        w.write_record([
            format!("{} vs {}", t.a, t.b),
            t.m.to_string(),
            t.wins_a.to_string(),
            t.wins_b.to_string(),
            t.ties.to_string(),
        ])?;
    }
    write(
        &files.mcnemar,
        &w.into_inner().map_err(|e| Error::io(&files.mcnemar, e.into_error()))?,
    )?;

    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        seed_scheme: SEED_SCHEME.to_string(),
        master_seed: spec.seed,
        split_seed: split_seed(spec.seed),
        pool_size: result.pool_size,
        test_size: result.test_size,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write(&files.manifest, &json)?;
    Ok(files)
}

#[derive(Debug, Deserialize)]
struct PredictionRow {
    instance: usize,
    #[serde(rename = "true")]
    truth: usize,
    predicted: usize,
}

/// Reads an `instance,true,predicted,...` CSV into (instance, truth,
/// prediction) triples.
pub fn read_predictions(source: impl Read) -> Result<Vec<(usize, usize, usize)>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    reader
        .deserialize::<PredictionRow>()
        .map(|r| {
            let r = r?;
            Ok((r.instance, r.truth, r.predicted))
        })
        .collect()
}
